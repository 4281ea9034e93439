// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <variant>

#include "enerf/geometry.hpp"
#include "enerf/image.hpp"

namespace enerf {

enum class TextureKind { checker, stripes, value_noise, text_glyphs };

const char* texture_kind_name(TextureKind kind);
TextureKind texture_kind_from_name(const std::string& name);

/// Procedural texture over 2D surface coordinates. Output is linear RGB in
/// [0, 255] for any input; patterns repeat with cell size `period`.
struct ProceduralTexture {
  TextureKind kind = TextureKind::checker;
  double period = 0.25;    // scene units per pattern cell
  double contrast = 1.0;   // in [0, 1], amplitude around mid-gray
  std::uint64_t seed = 0;  // palette and pattern selection

  Eigen::Vector3d sample(double u, double v) const;
};

/// Infinite textured plane; the plane is z = 0 of `world_from_plane`, with
/// texture coordinates (x, y) of the hit point in plane frame / scale.
struct TexturedPlane {
  Pose world_from_plane;
  ProceduralTexture texture;
  double texture_scale = 1.0;
};

/// Axis-aligned room [-half_extent, half_extent]^3 seen from inside; faces
/// are textured independently. Face order: -x, +x, -y, +y, -z, +z.
struct BoxRoom {
  double half_extent = 1.0;
  std::array<ProceduralTexture, 6> faces;
};

struct Scene {
  std::variant<TexturedPlane, BoxRoom> geometry;
  /// Intensity returned for rays that miss all geometry. Without it, a miss
  /// raises CoverageError.
  std::optional<Eigen::Vector3d> background;

  Eigen::AlignedBox3d bounding_box() const;
};

/// Analytic radiance along a ray: intersection, texture lookup, RGB in
/// [0, 255]. Pure and deterministic.
Eigen::Vector3d scene_intensity(const Scene& scene, const Ray& ray);

/// Full sharp render through the camera model (pixel centers at x + 0.5).
ImageBuffer scene_render(const Scene& scene, const Pose& world_from_cam, const CameraModel& cam,
                         int threads = 1);

Scene load_scene(const std::filesystem::path& json_path);
void save_scene(const std::filesystem::path& json_path, const Scene& scene);

}  // namespace enerf
