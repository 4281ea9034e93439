// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "enerf/scenes.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "enerf/common.hpp"
#include "enerf/rng.hpp"
#include "enerf/threading.hpp"

namespace enerf {

namespace {

using nlohmann::json;

double cell_hash01(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
  std::uint64_t h = split_mix(seed ^ (static_cast<std::uint64_t>(ix) * 0x9e3779b97f4a7c15ULL));
  h = split_mix(h ^ (static_cast<std::uint64_t>(iy) * 0xc2b2ae3d27d4eb4fULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth_step(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

// Two-octave lattice value noise in [0, 1].
double value_noise(double u, double v, std::uint64_t seed) {
  const auto lattice = [&](double x, double y, std::uint64_t s) {
    const double fx = std::floor(x), fy = std::floor(y);
    const auto ix = static_cast<std::int64_t>(fx);
    const auto iy = static_cast<std::int64_t>(fy);
    const double tx = smooth_step(x - fx);
    const double ty = smooth_step(y - fy);
    const double v00 = cell_hash01(ix, iy, s);
    const double v10 = cell_hash01(ix + 1, iy, s);
    const double v01 = cell_hash01(ix, iy + 1, s);
    const double v11 = cell_hash01(ix + 1, iy + 1, s);
    const double a = v00 + tx * (v10 - v00);
    const double b = v01 + tx * (v11 - v01);
    return a + ty * (b - a);
  };
  return 0.65 * lattice(u, v, seed) + 0.35 * lattice(2.0 * u + 17.0, 2.0 * v - 11.0, seed ^ 0xabcdef);
}

// 5x7 bitmap glyphs '0'-'9' 'A'-'F', row-major, bit 4 = leftmost column.
constexpr std::uint8_t kGlyphs[16][7] = {
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},
    {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}, {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},
    {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}, {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C},
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}, {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}};

struct Palette {
  Eigen::Vector3d low;
  Eigen::Vector3d high;
};

// Low-saturation two-color palette centered on mid-gray; `contrast` scales
// the separation, so outputs stay in [0, 255] for contrast in [0, 1].
// splitmix chain instead of a full engine: this runs once per texture lookup.
Palette make_palette(std::uint64_t seed, double contrast) {
  const double mid = 127.5;
  const double amp = 127.5 * std::clamp(contrast, 0.0, 1.0);
  std::uint64_t h = split_mix(seed ^ 0x5eedULL);
  const auto next01 = [&h] {
    h = split_mix(h);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  };
  Eigen::Vector3d jitter_low, jitter_high;
  for (int c = 0; c < 3; ++c) {
    jitter_low[c] = 0.85 + 0.15 * next01();
    jitter_high[c] = 0.85 + 0.15 * next01();
  }
  Palette p;
  p.low = (Eigen::Vector3d::Constant(mid) - amp * jitter_low).cwiseMax(0.0);
  p.high = (Eigen::Vector3d::Constant(mid) + amp * jitter_high).cwiseMin(255.0);
  return p;
}

}  // namespace

const char* texture_kind_name(TextureKind kind) {
  switch (kind) {
    case TextureKind::checker: return "checker";
    case TextureKind::stripes: return "stripes";
    case TextureKind::value_noise: return "value-noise";
    case TextureKind::text_glyphs: return "text-glyphs";
  }
  return "checker";
}

TextureKind texture_kind_from_name(const std::string& name) {
  if (name == "checker") return TextureKind::checker;
  if (name == "stripes") return TextureKind::stripes;
  if (name == "value-noise") return TextureKind::value_noise;
  if (name == "text-glyphs") return TextureKind::text_glyphs;
  throw ConfigError("unknown texture id '" + name + "'");
}

Eigen::Vector3d ProceduralTexture::sample(double u, double v) const {
  const Palette pal = make_palette(seed, contrast);
  const double su = u / period;
  const double sv = v / period;
  switch (kind) {
    case TextureKind::checker: {
      const auto cu = static_cast<std::int64_t>(std::floor(su));
      const auto cv = static_cast<std::int64_t>(std::floor(sv));
      return ((cu + cv) & 1) == 0 ? pal.low : pal.high;
    }
    case TextureKind::stripes: {
      const auto cu = static_cast<std::int64_t>(std::floor(su));
      return (cu & 1) == 0 ? pal.low : pal.high;
    }
    case TextureKind::value_noise: {
      const double t = value_noise(su, sv, seed);
      return pal.low + t * (pal.high - pal.low);
    }
    case TextureKind::text_glyphs: {
      const auto cu = static_cast<std::int64_t>(std::floor(su));
      const auto cv = static_cast<std::int64_t>(std::floor(sv));
      const double fu = su - std::floor(su);
      const double fv = sv - std::floor(sv);
      // 5x7 glyph centered in a 7x9 cell grid (1-unit margin).
      const int col = static_cast<int>(fu * 7.0) - 1;
      const int row = static_cast<int>(fv * 9.0) - 1;
      if (col < 0 || col > 4 || row < 0 || row > 6) return pal.low;
      const auto glyph = static_cast<std::size_t>(
          split_mix(seed ^ static_cast<std::uint64_t>(cu * 0x100000001b3LL + cv)) & 15);
      const bool on = (kGlyphs[glyph][row] >> (4 - col)) & 1;
      return on ? pal.high : pal.low;
    }
  }
  return pal.low;
}

Eigen::AlignedBox3d Scene::bounding_box() const {
  if (const auto* room = std::get_if<BoxRoom>(&geometry)) {
    const double h = room->half_extent;
    return Eigen::AlignedBox3d(Eigen::Vector3d(-h, -h, -h), Eigen::Vector3d(h, h, h));
  }
  const auto& plane = std::get<TexturedPlane>(geometry);
  // A nominal box around the plane origin; the field config may override.
  Eigen::AlignedBox3d box(plane.world_from_plane.translation - Eigen::Vector3d::Constant(2.0),
                          plane.world_from_plane.translation + Eigen::Vector3d::Constant(2.0));
  return box;
}

namespace {

std::optional<Eigen::Vector3d> intersect_plane(const TexturedPlane& plane, const Ray& ray) {
  const Pose plane_from_world = plane.world_from_plane.inverse();
  const Eigen::Vector3d o = plane_from_world.apply(ray.origin);
  const Eigen::Vector3d d = plane_from_world.rotation.rotate(ray.direction);
  if (std::abs(d.z()) < 1e-12) return std::nullopt;
  const double t = -o.z() / d.z();
  if (t <= 1e-9) return std::nullopt;
  const Eigen::Vector3d hit = o + t * d;
  return plane.texture.sample(hit.x() / plane.texture_scale, hit.y() / plane.texture_scale);
}

std::optional<Eigen::Vector3d> intersect_room(const BoxRoom& room, const Ray& ray) {
  const double h = room.half_extent;
  const Eigen::Vector3d& o = ray.origin;
  const Eigen::Vector3d& d = ray.direction;
  if (o.cwiseAbs().maxCoeff() > h) return std::nullopt;  // walls face inward
  double best_t = std::numeric_limits<double>::infinity();
  int best_face = -1;
  for (int axis = 0; axis < 3; ++axis) {
    if (d[axis] == 0.0) continue;
    const double bound = d[axis] > 0.0 ? h : -h;
    const double t = (bound - o[axis]) / d[axis];
    if (t > 1e-9 && t < best_t) {
      best_t = t;
      best_face = 2 * axis + (d[axis] > 0.0 ? 1 : 0);
    }
  }
  if (best_face < 0) return std::nullopt;
  const Eigen::Vector3d hit = o + best_t * d;
  const int axis = best_face / 2;
  const int ua = (axis + 1) % 3;
  const int va = (axis + 2) % 3;
  return room.faces[best_face].sample(hit[ua], hit[va]);
}

}  // namespace

Eigen::Vector3d scene_intensity(const Scene& scene, const Ray& ray) {
  std::optional<Eigen::Vector3d> hit;
  if (const auto* room = std::get_if<BoxRoom>(&scene.geometry)) {
    hit = intersect_room(*room, ray);
  } else {
    hit = intersect_plane(std::get<TexturedPlane>(scene.geometry), ray);
  }
  if (hit) return *hit;
  if (scene.background) return *scene.background;
  throw CoverageError("scene_intensity: ray misses scene geometry and no background is declared");
}

ImageBuffer scene_render(const Scene& scene, const Pose& world_from_cam, const CameraModel& cam,
                         int threads) {
  cam.validate();
  ImageBuffer img = ImageBuffer::zeros(cam.width, cam.height, 3);
  parallel_chunks(cam.height, resolve_threads(threads), [&](int, std::int64_t y0, std::int64_t y1) {
    for (std::int64_t y = y0; y < y1; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        const Ray ray = backproject(cam, world_from_cam, {x + 0.5, y + 0.5}, 0.01, 100.0);
        const Eigen::Vector3d rgb = scene_intensity(scene, ray);
        for (int c = 0; c < 3; ++c) img.at(x, static_cast<int>(y), c) = static_cast<float>(rgb[c]);
      }
    }
  });
  return img;
}

namespace {

json texture_to_json(const ProceduralTexture& t) {
  return json{{"id", texture_kind_name(t.kind)},
              {"period", t.period},
              {"contrast", t.contrast},
              {"seed", t.seed}};
}

ProceduralTexture texture_from_json(const json& j) {
  ProceduralTexture t;
  t.kind = texture_kind_from_name(j.at("id").get<std::string>());
  t.period = j.value("period", 0.25);
  t.contrast = j.value("contrast", 1.0);
  t.seed = j.value("seed", std::uint64_t{0});
  if (!(t.period > 0.0)) throw ConfigError("texture: period must be positive");
  if (t.contrast < 0.0 || t.contrast > 1.0) throw ConfigError("texture: contrast must be in [0,1]");
  return t;
}

}  // namespace

Scene load_scene(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw ConfigError("load_scene: cannot open " + json_path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataFormatError("load_scene: " + json_path.string() + ": " + e.what());
  }
  Scene scene;
  const std::string variant = j.at("variant").get<std::string>();
  if (variant == "textured_plane") {
    TexturedPlane plane;
    if (j.contains("pose")) {
      const auto& pj = j.at("pose");
      const auto t = pj.at("t").get<std::vector<double>>();
      const auto q = pj.at("q").get<std::vector<double>>();
      if (t.size() != 3 || q.size() != 4) throw ConfigError("load_scene: pose needs t[3], q[4]");
      plane.world_from_plane.translation = Eigen::Vector3d(t[0], t[1], t[2]);
      plane.world_from_plane.rotation = Rotation(q[0], q[1], q[2], q[3]);
    }
    plane.texture = texture_from_json(j.at("texture"));
    plane.texture_scale = j.value("texture_scale", 1.0);
    scene.geometry = plane;
  } else if (variant == "box_room") {
    BoxRoom room;
    room.half_extent = j.value("half_extent", 1.0);
    if (!(room.half_extent > 0.0)) throw ConfigError("load_scene: half_extent must be positive");
    const auto& faces = j.at("faces");
    if (!faces.is_array() || faces.size() != 6) {
      throw ConfigError("load_scene: box_room needs a 6-element faces array (-x,+x,-y,+y,-z,+z)");
    }
    for (int i = 0; i < 6; ++i) room.faces[i] = texture_from_json(faces[i]);
    scene.geometry = room;
  } else {
    throw ConfigError("load_scene: unknown variant '" + variant + "'");
  }
  if (j.contains("background")) {
    const auto bg = j.at("background").get<std::vector<double>>();
    if (bg.size() != 3) throw ConfigError("load_scene: background needs 3 components");
    scene.background = Eigen::Vector3d(bg[0], bg[1], bg[2]);
  }
  return scene;
}

void save_scene(const std::filesystem::path& json_path, const Scene& scene) {
  json j;
  if (const auto* room = std::get_if<BoxRoom>(&scene.geometry)) {
    j["variant"] = "box_room";
    j["half_extent"] = room->half_extent;
    json faces = json::array();
    for (const auto& f : room->faces) faces.push_back(texture_to_json(f));
    j["faces"] = faces;
  } else {
    const auto& plane = std::get<TexturedPlane>(scene.geometry);
    j["variant"] = "textured_plane";
    const auto& q = plane.world_from_plane.rotation.quat();
    j["pose"] = {{"t",
                  {plane.world_from_plane.translation.x(), plane.world_from_plane.translation.y(),
                   plane.world_from_plane.translation.z()}},
                 {"q", {q.w(), q.x(), q.y(), q.z()}}};
    j["texture"] = texture_to_json(plane.texture);
    j["texture_scale"] = plane.texture_scale;
  }
  if (scene.background) {
    j["background"] = {scene.background->x(), scene.background->y(), scene.background->z()};
  }
  std::ofstream out(json_path);
  if (!out) throw ConfigError("save_scene: cannot open " + json_path.string());
  out << j.dump(2) << "\n";
}

}  // namespace enerf
