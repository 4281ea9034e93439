// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "enerf/geometry.hpp"

namespace enerf {

/// Multiresolution hash-grid layout. Level resolutions grow geometrically
/// from base_resolution; corner features are looked up by spatial hash into
/// a table of 2^log2_table_size rows per level.
struct HashGridConfig {
  int levels = 8;
  int base_resolution = 16;
  double growth = 1.5;
  int features_per_level = 2;
  int log2_table_size = 15;
  Eigen::Vector3d bbox_min = Eigen::Vector3d(-1.0, -1.0, -1.0);
  Eigen::Vector3d bbox_max = Eigen::Vector3d(1.0, 1.0, 1.0);

  int resolution(int level) const;
  std::size_t entries_per_level() const { return std::size_t{1} << log2_table_size; }
  int feature_dim() const { return levels * features_per_level; }
  void validate() const;
};

struct MLPConfig {
  int hidden_width = 32;
  int hidden_depth = 2;  // number of hidden layers, ReLU activations

  void validate() const;
};

/// Sinusoidal direction features: sin/cos of each component at 4 octaves.
inline constexpr int kDirFrequencies = 4;
inline constexpr int kDirFeatureDim = 3 * 2 * kDirFrequencies;

void encode_direction(const Eigen::Vector3d& unit_dir, std::span<double> out);

struct LayerShape {
  std::size_t weight_offset = 0;  // row-major [outputs][inputs]
  std::size_t bias_offset = 0;
  int inputs = 0;
  int outputs = 0;
};

/// All learnable state in one flat double buffer: per-level feature tables in
/// level order, then MLP weight matrix + bias per layer. The flat layout is
/// the checkpoint declaration order and the optimizer's parameter space.
class FieldParams {
 public:
  FieldParams(const HashGridConfig& grid, const MLPConfig& mlp);

  /// Feature tables uniform in [-1e-4, 1e-4]; MLP weights Kaiming-uniform
  /// (fan-in); the density bias is set so an initial sample contributes
  /// alpha ~ 0.1 at spacing `expected_sample_spacing`.
  static FieldParams init(const HashGridConfig& grid, const MLPConfig& mlp, std::uint64_t seed,
                          double expected_sample_spacing = (4.0 - 0.1) / 32.0);

  const HashGridConfig& grid() const { return grid_; }
  const MLPConfig& mlp() const { return mlp_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t parameter_count() const { return values_.size(); }

  /// First index of the MLP block; everything below is table data. The Adam
  /// step uses this split for its per-block learning rates.
  std::size_t mlp_offset() const { return mlp_offset_; }

  std::span<const double> table(int level) const;
  std::span<double> table(int level);

  const std::vector<LayerShape>& layers() const { return layers_; }
  int input_dim() const { return grid_.feature_dim() + kDirFeatureDim; }

  bool all_finite() const;

 private:
  HashGridConfig grid_;
  MLPConfig mlp_;
  std::vector<double> values_;
  std::vector<LayerShape> layers_;
  std::size_t mlp_offset_ = 0;
};

/// Corner rows and trilinear weights recorded by encode_position for gradient
/// routing; layout is level-major, 8 entries per level.
struct EncodeCache {
  std::vector<std::uint32_t> corner_index;
  std::vector<double> corner_weight;
};

/// Concatenated multilevel feature vector for a point (clamped to the grid's
/// bounding box). `out` must have grid.feature_dim() entries. Returns true
/// when the point was inside the box, false when it was clamped.
bool encode_position(const FieldParams& params, const Eigen::Vector3d& x, std::span<double> out,
                     EncodeCache* cache = nullptr);

struct FieldOutput {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();  // sigmoid output, [0,1]
  double density = 0.0;                             // softplus output, >= 0
};

/// Single query of the field: hash features + direction features through the
/// MLP. Pure; identical inputs give identical outputs.
FieldOutput field_eval(const FieldParams& params, const Eigen::Vector3d& x,
                       const Eigen::Vector3d& unit_dir);

struct RenderResult {
  Eigen::Vector3d intensity = Eigen::Vector3d::Zero();  // per channel, [0,1]
  std::vector<double> weights;                          // per sample
  double far_transmittance = 1.0;
};

/// Forward activations cached by render_ray for the exact reverse pass.
/// Reusable across rays; invalidated by any parameter change.
class RayForwardCache {
 public:
  bool valid() const { return valid_; }

 private:
  friend struct RenderOps;
  bool valid_ = false;
  int n_samples = 0;
  double delta = 0.0;
  double linlog_threshold = 0.0;
  double scaled_luminance = 0.0;
  Eigen::Vector3d intensity = Eigen::Vector3d::Zero();
  std::vector<double> dir_features;
  std::vector<std::uint32_t> corner_index;  // [sample][level][8]
  std::vector<double> corner_weight;        // [sample][level][8]
  std::vector<double> hash_features;        // [sample][LF]
  std::vector<double> hidden;               // [sample][depth][width] post-ReLU
  std::vector<double> sigma;                // [sample]
  std::vector<double> alpha;                // [sample]
  std::vector<double> trans;                // [sample] transmittance before sample
  std::vector<double> color;                // [sample][3]
};

/// Emission-absorption quadrature over n_samples midpoints uniformly spaced
/// in [near, far]: alpha_i = 1 - exp(-rho_i * delta), w_i = alpha_i * T_i.
/// Weights plus far transmittance sum to 1 by construction.
RenderResult render_ray(const FieldParams& params, const Ray& ray, int n_samples,
                        RayForwardCache* cache = nullptr);

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(intensity).
/// Requires the cache filled by render_ray under the same parameters.
void render_ray_backward(const FieldParams& params, const RayForwardCache& cache,
                         const Eigen::Vector3d& d_intensity, std::span<double> grad);

/// Luminance of the rendered intensity, scaled to [0, 255] and passed through
/// linlog: the quantity the event losses constrain.
double rendered_log_brightness(const FieldParams& params, const Ray& ray, int n_samples,
                               double linlog_threshold, RayForwardCache* cache = nullptr);

void rendered_log_brightness_backward(const FieldParams& params, const RayForwardCache& cache,
                                      double d_log_brightness, std::span<double> grad);

/// Checkpoint: "ENRF" magic, version, grid + MLP configs, then float32
/// parameters in declaration order.
void save_checkpoint(const std::filesystem::path& path, const FieldParams& params);
FieldParams load_checkpoint(const std::filesystem::path& path);

}  // namespace enerf
