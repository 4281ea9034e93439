// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "enerf/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "enerf/common.hpp"
#include "enerf/event_model.hpp"
#include "enerf/rng.hpp"

namespace enerf {

namespace {

// Spatial hash of integer voxel corners (coordinate-wise prime multiplies,
// XOR-combined), masked to the table size.
inline std::uint32_t hash_corner(std::uint32_t x, std::uint32_t y, std::uint32_t z,
                                 std::uint32_t mask) {
  return (x * 1u ^ y * 2654435761u ^ z * 805459861u) & mask;
}

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

inline double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

int HashGridConfig::resolution(int level) const {
  return static_cast<int>(std::floor(base_resolution * std::pow(growth, level)));
}

void HashGridConfig::validate() const {
  if (levels < 1) throw ConfigError("HashGridConfig: levels must be >= 1");
  if (features_per_level < 1) throw ConfigError("HashGridConfig: features_per_level must be >= 1");
  if (log2_table_size < 1 || log2_table_size > 28) {
    throw ConfigError("HashGridConfig: log2_table_size must be in [1, 28]");
  }
  if (base_resolution < 1) throw ConfigError("HashGridConfig: base_resolution must be >= 1");
  if (!(growth > 0.0)) throw ConfigError("HashGridConfig: growth must be positive");
  for (int l = 1; l < levels; ++l) {
    if (resolution(l) <= resolution(l - 1)) {
      throw ConfigError("HashGridConfig: level resolutions must be strictly increasing");
    }
  }
  for (int a = 0; a < 3; ++a) {
    if (!(bbox_min[a] < bbox_max[a])) {
      throw ConfigError("HashGridConfig: bbox_min must be strictly below bbox_max");
    }
  }
}

void MLPConfig::validate() const {
  if (hidden_width < 4) throw ConfigError("MLPConfig: hidden_width must be >= 4");
  if (hidden_depth < 1) throw ConfigError("MLPConfig: hidden_depth must be >= 1");
}

void encode_direction(const Eigen::Vector3d& unit_dir, std::span<double> out) {
  int k = 0;
  for (int f = 0; f < kDirFrequencies; ++f) {
    const double scale = static_cast<double>(1 << f);
    for (int a = 0; a < 3; ++a) {
      out[k++] = std::sin(scale * unit_dir[a]);
      out[k++] = std::cos(scale * unit_dir[a]);
    }
  }
}

FieldParams::FieldParams(const HashGridConfig& grid, const MLPConfig& mlp)
    : grid_(grid), mlp_(mlp) {
  grid_.validate();
  mlp_.validate();
  const std::size_t table_values =
      static_cast<std::size_t>(grid_.levels) * grid_.entries_per_level() * grid_.features_per_level;
  mlp_offset_ = table_values;

  std::size_t offset = table_values;
  const int in_dim = input_dim();
  int prev = in_dim;
  for (int layer = 0; layer <= mlp_.hidden_depth; ++layer) {
    const int out_dim = layer == mlp_.hidden_depth ? 4 : mlp_.hidden_width;
    LayerShape shape;
    shape.inputs = prev;
    shape.outputs = out_dim;
    shape.weight_offset = offset;
    offset += static_cast<std::size_t>(out_dim) * prev;
    shape.bias_offset = offset;
    offset += static_cast<std::size_t>(out_dim);
    layers_.push_back(shape);
    prev = out_dim;
  }
  values_.assign(offset, 0.0);
}

FieldParams FieldParams::init(const HashGridConfig& grid, const MLPConfig& mlp, std::uint64_t seed,
                              double expected_sample_spacing) {
  FieldParams params(grid, mlp);
  Rng rng(seed);
  for (std::size_t i = 0; i < params.mlp_offset_; ++i) {
    params.values_[i] = rng.range(-1e-4, 1e-4);
  }
  for (const LayerShape& layer : params.layers_) {
    const double bound = std::sqrt(6.0 / layer.inputs);
    for (std::size_t i = 0; i < static_cast<std::size_t>(layer.outputs) * layer.inputs; ++i) {
      params.values_[layer.weight_offset + i] = rng.range(-bound, bound);
    }
  }
  // Non-transparent, non-opaque start: softplus(bias) * spacing ~ 0.1.
  const double target_sigma = 0.1 / expected_sample_spacing;
  params.values_[params.layers_.back().bias_offset] = inverse_softplus(target_sigma);
  return params;
}

std::span<const double> FieldParams::table(int level) const {
  const std::size_t per_level = grid_.entries_per_level() * grid_.features_per_level;
  return std::span<const double>(values_).subspan(level * per_level, per_level);
}

std::span<double> FieldParams::table(int level) {
  const std::size_t per_level = grid_.entries_per_level() * grid_.features_per_level;
  return std::span<double>(values_).subspan(level * per_level, per_level);
}

bool FieldParams::all_finite() const {
  for (const double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

// Per-level corner lookup shared by the standalone encoder and render_ray.
// Writes 8 (index, weight) entries and accumulates the interpolated features.
inline void encode_level(const FieldParams& params, int level, const Eigen::Vector3d& x01,
                         double* out_features, std::uint32_t* corner_index,
                         double* corner_weight) {
  const HashGridConfig& grid = params.grid();
  const int f_dim = grid.features_per_level;
  const int res = grid.resolution(level);
  const auto mask = static_cast<std::uint32_t>(grid.entries_per_level() - 1);
  const double* table = params.values().data() +
                        static_cast<std::size_t>(level) * grid.entries_per_level() * f_dim;

  std::uint32_t c0[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double pos = x01[a] * res;
    double cell = std::floor(pos);
    if (cell > res - 1) cell = res - 1;  // x01 == 1 lands on the last voxel
    c0[a] = static_cast<std::uint32_t>(cell);
    frac[a] = pos - cell;
  }
  for (int f = 0; f < f_dim; ++f) out_features[f] = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    std::uint32_t cc[3];
    for (int a = 0; a < 3; ++a) {
      const bool hi = (corner >> a) & 1;
      cc[a] = c0[a] + (hi ? 1u : 0u);
      w *= hi ? frac[a] : 1.0 - frac[a];
    }
    const std::uint32_t idx = hash_corner(cc[0], cc[1], cc[2], mask);
    corner_index[corner] = idx;
    corner_weight[corner] = w;
    const double* row = table + static_cast<std::size_t>(idx) * f_dim;
    for (int f = 0; f < f_dim; ++f) out_features[f] += w * row[f];
  }
}

}  // namespace

bool encode_position(const FieldParams& params, const Eigen::Vector3d& x, std::span<double> out,
                     EncodeCache* cache) {
  const HashGridConfig& grid = params.grid();
  if (out.size() != static_cast<std::size_t>(grid.feature_dim())) {
    throw std::invalid_argument("encode_position: output span has wrong size");
  }
  Eigen::Vector3d x01;
  bool inside = true;
  for (int a = 0; a < 3; ++a) {
    const double t = (x[a] - grid.bbox_min[a]) / (grid.bbox_max[a] - grid.bbox_min[a]);
    if (t < 0.0 || t > 1.0) inside = false;
    x01[a] = std::clamp(t, 0.0, 1.0);
  }
  if (cache != nullptr) {
    cache->corner_index.resize(static_cast<std::size_t>(grid.levels) * 8);
    cache->corner_weight.resize(static_cast<std::size_t>(grid.levels) * 8);
  }
  std::vector<std::uint32_t> idx_scratch(8);
  std::vector<double> w_scratch(8);
  for (int level = 0; level < grid.levels; ++level) {
    std::uint32_t* idx = cache ? cache->corner_index.data() + level * 8 : idx_scratch.data();
    double* w = cache ? cache->corner_weight.data() + level * 8 : w_scratch.data();
    encode_level(params, level, x01, out.data() + level * grid.features_per_level, idx, w);
  }
  return inside;
}

namespace {

// MLP forward on pre-encoded features. `dir_contrib` is W_0[:, hash_dim:] *
// dir_features + b_0, precomputed once per ray. Hidden activations are
// written post-ReLU; `out` receives the 4 raw output-layer values.
void mlp_forward(const FieldParams& params, const double* hash_features, const double* dir_contrib,
                 double* hidden, double* out) {
  const auto& layers = params.layers();
  const int width = params.mlp().hidden_width;
  const int hash_dim = params.grid().feature_dim();
  std::span<const double> v = params.values();

  {  // input layer: hash columns + precomputed direction contribution
    const LayerShape& l0 = layers.front();
    for (int o = 0; o < l0.outputs; ++o) {
      const double* w_row = v.data() + l0.weight_offset + static_cast<std::size_t>(o) * l0.inputs;
      double acc = dir_contrib[o];
      for (int j = 0; j < hash_dim; ++j) acc += w_row[j] * hash_features[j];
      hidden[o] = acc > 0.0 ? acc : 0.0;
    }
  }
  const double* prev = hidden;
  for (std::size_t k = 1; k < layers.size(); ++k) {
    const LayerShape& layer = layers[k];
    double* dst = (k == layers.size() - 1) ? out : hidden + k * width;
    for (int o = 0; o < layer.outputs; ++o) {
      const double* w_row =
          v.data() + layer.weight_offset + static_cast<std::size_t>(o) * layer.inputs;
      double acc = v[layer.bias_offset + o];
      for (int j = 0; j < layer.inputs; ++j) acc += w_row[j] * prev[j];
      dst[o] = (k == layers.size() - 1) ? acc : (acc > 0.0 ? acc : 0.0);
    }
    prev = dst;
  }
}

void compute_dir_contrib(const FieldParams& params, const double* dir_features,
                         double* dir_contrib) {
  const auto& l0 = params.layers().front();
  const int hash_dim = params.grid().feature_dim();
  std::span<const double> v = params.values();
  for (int o = 0; o < l0.outputs; ++o) {
    const double* w_row = v.data() + l0.weight_offset + static_cast<std::size_t>(o) * l0.inputs;
    double acc = v[l0.bias_offset + o];
    for (int j = 0; j < kDirFeatureDim; ++j) acc += w_row[hash_dim + j] * dir_features[j];
    dir_contrib[o] = acc;
  }
}

}  // namespace

FieldOutput field_eval(const FieldParams& params, const Eigen::Vector3d& x,
                       const Eigen::Vector3d& unit_dir) {
  if (!params.all_finite()) throw NumericError("field_eval: parameters contain non-finite values");
  const int hash_dim = params.grid().feature_dim();
  const int width = params.mlp().hidden_width;
  std::vector<double> hash_features(hash_dim);
  encode_position(params, x, hash_features);
  std::vector<double> dir_features(kDirFeatureDim);
  encode_direction(unit_dir, dir_features);
  std::vector<double> dir_contrib(width);
  compute_dir_contrib(params, dir_features.data(), dir_contrib.data());
  std::vector<double> hidden(static_cast<std::size_t>(params.mlp().hidden_depth) * width);
  double out[4];
  mlp_forward(params, hash_features.data(), dir_contrib.data(), hidden.data(), out);
  FieldOutput result;
  result.density = softplus(out[0]);
  for (int c = 0; c < 3; ++c) result.color[c] = sigmoid(out[c + 1]);
  return result;
}

struct RenderOps {
  static void forward(const FieldParams& params, const Ray& ray, int n_samples,
                      RayForwardCache* cache, std::vector<double>* weights_out,
                      Eigen::Vector3d* intensity_out, double* far_trans_out) {
    if (n_samples < 2) throw std::invalid_argument("render_ray: n_samples must be >= 2");
    if (!(ray.near > 0.0) || !(ray.far > ray.near)) {
      throw std::invalid_argument("render_ray: require 0 < near < far");
    }
    const HashGridConfig& grid = params.grid();
    const MLPConfig& mlp = params.mlp();
    const int hash_dim = grid.feature_dim();
    const int width = mlp.hidden_width;
    const double delta = (ray.far - ray.near) / n_samples;

    double dir_features[kDirFeatureDim];
    encode_direction(ray.direction, dir_features);
    std::vector<double> dir_contrib(width);
    compute_dir_contrib(params, dir_features, dir_contrib.data());

    const std::size_t n = static_cast<std::size_t>(n_samples);
    if (cache != nullptr) {
      cache->valid_ = false;
      cache->n_samples = n_samples;
      cache->delta = delta;
      cache->dir_features.assign(dir_features, dir_features + kDirFeatureDim);
      cache->corner_index.resize(n * grid.levels * 8);
      cache->corner_weight.resize(n * grid.levels * 8);
      cache->hash_features.resize(n * hash_dim);
      cache->hidden.resize(n * mlp.hidden_depth * width);
      cache->sigma.resize(n);
      cache->alpha.resize(n);
      cache->trans.resize(n);
      cache->color.resize(n * 3);
    }
    if (weights_out != nullptr) weights_out->resize(n);

    std::vector<double> hash_scratch(hash_dim);
    std::vector<double> hidden_scratch;
    if (cache == nullptr) hidden_scratch.resize(static_cast<std::size_t>(mlp.hidden_depth) * width);
    std::vector<std::uint32_t> idx_scratch(static_cast<std::size_t>(grid.levels) * 8);
    std::vector<double> w_scratch(static_cast<std::size_t>(grid.levels) * 8);

    Eigen::Vector3d x01;
    Eigen::Vector3d intensity = Eigen::Vector3d::Zero();
    double trans = 1.0;
    for (int i = 0; i < n_samples; ++i) {
      const double t = ray.near + (i + 0.5) * delta;
      const Eigen::Vector3d p = ray.point_at(t);
      for (int a = 0; a < 3; ++a) {
        x01[a] = std::clamp((p[a] - grid.bbox_min[a]) / (grid.bbox_max[a] - grid.bbox_min[a]), 0.0,
                            1.0);
      }
      double* hash_feat =
          cache ? cache->hash_features.data() + static_cast<std::size_t>(i) * hash_dim
                : hash_scratch.data();
      for (int level = 0; level < grid.levels; ++level) {
        std::uint32_t* idx =
            cache ? cache->corner_index.data() + (static_cast<std::size_t>(i) * grid.levels + level) * 8
                  : idx_scratch.data() + level * 8;
        double* w =
            cache ? cache->corner_weight.data() + (static_cast<std::size_t>(i) * grid.levels + level) * 8
                  : w_scratch.data() + level * 8;
        encode_level(params, level, x01, hash_feat + level * grid.features_per_level, idx, w);
      }
      double* hidden = cache ? cache->hidden.data() +
                                   static_cast<std::size_t>(i) * mlp.hidden_depth * width
                             : hidden_scratch.data();
      double out[4];
      mlp_forward(params, hash_feat, dir_contrib.data(), hidden, out);
      const double sigma = softplus(out[0]);
      const double alpha = -std::expm1(-sigma * delta);
      const double weight = alpha * trans;
      Eigen::Vector3d color;
      for (int c = 0; c < 3; ++c) color[c] = sigmoid(out[c + 1]);
      intensity += weight * color;
      if (cache != nullptr) {
        cache->sigma[i] = sigma;
        cache->alpha[i] = alpha;
        cache->trans[i] = trans;
        for (int c = 0; c < 3; ++c) cache->color[static_cast<std::size_t>(i) * 3 + c] = color[c];
      }
      if (weights_out != nullptr) (*weights_out)[i] = weight;
      trans *= 1.0 - alpha;
    }
    if (cache != nullptr) {
      cache->intensity = intensity;
      cache->valid_ = true;
    }
    *intensity_out = intensity;
    *far_trans_out = trans;
  }

  static void backward(const FieldParams& params, const RayForwardCache& cache,
                       const Eigen::Vector3d& d_intensity, std::span<double> grad) {
    if (!cache.valid()) {
      throw std::logic_error("render_ray_backward: forward cache missing or invalid");
    }
    if (grad.size() != params.parameter_count()) {
      throw std::invalid_argument("render_ray_backward: gradient buffer has wrong size");
    }
    const HashGridConfig& grid = params.grid();
    const MLPConfig& mlp = params.mlp();
    const auto& layers = params.layers();
    const int hash_dim = grid.feature_dim();
    const int width = mlp.hidden_width;
    const int f_dim = grid.features_per_level;
    std::span<const double> v = params.values();

    std::vector<double> dz(std::max(width, 4));
    std::vector<double> da(std::max(width, 4));
    std::vector<double> dhash(hash_dim);
    std::vector<double> dz_input_sum(width, 0.0);  // for the direction columns of layer 0

    // Reverse sweep over the transmittance recurrence: gT accumulates
    // d(loss)/d(T_{i+1}) while walking samples back to front.
    double g_trans = 0.0;
    for (int i = cache.n_samples - 1; i >= 0; --i) {
      const double* color = cache.color.data() + static_cast<std::size_t>(i) * 3;
      const double alpha = cache.alpha[i];
      const double trans = cache.trans[i];
      const double weight = alpha * trans;
      const double d_weight =
          d_intensity[0] * color[0] + d_intensity[1] * color[1] + d_intensity[2] * color[2];
      const double d_alpha = trans * (d_weight - g_trans);
      g_trans = d_weight * alpha + (1.0 - alpha) * g_trans;
      const double d_sigma = d_alpha * cache.delta * (1.0 - alpha);

      // Output layer grads: softplus'(z) recovered from sigma, sigmoid' from
      // the cached color.
      dz[0] = d_sigma * -std::expm1(-cache.sigma[i]);
      for (int c = 0; c < 3; ++c) {
        dz[c + 1] = weight * d_intensity[c] * color[c] * (1.0 - color[c]);
      }

      const double* hidden = cache.hidden.data() + static_cast<std::size_t>(i) * mlp.hidden_depth * width;
      const double* hash_feat = cache.hash_features.data() + static_cast<std::size_t>(i) * hash_dim;

      for (int k = static_cast<int>(layers.size()) - 1; k >= 0; --k) {
        const LayerShape& layer = layers[k];
        const double* a_prev = k == 0 ? hash_feat : hidden + (k - 1) * width;
        double* w_grad = grad.data() + layer.weight_offset;
        double* b_grad = grad.data() + layer.bias_offset;

        if (k == 0) {
          // Hash columns per sample; direction columns are rank-one in the
          // per-ray direction features and are applied once after the loop.
          for (int o = 0; o < layer.outputs; ++o) {
            const double g = dz[o];
            if (g == 0.0) continue;
            double* w_row = w_grad + static_cast<std::size_t>(o) * layer.inputs;
            for (int j = 0; j < hash_dim; ++j) w_row[j] += g * a_prev[j];
            dz_input_sum[o] += g;
          }
          for (int j = 0; j < hash_dim; ++j) {
            double acc = 0.0;
            for (int o = 0; o < layer.outputs; ++o) {
              acc += v[layer.weight_offset + static_cast<std::size_t>(o) * layer.inputs + j] * dz[o];
            }
            dhash[j] = acc;
          }
        } else {
          for (int o = 0; o < layer.outputs; ++o) {
            const double g = dz[o];
            b_grad[o] += g;
            if (g == 0.0) continue;
            double* w_row = w_grad + static_cast<std::size_t>(o) * layer.inputs;
            for (int j = 0; j < layer.inputs; ++j) w_row[j] += g * a_prev[j];
          }
          for (int j = 0; j < layer.inputs; ++j) {
            if (a_prev[j] <= 0.0) {  // ReLU gate
              da[j] = 0.0;
              continue;
            }
            double acc = 0.0;
            for (int o = 0; o < layer.outputs; ++o) {
              acc += v[layer.weight_offset + static_cast<std::size_t>(o) * layer.inputs + j] * dz[o];
            }
            da[j] = acc;
          }
          std::swap(dz, da);
        }
      }

      // Route hash-feature grads to the 8 corners per level.
      for (int level = 0; level < grid.levels; ++level) {
        const std::size_t base = (static_cast<std::size_t>(i) * grid.levels + level) * 8;
        double* table_grad = grad.data() +
                             static_cast<std::size_t>(level) * grid.entries_per_level() * f_dim;
        for (int f = 0; f < f_dim; ++f) {
          const double g = dhash[level * f_dim + f];
          if (g == 0.0) continue;
          for (int corner = 0; corner < 8; ++corner) {
            table_grad[static_cast<std::size_t>(cache.corner_index[base + corner]) * f_dim + f] +=
                g * cache.corner_weight[base + corner];
          }
        }
      }
    }

    // Direction columns and bias of layer 0, hoisted over samples.
    const LayerShape& l0 = layers.front();
    for (int o = 0; o < l0.outputs; ++o) {
      const double g = dz_input_sum[o];
      if (g == 0.0) continue;
      grad[l0.bias_offset + o] += g;
      double* w_row = grad.data() + l0.weight_offset + static_cast<std::size_t>(o) * l0.inputs;
      for (int j = 0; j < kDirFeatureDim; ++j) w_row[hash_dim + j] += g * cache.dir_features[j];
    }
  }
};

RenderResult render_ray(const FieldParams& params, const Ray& ray, int n_samples,
                        RayForwardCache* cache) {
  RenderResult result;
  RenderOps::forward(params, ray, n_samples, cache, &result.weights, &result.intensity,
                     &result.far_transmittance);
  return result;
}

void render_ray_backward(const FieldParams& params, const RayForwardCache& cache,
                         const Eigen::Vector3d& d_intensity, std::span<double> grad) {
  RenderOps::backward(params, cache, d_intensity, grad);
}

double rendered_log_brightness(const FieldParams& params, const Ray& ray, int n_samples,
                               double linlog_threshold, RayForwardCache* cache) {
  Eigen::Vector3d intensity;
  double far_trans = 0.0;
  RenderOps::forward(params, ray, n_samples, cache, nullptr, &intensity, &far_trans);
  const double luminance =
      kLumaR * intensity.x() + kLumaG * intensity.y() + kLumaB * intensity.z();
  const double scaled = kIntensityScale * luminance;
  if (cache != nullptr) {
    cache->scaled_luminance = scaled;
    cache->linlog_threshold = linlog_threshold;
  }
  return linlog(scaled, linlog_threshold);
}

void rendered_log_brightness_backward(const FieldParams& params, const RayForwardCache& cache,
                                      double d_log_brightness, std::span<double> grad) {
  if (!cache.valid()) {
    throw std::logic_error("rendered_log_brightness_backward: forward cache missing");
  }
  const double d_scaled =
      d_log_brightness * linlog_derivative(cache.scaled_luminance, cache.linlog_threshold);
  const Eigen::Vector3d d_intensity =
      d_scaled * kIntensityScale * Eigen::Vector3d(kLumaR, kLumaG, kLumaB);
  RenderOps::backward(params, cache, d_intensity, grad);
}

namespace {

constexpr char kCheckpointMagic[4] = {'E', 'N', 'R', 'F'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const FieldParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataFormatError("save_checkpoint: cannot open " + path.string());
  const HashGridConfig& grid = params.grid();
  const MLPConfig& mlp = params.mlp();
  out.write(kCheckpointMagic, 4);
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.levels));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.base_resolution));
  write_le<double>(out, grid.growth);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.features_per_level));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.log2_table_size));
  for (int a = 0; a < 3; ++a) write_le<double>(out, grid.bbox_min[a]);
  for (int a = 0; a < 3; ++a) write_le<double>(out, grid.bbox_max[a]);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(mlp.hidden_width));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(mlp.hidden_depth));
  write_le<std::uint64_t>(out, params.parameter_count());
  for (const double v : params.values()) {
    write_le<float>(out, static_cast<float>(v));
  }
  if (!out) throw DataFormatError("save_checkpoint: short write to " + path.string());
}

FieldParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("load_checkpoint: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw DataFormatError("load_checkpoint: bad magic in " + path.string());
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataFormatError("load_checkpoint: unsupported version " + std::to_string(version));
  }
  HashGridConfig grid;
  grid.levels = static_cast<int>(read_le<std::uint32_t>(in));
  grid.base_resolution = static_cast<int>(read_le<std::uint32_t>(in));
  grid.growth = read_le<double>(in);
  grid.features_per_level = static_cast<int>(read_le<std::uint32_t>(in));
  grid.log2_table_size = static_cast<int>(read_le<std::uint32_t>(in));
  for (int a = 0; a < 3; ++a) grid.bbox_min[a] = read_le<double>(in);
  for (int a = 0; a < 3; ++a) grid.bbox_max[a] = read_le<double>(in);
  MLPConfig mlp;
  mlp.hidden_width = static_cast<int>(read_le<std::uint32_t>(in));
  mlp.hidden_depth = static_cast<int>(read_le<std::uint32_t>(in));
  const auto count = read_le<std::uint64_t>(in);
  if (!in) throw DataFormatError("load_checkpoint: truncated header in " + path.string());
  FieldParams params(grid, mlp);
  if (count != params.parameter_count()) {
    throw DataFormatError("load_checkpoint: parameter count mismatch in " + path.string());
  }
  for (double& v : params.values()) {
    v = static_cast<double>(read_le<float>(in));
  }
  if (!in) throw DataFormatError("load_checkpoint: truncated parameters in " + path.string());
  return params;
}

}  // namespace enerf
