// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "enerf/event_model.hpp"
#include "enerf/field.hpp"
#include "enerf/geometry.hpp"

namespace enerf {

/// Loss configuration. Exactly one of {known threshold, normalized loss}
/// governs the event term; the no-event term additionally needs a known C.
struct LossConfig {
  std::optional<double> contrast_threshold = 0.2;
  bool use_normalized = false;
  double lambda_noevs = 0.1;
  double lambda_rgb = 0.0;
  double linlog_threshold = kDefaultLinlogThreshold;
  std::int64_t t_noevs_us = 25000;
  double noevent_fraction = 1.0 / 3.0;  // no-event share of all sampled pairs

  bool noevent_enabled() const { return lambda_noevs > 0.0 && noevent_fraction > 0.0; }
  void validate() const;
};

/// Squared 2-norm of (predicted - target).
double event_loss(std::span<const double> predicted, std::span<const double> target);
void event_loss_grad(std::span<const double> predicted, std::span<const double> target,
                     std::span<double> grad_predicted);

/// || pred/||pred|| - target/||target|| ||^2; invariant to positive scaling
/// of either argument. Norms below 1e-8 contribute 0 with a warning.
double normalized_event_loss(std::span<const double> predicted, std::span<const double> target);
void normalized_event_loss_grad(std::span<const double> predicted, std::span<const double> target,
                                std::span<double> grad_predicted);

/// Sum of relu(|l_curr - l_prev| - C): a dead zone of width C around zero.
double no_event_loss(std::span<const double> l_prev, std::span<const double> l_curr,
                     double contrast);
void no_event_loss_grad(std::span<const double> l_prev, std::span<const double> l_curr,
                        double contrast, std::span<double> grad_prev, std::span<double> grad_curr);

/// Mean squared error over all values (pixels x channels).
double rgb_loss(std::span<const double> rendered, std::span<const double> target);
void rgb_loss_grad(std::span<const double> rendered, std::span<const double> target,
                   std::span<double> grad_rendered);

struct AdamConfig {
  double lr_tables = 1e-2;
  double lr_mlp = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-15;
};

struct OptimizerState {
  AdamConfig config;
  std::vector<double> m;  // first moments, parameter layout
  std::vector<double> v;  // second moments
  std::int64_t step_count = 0;
  std::int64_t skipped_steps = 0;

  static OptimizerState create(const FieldParams& params, const AdamConfig& config = {});
};

/// Bias-corrected Adam update with per-block learning rates (tables vs MLP).
/// A non-finite gradient skips the whole step and bumps skipped_steps.
void adam_step(FieldParams& params, std::span<const double> grad, OptimizerState& state);

enum class TrainMode { events, frames, events_and_frames };

const char* train_mode_name(TrainMode mode);
TrainMode train_mode_from_name(const std::string& name);

struct TrainConfig {
  std::size_t batch_size = 30096;  // event pairs per iteration
  int iterations = 300;
  int n_samples = 32;
  std::uint64_t seed = 1;
  int threads = 1;
  double near = 0.1;
  double far = 4.0;
  TrainMode mode = TrainMode::events;
  std::size_t rgb_rays = 0;  // 0 -> batch_size / 4 when the rgb loss is active
  LossConfig loss;
  PairSamplingStrategy sampling;
  HashGridConfig grid;
  MLPConfig mlp;
  AdamConfig adam;
  CameraModel camera;
  std::filesystem::path events_path;
  std::filesystem::path trajectory_path;
  std::optional<std::filesystem::path> frames_index;  // CSV `path,t_us`

  /// Collects all validation problems instead of failing on the first.
  std::vector<std::string> validation_errors() const;
};

struct FrameSample {
  ImageBuffer image;  // RGB, [0, 255]
  std::int64_t t_us = 0;
};

struct TrainInputs {
  EventStream events;
  Trajectory trajectory;
  std::vector<FrameSample> frames;
};

/// One assembled iteration batch with backprojected rays. The rgb targets are
/// scaled to [0, 1] to match rendered intensities.
struct AssembledBatch {
  std::vector<Ray> event_prev, event_curr;
  std::vector<double> event_target;
  std::vector<Ray> noevent_prev, noevent_curr;
  std::vector<Ray> rgb;
  std::vector<double> rgb_target;  // 3 per ray
};

struct BatchLoss {
  double total = 0.0;
  double events = 0.0;
  double noevents = 0.0;
  double rgb = 0.0;
};

/// Loss (and, when `grad` is non-empty, accumulated parameter gradients) for
/// one batch. This is the differentiable path the trainer steps on; the
/// gradient check drives the same function.
BatchLoss batch_loss(const FieldParams& params, const AssembledBatch& batch, const LossConfig& cfg,
                     int n_samples, int threads, std::span<double> grad);

struct LossRow {
  int iteration = 0;
  double total = 0.0, events = 0.0, noevents = 0.0, rgb = 0.0;
};

struct TrainResult {
  FieldParams params;
  std::vector<LossRow> history;
  std::int64_t skipped_steps = 0;
};

TrainResult train(const TrainConfig& cfg, const TrainInputs& inputs);
TrainResult train(const TrainConfig& cfg);  // loads inputs from the config paths

/// Loss history CSV: `iter,loss_total,loss_evs,loss_noevs,loss_rgb`.
void write_loss_csv(const std::filesystem::path& path, std::span<const LossRow> history);

/// Frame index CSV (`path,t_us`, paths relative to the CSV); used to attach
/// timestamps to rendered frames.
std::vector<FrameSample> load_frames_index(const std::filesystem::path& csv_path);
void write_frames_index(const std::filesystem::path& csv_path,
                        std::span<const std::pair<std::string, std::int64_t>> entries);

}  // namespace enerf
