// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "enerf/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "enerf/common.hpp"
#include "enerf/rng.hpp"
#include "enerf/threading.hpp"

namespace enerf {

void LossConfig::validate() const {
  if (contrast_threshold && !(*contrast_threshold > 0.0)) {
    throw ConfigError("LossConfig: contrast_threshold must be positive");
  }
  if (!use_normalized && !contrast_threshold) {
    throw ConfigError("LossConfig: the event loss needs a known contrast threshold "
                      "unless use_normalized is set");
  }
  if (lambda_noevs < 0.0) throw ConfigError("LossConfig: lambda_noevs must be >= 0");
  if (lambda_rgb < 0.0) throw ConfigError("LossConfig: lambda_rgb must be >= 0");
  if (!(linlog_threshold > 1.0)) throw ConfigError("LossConfig: linlog_threshold must be > 1");
  if (t_noevs_us <= 0) throw ConfigError("LossConfig: t_noevs_us must be positive");
  if (noevent_fraction < 0.0 || noevent_fraction > 1.0 / 3.0 + 1e-12) {
    throw ConfigError("LossConfig: noevent_fraction must be in [0, 1/3]");
  }
  if (noevent_enabled() && !contrast_threshold) {
    throw ConfigError("LossConfig: the no-event loss needs a known contrast threshold");
  }
}

double event_loss(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size() || predicted.empty()) {
    throw std::invalid_argument("event_loss: vectors must have equal nonzero length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - target[i];
    sum += d * d;
  }
  return sum;
}

void event_loss_grad(std::span<const double> predicted, std::span<const double> target,
                     std::span<double> grad_predicted) {
  if (predicted.size() != target.size() || predicted.size() != grad_predicted.size()) {
    throw std::invalid_argument("event_loss_grad: size mismatch");
  }
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    grad_predicted[i] = 2.0 * (predicted[i] - target[i]);
  }
}

namespace {

constexpr double kNormEps = 1e-8;

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (const double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double normalized_event_loss(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size() || predicted.empty()) {
    throw std::invalid_argument("normalized_event_loss: vectors must have equal nonzero length");
  }
  const double np = norm2(predicted);
  const double nt = norm2(target);
  if (np <= kNormEps || nt <= kNormEps) {
    log_warn("normalized_event_loss: vector norm below eps, contribution zeroed");
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] / np - target[i] / nt;
    sum += d * d;
  }
  return sum;
}

void normalized_event_loss_grad(std::span<const double> predicted, std::span<const double> target,
                                std::span<double> grad_predicted) {
  if (predicted.size() != target.size() || predicted.size() != grad_predicted.size()) {
    throw std::invalid_argument("normalized_event_loss_grad: size mismatch");
  }
  const double np = norm2(predicted);
  const double nt = norm2(target);
  if (np <= kNormEps || nt <= kNormEps) {
    std::fill(grad_predicted.begin(), grad_predicted.end(), 0.0);
    return;
  }
  // loss = 2 - 2 u.v with u = p/|p|, v = t/|t|; dL/dp = -2 (I - u u^T) v / |p|.
  double uv = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    uv += (predicted[i] / np) * (target[i] / nt);
  }
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double u = predicted[i] / np;
    const double v = target[i] / nt;
    grad_predicted[i] = -2.0 * (v - u * uv) / np;
  }
}

double no_event_loss(std::span<const double> l_prev, std::span<const double> l_curr,
                     double contrast) {
  if (l_prev.size() != l_curr.size()) throw std::invalid_argument("no_event_loss: size mismatch");
  if (!(contrast > 0.0)) throw std::invalid_argument("no_event_loss: contrast must be > 0");
  double sum = 0.0;
  for (std::size_t i = 0; i < l_prev.size(); ++i) {
    const double excess = std::abs(l_curr[i] - l_prev[i]) - contrast;
    if (excess > 0.0) sum += excess;
  }
  return sum;
}

void no_event_loss_grad(std::span<const double> l_prev, std::span<const double> l_curr,
                        double contrast, std::span<double> grad_prev,
                        std::span<double> grad_curr) {
  if (l_prev.size() != l_curr.size() || grad_prev.size() != l_prev.size() ||
      grad_curr.size() != l_prev.size()) {
    throw std::invalid_argument("no_event_loss_grad: size mismatch");
  }
  for (std::size_t i = 0; i < l_prev.size(); ++i) {
    const double diff = l_curr[i] - l_prev[i];
    if (std::abs(diff) > contrast) {
      const double s = diff > 0.0 ? 1.0 : -1.0;
      grad_curr[i] = s;
      grad_prev[i] = -s;
    } else {
      grad_curr[i] = 0.0;
      grad_prev[i] = 0.0;
    }
  }
}

double rgb_loss(std::span<const double> rendered, std::span<const double> target) {
  if (rendered.size() != target.size() || rendered.empty()) {
    throw std::invalid_argument("rgb_loss: buffers must have equal nonzero size");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    const double d = rendered[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(rendered.size());
}

void rgb_loss_grad(std::span<const double> rendered, std::span<const double> target,
                   std::span<double> grad_rendered) {
  if (rendered.size() != target.size() || rendered.size() != grad_rendered.size()) {
    throw std::invalid_argument("rgb_loss_grad: size mismatch");
  }
  const double scale = 2.0 / static_cast<double>(rendered.size());
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    grad_rendered[i] = scale * (rendered[i] - target[i]);
  }
}

OptimizerState OptimizerState::create(const FieldParams& params, const AdamConfig& config) {
  OptimizerState state;
  state.config = config;
  state.m.assign(params.parameter_count(), 0.0);
  state.v.assign(params.parameter_count(), 0.0);
  return state;
}

void adam_step(FieldParams& params, std::span<const double> grad, OptimizerState& state) {
  if (grad.size() != params.parameter_count() || state.m.size() != grad.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  for (const double g : grad) {
    if (!std::isfinite(g)) {
      ++state.skipped_steps;
      log_warn("adam_step: non-finite gradient, step skipped");
      return;
    }
  }
  ++state.step_count;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));
  std::span<double> values = params.values();
  const std::size_t mlp_offset = params.mlp_offset();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = grad[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    const double lr = i < mlp_offset ? c.lr_tables : c.lr_mlp;
    values[i] -= lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
  if (!params.all_finite()) {
    throw NumericError("adam_step: parameters became non-finite");
  }
}

const char* train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::events: return "events";
    case TrainMode::frames: return "frames";
    case TrainMode::events_and_frames: return "events_and_frames";
  }
  return "events";
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "events") return TrainMode::events;
  if (name == "frames") return TrainMode::frames;
  if (name == "events_and_frames") return TrainMode::events_and_frames;
  throw ConfigError("unknown train mode '" + name + "'");
}

namespace {

bool uses_events(TrainMode mode) { return mode != TrainMode::frames; }
bool uses_frames(TrainMode mode) { return mode != TrainMode::events; }

struct PairPredictions {
  std::vector<double> prev;
  std::vector<double> curr;
};

// Renders both rays of each pair, forward only. Parallel over pairs.
void forward_pairs(const FieldParams& params, std::span<const Ray> prev_rays,
                   std::span<const Ray> curr_rays, double linlog_b, int n_samples, int threads,
                   PairPredictions& out) {
  const std::size_t n = prev_rays.size();
  out.prev.resize(n);
  out.curr.resize(n);
  parallel_chunks(static_cast<std::int64_t>(n), threads,
                  [&](int, std::int64_t begin, std::int64_t end) {
                    for (std::int64_t i = begin; i < end; ++i) {
                      out.prev[i] = rendered_log_brightness(params, prev_rays[i], n_samples, linlog_b);
                      out.curr[i] = rendered_log_brightness(params, curr_rays[i], n_samples, linlog_b);
                    }
                  });
}

// Renders both rays of each pair with caches and backpropagates
// upstream[i] * d(curr_i - prev_i). Accumulates into per-worker buffers.
void backward_pairs(const FieldParams& params, std::span<const Ray> prev_rays,
                    std::span<const Ray> curr_rays, std::span<const double> upstream,
                    double linlog_b, int n_samples, int threads,
                    std::vector<std::vector<double>>& worker_grads,
                    std::vector<double>* prev_out, std::vector<double>* curr_out) {
  const std::size_t n = prev_rays.size();
  if (prev_out != nullptr) prev_out->resize(n);
  if (curr_out != nullptr) curr_out->resize(n);
  parallel_chunks(static_cast<std::int64_t>(n), threads,
                  [&](int worker, std::int64_t begin, std::int64_t end) {
                    RayForwardCache cache_prev, cache_curr;
                    std::span<double> grad(worker_grads[static_cast<std::size_t>(worker)]);
                    for (std::int64_t i = begin; i < end; ++i) {
                      const double lp = rendered_log_brightness(params, prev_rays[i], n_samples,
                                                                linlog_b, &cache_prev);
                      const double lc = rendered_log_brightness(params, curr_rays[i], n_samples,
                                                                linlog_b, &cache_curr);
                      if (prev_out != nullptr) (*prev_out)[i] = lp;
                      if (curr_out != nullptr) (*curr_out)[i] = lc;
                      if (upstream[i] != 0.0) {
                        rendered_log_brightness_backward(params, cache_curr, upstream[i], grad);
                        rendered_log_brightness_backward(params, cache_prev, -upstream[i], grad);
                      }
                    }
                  });
}

}  // namespace

BatchLoss batch_loss(const FieldParams& params, const AssembledBatch& batch, const LossConfig& cfg,
                     int n_samples, int threads, std::span<double> grad) {
  if (batch.event_prev.size() != batch.event_curr.size() ||
      batch.event_prev.size() != batch.event_target.size() ||
      batch.noevent_prev.size() != batch.noevent_curr.size() ||
      batch.rgb_target.size() != batch.rgb.size() * 3) {
    throw std::invalid_argument("batch_loss: inconsistent batch");
  }
  const bool with_grad = !grad.empty();
  if (with_grad && grad.size() != params.parameter_count()) {
    throw std::invalid_argument("batch_loss: gradient buffer has wrong size");
  }
  const int workers = resolve_threads(threads);
  const double linlog_b = cfg.linlog_threshold;

  // Per-worker gradient buffers, merged in worker order below. Worker 0
  // writes straight into `grad` so the single-thread path has no copy.
  std::vector<std::vector<double>> worker_grads;
  if (with_grad) {
    worker_grads.resize(static_cast<std::size_t>(workers));
    for (int w = 1; w < workers; ++w) {
      worker_grads[static_cast<std::size_t>(w)].assign(params.parameter_count(), 0.0);
    }
  }
  const auto merge_workers = [&] {
    if (!with_grad) return;
    for (int w = 1; w < workers; ++w) {
      const auto& src = worker_grads[static_cast<std::size_t>(w)];
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += src[i];
    }
  };
  if (with_grad) {
    worker_grads[0].clear();  // placeholder; worker 0 uses `grad` directly
  }
  const auto worker_span = [&](int w) -> std::span<double> {
    return w == 0 ? grad : std::span<double>(worker_grads[static_cast<std::size_t>(w)]);
  };

  BatchLoss result;

  // Event term.
  const std::size_t n_ev = batch.event_prev.size();
  if (n_ev > 0) {
    std::vector<double> delta_pred(n_ev);
    std::vector<double> upstream(n_ev, 0.0);
    if (!with_grad || cfg.use_normalized) {
      // The normalized loss couples the whole batch through its norm, so the
      // upstream factors need one forward pass over all pairs first.
      PairPredictions pred;
      forward_pairs(params, batch.event_prev, batch.event_curr, linlog_b, n_samples, workers, pred);
      for (std::size_t i = 0; i < n_ev; ++i) delta_pred[i] = pred.curr[i] - pred.prev[i];
      result.events = cfg.use_normalized
                          ? normalized_event_loss(delta_pred, batch.event_target)
                          : event_loss(delta_pred, batch.event_target);
      if (with_grad) {
        normalized_event_loss_grad(delta_pred, batch.event_target, upstream);
        parallel_chunks(static_cast<std::int64_t>(n_ev), workers,
                        [&](int worker, std::int64_t begin, std::int64_t end) {
                          RayForwardCache cache_prev, cache_curr;
                          std::span<double> g = worker_span(worker);
                          for (std::int64_t i = begin; i < end; ++i) {
                            if (upstream[i] == 0.0) continue;
                            rendered_log_brightness(params, batch.event_prev[i], n_samples, linlog_b,
                                                    &cache_prev);
                            rendered_log_brightness(params, batch.event_curr[i], n_samples, linlog_b,
                                                    &cache_curr);
                            rendered_log_brightness_backward(params, cache_curr, upstream[i], g);
                            rendered_log_brightness_backward(params, cache_prev, -upstream[i], g);
                          }
                        });
      }
    } else {
      // Squared-error event loss: each pair's upstream factor is local, so
      // forward and backward fuse into one pass.
      std::vector<double> term(n_ev);
      parallel_chunks(static_cast<std::int64_t>(n_ev), workers,
                      [&](int worker, std::int64_t begin, std::int64_t end) {
                        RayForwardCache cache_prev, cache_curr;
                        std::span<double> g = worker_span(worker);
                        for (std::int64_t i = begin; i < end; ++i) {
                          const double lp = rendered_log_brightness(
                              params, batch.event_prev[i], n_samples, linlog_b, &cache_prev);
                          const double lc = rendered_log_brightness(
                              params, batch.event_curr[i], n_samples, linlog_b, &cache_curr);
                          const double residual = (lc - lp) - batch.event_target[i];
                          term[i] = residual * residual;
                          const double u = 2.0 * residual;
                          if (u != 0.0) {
                            rendered_log_brightness_backward(params, cache_curr, u, g);
                            rendered_log_brightness_backward(params, cache_prev, -u, g);
                          }
                        }
                      });
      double sum = 0.0;
      for (const double t : term) sum += t;
      result.events = sum;
    }
  }

  // No-event term.
  const std::size_t n_nv = batch.noevent_prev.size();
  if (n_nv > 0 && cfg.lambda_noevs > 0.0) {
    if (!cfg.contrast_threshold) {
      throw ConfigError("batch_loss: the no-event loss needs a known contrast threshold");
    }
    const double contrast = *cfg.contrast_threshold;
    std::vector<double> term(n_nv);
    parallel_chunks(
        static_cast<std::int64_t>(n_nv), workers,
        [&](int worker, std::int64_t begin, std::int64_t end) {
          RayForwardCache cache_prev, cache_curr;
          std::span<double> g = with_grad ? worker_span(worker) : std::span<double>();
          for (std::int64_t i = begin; i < end; ++i) {
            RayForwardCache* cp = with_grad ? &cache_prev : nullptr;
            RayForwardCache* cc = with_grad ? &cache_curr : nullptr;
            const double lp =
                rendered_log_brightness(params, batch.noevent_prev[i], n_samples, linlog_b, cp);
            const double lc =
                rendered_log_brightness(params, batch.noevent_curr[i], n_samples, linlog_b, cc);
            const double diff = lc - lp;
            const double excess = std::abs(diff) - contrast;
            term[i] = excess > 0.0 ? excess : 0.0;
            if (with_grad && excess > 0.0) {
              const double u = cfg.lambda_noevs * (diff > 0.0 ? 1.0 : -1.0);
              rendered_log_brightness_backward(params, cache_curr, u, g);
              rendered_log_brightness_backward(params, cache_prev, -u, g);
            }
          }
        });
    double sum = 0.0;
    for (const double t : term) sum += t;
    result.noevents = sum;
  }

  // Frame term.
  const std::size_t n_rgb = batch.rgb.size();
  if (n_rgb > 0 && cfg.lambda_rgb > 0.0) {
    const double count = static_cast<double>(n_rgb * 3);
    std::vector<double> term(n_rgb);
    parallel_chunks(static_cast<std::int64_t>(n_rgb), workers,
                    [&](int worker, std::int64_t begin, std::int64_t end) {
                      RayForwardCache cache;
                      std::span<double> g = with_grad ? worker_span(worker) : std::span<double>();
                      for (std::int64_t i = begin; i < end; ++i) {
                        RayForwardCache* c = with_grad ? &cache : nullptr;
                        const RenderResult r = render_ray(params, batch.rgb[i], n_samples, c);
                        double t = 0.0;
                        Eigen::Vector3d d_intensity = Eigen::Vector3d::Zero();
                        for (int ch = 0; ch < 3; ++ch) {
                          const double diff =
                              r.intensity[ch] - batch.rgb_target[static_cast<std::size_t>(i) * 3 + ch];
                          t += diff * diff;
                          d_intensity[ch] = cfg.lambda_rgb * 2.0 * diff / count;
                        }
                        term[i] = t / count;
                        if (with_grad && !d_intensity.isZero()) {
                          render_ray_backward(params, cache, d_intensity, g);
                        }
                      }
                    });
    double sum = 0.0;
    for (const double t : term) sum += t;
    result.rgb = sum;
  }

  merge_workers();
  result.total = result.events + cfg.lambda_noevs * result.noevents + cfg.lambda_rgb * result.rgb;
  return result;
}

std::vector<std::string> TrainConfig::validation_errors() const {
  std::vector<std::string> errors;
  const auto check = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  check(iterations >= 0, "iterations must be >= 0");
  check(n_samples >= 2, "n_samples must be >= 2");
  check(near > 0.0 && far > near, "require 0 < near < far");
  if (uses_events(mode)) check(batch_size >= 1, "batch_size must be >= 1");
  if (uses_frames(mode)) {
    check(loss.lambda_rgb > 0.0, "frame modes need lambda_rgb > 0");
    check(frames_index.has_value(), "frame modes need frames_index");
  } else {
    check(loss.lambda_rgb == 0.0, "events mode has no frames; lambda_rgb must be 0");
  }
  try {
    loss.validate();
  } catch (const std::exception& e) {
    errors.emplace_back(e.what());
  }
  try {
    camera.validate();
  } catch (const std::exception& e) {
    errors.emplace_back(e.what());
  }
  try {
    grid.validate();
  } catch (const std::exception& e) {
    errors.emplace_back(e.what());
  }
  try {
    mlp.validate();
  } catch (const std::exception& e) {
    errors.emplace_back(e.what());
  }
  if (sampling.mode == PairSamplingStrategy::Mode::window) {
    check(sampling.window_us > 0, "sampling window_us must be > 0");
    check(sampling.max_accum >= 1, "sampling max_accum must be >= 1");
  }
  return errors;
}

namespace {

Ray pixel_ray(const CameraModel& cam, const Trajectory& traj, std::int64_t t_us, double px,
              double py, double near, double far) {
  return backproject(cam, interpolate_pose(traj, t_us), {px, py}, near, far);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TrainInputs& inputs) {
  {
    const auto errors = cfg.validation_errors();
    if (!errors.empty()) {
      std::string joined = "train: invalid configuration:";
      for (const auto& e : errors) joined += "\n  - " + e;
      throw ConfigError(joined);
    }
  }
  const Trajectory& traj = inputs.trajectory;

  // Effective contrast threshold for targets: config first, stream header as
  // fallback; 1.0 when running the normalized loss without any known C.
  std::optional<double> known_c = cfg.loss.contrast_threshold;
  if (!known_c && inputs.events.has_known_threshold()) {
    known_c = static_cast<double>(inputs.events.contrast_threshold);
    log_info("train: using contrast threshold " + std::to_string(*known_c) +
             " from the event file header");
  }
  LossConfig loss_cfg = cfg.loss;
  loss_cfg.contrast_threshold = known_c;
  loss_cfg.validate();
  const double target_c = known_c ? *known_c : 1.0;

  // Events restricted to the trajectory's time range so every sampled
  // timestamp has a pose.
  EventStream stream;
  PairIndex pair_index;
  std::vector<NoEventInterval> intervals;
  std::size_t noev_per_batch = 0;
  if (uses_events(cfg.mode)) {
    if (inputs.events.t_begin_us > traj.t_end() || inputs.events.t_end_us < traj.t_begin()) {
      throw ConfigError("train: event stream and trajectory time ranges do not overlap");
    }
    stream.width = inputs.events.width;
    stream.height = inputs.events.height;
    stream.contrast_threshold = inputs.events.contrast_threshold;
    stream.t_begin_us = std::max(inputs.events.t_begin_us, traj.t_begin());
    stream.t_end_us = std::min(inputs.events.t_end_us, traj.t_end());
    stream.events.reserve(inputs.events.events.size());
    for (const Event& ev : inputs.events.events) {
      if (ev.t_us >= stream.t_begin_us && ev.t_us <= stream.t_end_us) stream.events.push_back(ev);
    }
    if (stream.events.size() != inputs.events.events.size()) {
      log_info("train: clipped " +
               std::to_string(inputs.events.events.size() - stream.events.size()) +
               " events outside the trajectory range");
    }
    if (stream.events.empty()) throw ConfigError("train: no events inside the trajectory range");
    if (stream.width != cfg.camera.width || stream.height != cfg.camera.height) {
      throw ConfigError("train: event sensor size does not match the camera model");
    }
    pair_index = build_pair_index(stream, cfg.sampling);
    if (pair_index.eligible.empty()) {
      throw ConfigError("train: no event pairs available under the sampling strategy");
    }
    if (loss_cfg.noevent_enabled()) {
      intervals = find_no_event_intervals(stream, loss_cfg.t_noevs_us);
      if (intervals.empty()) {
        log_warn("train: no-event loss enabled but no intervals of length >= T_noevs exist");
      } else {
        const double f = loss_cfg.noevent_fraction;
        noev_per_batch = static_cast<std::size_t>(
            std::llround(static_cast<double>(cfg.batch_size) * f / (1.0 - f)));
      }
    }
  }

  // Frames with poses at their timestamps.
  struct PosedFrame {
    const ImageBuffer* image;
    Pose pose;
  };
  std::vector<PosedFrame> frames;
  std::size_t rgb_per_batch = 0;
  if (uses_frames(cfg.mode)) {
    if (inputs.frames.empty()) throw ConfigError("train: frame mode without frames");
    for (const FrameSample& f : inputs.frames) {
      if (f.t_us < traj.t_begin() || f.t_us > traj.t_end()) {
        throw ConfigError("train: frame timestamp " + std::to_string(f.t_us) +
                          " outside the trajectory range");
      }
      if (f.image.width != cfg.camera.width || f.image.height != cfg.camera.height ||
          f.image.channels != 3) {
        throw ConfigError("train: frame shape does not match the camera model");
      }
      frames.push_back({&f.image, interpolate_pose(traj, f.t_us)});
    }
    rgb_per_batch = cfg.rgb_rays > 0 ? cfg.rgb_rays : std::max<std::size_t>(1, cfg.batch_size / 4);
  }

  FieldParams params =
      FieldParams::init(cfg.grid, cfg.mlp, cfg.seed, (cfg.far - cfg.near) / cfg.n_samples);
  OptimizerState opt = OptimizerState::create(params, cfg.adam);
  std::vector<double> grad(params.parameter_count(), 0.0);

  TrainResult result{std::move(params), {}, 0};
  result.history.reserve(static_cast<std::size_t>(cfg.iterations));

  AssembledBatch batch;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const std::uint64_t iter_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(iter));
    batch = AssembledBatch{};

    if (uses_events(cfg.mode)) {
      const EventBatch eb =
          sample_event_batch(stream, pair_index, cfg.batch_size, target_c, mix_seed(iter_seed, 1));
      batch.event_prev.reserve(eb.samples.size());
      batch.event_curr.reserve(eb.samples.size());
      for (const EventPairSample& s : eb.samples) {
        const double px = s.x + 0.5, py = s.y + 0.5;
        batch.event_prev.push_back(pixel_ray(cfg.camera, traj, s.t_prev_us, px, py, cfg.near, cfg.far));
        batch.event_curr.push_back(pixel_ray(cfg.camera, traj, s.t_curr_us, px, py, cfg.near, cfg.far));
        batch.event_target.push_back(s.delta_l_target);
      }
      if (noev_per_batch > 0 && !intervals.empty()) {
        const auto noev =
            sample_no_event_batch(intervals, noev_per_batch, mix_seed(iter_seed, 2));
        for (const EventPairSample& s : noev) {
          const double px = s.x + 0.5, py = s.y + 0.5;
          batch.noevent_prev.push_back(
              pixel_ray(cfg.camera, traj, s.t_prev_us, px, py, cfg.near, cfg.far));
          batch.noevent_curr.push_back(
              pixel_ray(cfg.camera, traj, s.t_curr_us, px, py, cfg.near, cfg.far));
        }
      }
    }
    if (!frames.empty()) {
      Rng rng(mix_seed(iter_seed, 3));
      for (std::size_t k = 0; k < rgb_per_batch; ++k) {
        const PosedFrame& frame = frames[rng.below(frames.size())];
        const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.camera.width)));
        const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.camera.height)));
        batch.rgb.push_back(
            backproject(cfg.camera, frame.pose, {x + 0.5, y + 0.5}, cfg.near, cfg.far));
        for (int c = 0; c < 3; ++c) {
          batch.rgb_target.push_back(frame.image->at(x, y, c) / kIntensityScale);
        }
      }
    }

    std::fill(grad.begin(), grad.end(), 0.0);
    const BatchLoss loss =
        batch_loss(result.params, batch, loss_cfg, cfg.n_samples, cfg.threads, grad);
    adam_step(result.params, grad, opt);
    result.history.push_back({iter, loss.total, loss.events, loss.noevents, loss.rgb});
    if (iter % 50 == 0 || iter == cfg.iterations - 1) {
      log_info("train: iter " + std::to_string(iter) + " loss " + std::to_string(loss.total));
    }
  }
  result.skipped_steps = opt.skipped_steps;
  return result;
}

TrainResult train(const TrainConfig& cfg) {
  TrainInputs inputs{EventStream{}, Trajectory::load(cfg.trajectory_path), {}};
  if (uses_events(cfg.mode)) inputs.events = read_event_file(cfg.events_path);
  if (uses_frames(cfg.mode) && cfg.frames_index) {
    inputs.frames = load_frames_index(*cfg.frames_index);
  }
  return train(cfg, inputs);
}

void write_loss_csv(const std::filesystem::path& path, std::span<const LossRow> history) {
  std::ofstream out(path);
  if (!out) throw DataFormatError("write_loss_csv: cannot open " + path.string());
  out << "iter,loss_total,loss_evs,loss_noevs,loss_rgb\n";
  char buf[256];
  for (const LossRow& row : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", row.iteration, row.total,
                  row.events, row.noevents, row.rgb);
    out << buf;
  }
}

std::vector<FrameSample> load_frames_index(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw DataFormatError("load_frames_index: cannot open " + csv_path.string());
  std::vector<FrameSample> frames;
  std::string line;
  std::size_t line_no = 0;
  const auto dir = csv_path.parent_path();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "path,t_us") continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw DataFormatError("load_frames_index: malformed line " + std::to_string(line_no));
    }
    FrameSample f;
    f.t_us = std::stoll(line.substr(comma + 1));
    f.image = read_image(dir / line.substr(0, comma));
    frames.push_back(std::move(f));
  }
  if (frames.empty()) throw DataFormatError("load_frames_index: no frames in " + csv_path.string());
  return frames;
}

void write_frames_index(const std::filesystem::path& csv_path,
                        std::span<const std::pair<std::string, std::int64_t>> entries) {
  std::ofstream out(csv_path);
  if (!out) throw DataFormatError("write_frames_index: cannot open " + csv_path.string());
  out << "path,t_us\n";
  for (const auto& [name, t] : entries) out << name << ',' << t << '\n';
}

}  // namespace enerf
