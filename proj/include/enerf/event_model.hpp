// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "enerf/geometry.hpp"
#include "enerf/image.hpp"
#include "enerf/scenes.hpp"

namespace enerf {

/// One asynchronous polarity measurement.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int64_t t_us = 0;
  std::int8_t polarity = 1;  // +1 or -1
};

/// Time-sorted event stream with sensor metadata. `contrast_threshold` is the
/// C used at generation, NaN when unknown (e.g. recorded data).
struct EventStream {
  int width = 0;
  int height = 0;
  float contrast_threshold = std::numeric_limits<float>::quiet_NaN();
  std::int64_t t_begin_us = 0;
  std::int64_t t_end_us = 0;
  std::vector<Event> events;  // sorted by (t, y, x)

  bool has_known_threshold() const { return !std::isnan(contrast_threshold); }
};

/// Piecewise brightness map: linear below B, logarithmic above, continuous at
/// I = B. Requires I >= 0 (domain error) and B > 1.
double linlog(double intensity, double threshold_b);

/// Derivative of linlog wrt intensity; the I < B branch applies at the knee.
double linlog_derivative(double intensity, double threshold_b);

/// Per-pixel contrast-trigger state: emits one event per full threshold
/// crossing of the linearly interpolated signal, advancing the stored memory
/// level by polarity * C per event.
struct PixelTriggerState {
  double memory = 0.0;
  bool initialized = false;

  void reset(double level) {
    memory = level;
    initialized = true;
  }

  /// Advances from (t_prev, l_prev) to (t_curr, l_curr), appending events.
  void advance(double l_prev, double l_curr, std::int64_t t_prev_us, std::int64_t t_curr_us,
               double contrast, std::uint16_t x, std::uint16_t y, std::vector<Event>& out);
};

/// Events for a single pixel whose log-brightness samples are given at
/// uniform dt spacing starting at t0. The first sample initializes the memory.
std::vector<Event> events_from_samples(std::span<const double> log_brightness, std::int64_t t0_us,
                                       std::int64_t dt_us, double contrast, std::uint16_t x = 0,
                                       std::uint16_t y = 0);

/// ESIM-style full-sensor simulation: renders the scene's linlog luminance at
/// every dt step along the trajectory and applies the per-pixel trigger.
/// Warns when a step moves any pixel by >= 10 C (dt too coarse).
EventStream simulate_events(const Scene& scene, const Trajectory& traj, const CameraModel& cam,
                            double contrast, std::int64_t dt_us, int threads = 1);

/// Average of n_substeps sharp renders spanning [t_mid - exposure/2,
/// t_mid + exposure/2]; n_substeps == 1 reduces to the sharp render at t_mid.
ImageBuffer render_blurred_frame(const Scene& scene, const Trajectory& traj, const CameraModel& cam,
                                 std::int64_t t_mid_us, std::int64_t exposure_us, int n_substeps,
                                 int threads = 1);

/// Per-pixel maximal gaps of length >= t_noevs_us with no event strictly
/// inside, including the gaps between stream begin/end and first/last event.
struct NoEventInterval {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int64_t t0_us = 0;
  std::int64_t t1_us = 0;
};

std::vector<NoEventInterval> find_no_event_intervals(const EventStream& stream,
                                                     std::int64_t t_noevs_us);

enum class SampleKind { event, no_event };

/// One training pair: the two ray timestamps at a pixel and the target
/// log-brightness change (sum of skipped polarities times C). For no-event
/// pairs the target is unused; the bound |dL| <= C applies instead.
struct EventPairSample {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int64_t t_prev_us = 0;
  std::int64_t t_curr_us = 0;
  double delta_l_target = 0.0;
  SampleKind kind = SampleKind::event;
};

struct PairSamplingStrategy {
  enum class Mode { adjacent, window };
  Mode mode = Mode::adjacent;
  std::int64_t window_us = 60000;  // window length for Mode::window
  int max_accum = 5;               // cap on accumulated events per pair
};

/// Precomputed pairing: for every event, the index of its pair partner
/// (previous same-pixel event for `adjacent`; for `window`, the event itself
/// is the earlier element and the partner is later). -1 when ineligible.
struct PairIndex {
  PairSamplingStrategy strategy;
  std::vector<std::int64_t> partner;       // partner event index or -1
  std::vector<double> polarity_sum;        // signed polarity sum over skipped events
  std::vector<std::uint32_t> eligible;     // indices of events with a partner
};

PairIndex build_pair_index(const EventStream& stream, const PairSamplingStrategy& strategy);

struct EventBatch {
  std::vector<EventPairSample> samples;
  bool truncated = false;  // fewer pairs available than requested
};

/// Uniform i.i.d. draw of `batch_size` pairs; when fewer distinct pairs exist
/// than requested, all of them are returned once and the batch is flagged.
/// Deterministic given the seed.
EventBatch sample_event_batch(const EventStream& stream, const PairIndex& index,
                              std::size_t batch_size, double contrast, std::uint64_t seed);
EventBatch sample_event_batch(const EventStream& stream, const PairSamplingStrategy& strategy,
                              std::size_t batch_size, double contrast, std::uint64_t seed);

/// Uniformly picks an interval, then two ordered uniform timestamps inside it.
std::vector<EventPairSample> sample_no_event_batch(std::span<const NoEventInterval> intervals,
                                                   std::size_t count, std::uint64_t seed);

/// Binary event file ("EVT1"): 16-byte header (magic, version, width, height,
/// contrast threshold) followed by little-endian (u64 t, u16 x, u16 y, i8 p)
/// records.
void write_event_file(const std::filesystem::path& path, const EventStream& stream);
EventStream read_event_file(const std::filesystem::path& path);

/// Debug CSV mirror `t,x,y,p` with a header row.
void write_event_csv(const std::filesystem::path& path, const EventStream& stream);

}  // namespace enerf
