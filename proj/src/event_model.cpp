// Copyright 2026 The enerf Authors
// SPDX-License-Identifier: Apache-2.0

#include "enerf/event_model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "enerf/common.hpp"
#include "enerf/rng.hpp"
#include "enerf/threading.hpp"

namespace enerf {

double linlog(double intensity, double threshold_b) {
  if (intensity < 0.0) {
    throw std::domain_error("linlog: intensity must be non-negative, got " +
                            std::to_string(intensity));
  }
  if (!(threshold_b > 1.0)) {
    throw std::invalid_argument("linlog: threshold B must be > 1");
  }
  if (intensity < threshold_b) {
    return intensity * std::log(threshold_b) / threshold_b;
  }
  return std::log(intensity);
}

double linlog_derivative(double intensity, double threshold_b) {
  if (intensity < threshold_b) return std::log(threshold_b) / threshold_b;
  return 1.0 / intensity;
}

void PixelTriggerState::advance(double l_prev, double l_curr, std::int64_t t_prev_us,
                                std::int64_t t_curr_us, double contrast, std::uint16_t x,
                                std::uint16_t y, std::vector<Event>& out) {
  if (!initialized) {
    reset(l_curr);
    return;
  }
  // One event per full crossing; the signal is linear within the step, so
  // |l_prev - memory| < C holds on entry and each crossing level lies between
  // l_prev and l_curr.
  while (std::abs(l_curr - memory) >= contrast) {
    const int p = l_curr > memory ? 1 : -1;
    const double level = memory + p * contrast;
    const double fraction = (level - l_prev) / (l_curr - l_prev);
    Event ev;
    ev.x = x;
    ev.y = y;
    ev.t_us = t_prev_us + static_cast<std::int64_t>(std::llround(
                              fraction * static_cast<double>(t_curr_us - t_prev_us)));
    ev.polarity = static_cast<std::int8_t>(p);
    out.push_back(ev);
    memory = level;
  }
}

std::vector<Event> events_from_samples(std::span<const double> log_brightness, std::int64_t t0_us,
                                       std::int64_t dt_us, double contrast, std::uint16_t x,
                                       std::uint16_t y) {
  if (!(contrast > 0.0)) throw std::invalid_argument("events_from_samples: contrast must be > 0");
  if (dt_us <= 0) throw std::invalid_argument("events_from_samples: dt must be positive");
  std::vector<Event> out;
  PixelTriggerState state;
  double l_prev = 0.0;
  std::int64_t t_prev = t0_us;
  for (std::size_t i = 0; i < log_brightness.size(); ++i) {
    const std::int64_t t = t0_us + static_cast<std::int64_t>(i) * dt_us;
    state.advance(l_prev, log_brightness[i], t_prev, t, contrast, x, y, out);
    l_prev = log_brightness[i];
    t_prev = t;
  }
  return out;
}

namespace {

double luminance_rgb(const Eigen::Vector3d& rgb) {
  return kLumaR * rgb.x() + kLumaG * rgb.y() + kLumaB * rgb.z();
}

// Camera-frame unit directions through every pixel center; distortion is
// pose-independent so this is computed once per simulation.
std::vector<Eigen::Vector3d> pixel_directions(const CameraModel& cam) {
  std::vector<Eigen::Vector3d> dirs(static_cast<std::size_t>(cam.width) * cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Eigen::Vector2d distorted((x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy);
      const Eigen::Vector2d n = cam.undistort(distorted);
      dirs[static_cast<std::size_t>(y) * cam.width + x] =
          Eigen::Vector3d(n.x(), n.y(), 1.0).normalized();
    }
  }
  return dirs;
}

}  // namespace

EventStream simulate_events(const Scene& scene, const Trajectory& traj, const CameraModel& cam,
                            double contrast, std::int64_t dt_us, int threads) {
  cam.validate();
  if (!(contrast > 0.0)) throw std::invalid_argument("simulate_events: contrast must be > 0");
  if (dt_us <= 0) throw std::invalid_argument("simulate_events: dt must be positive");
  const std::int64_t duration = traj.t_end() - traj.t_begin();
  if (duration <= 0) throw std::invalid_argument("simulate_events: zero-duration trajectory");

  const auto n_steps = static_cast<std::int64_t>(duration / dt_us) + 1;
  std::vector<Pose> poses(static_cast<std::size_t>(n_steps));
  std::vector<std::int64_t> times(static_cast<std::size_t>(n_steps));
  for (std::int64_t i = 0; i < n_steps; ++i) {
    times[i] = std::min(traj.t_begin() + i * dt_us, traj.t_end());
    poses[i] = interpolate_pose(traj, times[i]);
  }

  const std::vector<Eigen::Vector3d> dirs = pixel_directions(cam);
  std::vector<std::vector<Event>> row_events(static_cast<std::size_t>(cam.height));
  const int workers = resolve_threads(threads);
  std::vector<double> worker_max_step(static_cast<std::size_t>(workers), 0.0);

  parallel_chunks(cam.height, workers, [&](int worker, std::int64_t y0, std::int64_t y1) {
    const auto rows = static_cast<std::size_t>(y1 - y0);
    std::vector<PixelTriggerState> states(rows * cam.width);
    std::vector<double> prev_l(rows * cam.width, 0.0);
    double max_step = 0.0;
    Ray ray;
    ray.near = 0.01;
    ray.far = 100.0;
    for (std::int64_t i = 0; i < n_steps; ++i) {
      const Eigen::Matrix3d rot = poses[i].rotation.matrix();
      ray.origin = poses[i].translation;
      for (std::int64_t y = y0; y < y1; ++y) {
        const std::size_t row_off = static_cast<std::size_t>(y - y0) * cam.width;
        for (int x = 0; x < cam.width; ++x) {
          ray.direction = rot * dirs[static_cast<std::size_t>(y) * cam.width + x];
          const double l = linlog(luminance_rgb(scene_intensity(scene, ray)),
                                  kDefaultLinlogThreshold);
          const std::size_t idx = row_off + x;
          if (i > 0) {
            max_step = std::max(max_step, std::abs(l - prev_l[idx]));
            states[idx].advance(prev_l[idx], l, times[i - 1], times[i], contrast,
                                static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                                row_events[static_cast<std::size_t>(y)]);
          } else {
            states[idx].reset(l);
          }
          prev_l[idx] = l;
        }
      }
    }
    worker_max_step[static_cast<std::size_t>(worker)] = max_step;
  });

  const double max_step = *std::max_element(worker_max_step.begin(), worker_max_step.end());
  if (max_step >= 10.0 * contrast) {
    log_warn("simulate_events: per-step brightness change up to " + std::to_string(max_step) +
             " (>= 10 C); consider a smaller dt");
  }

  EventStream stream;
  stream.width = cam.width;
  stream.height = cam.height;
  stream.contrast_threshold = static_cast<float>(contrast);
  stream.t_begin_us = traj.t_begin();
  stream.t_end_us = traj.t_end();
  std::size_t total = 0;
  for (const auto& row : row_events) total += row.size();
  stream.events.reserve(total);
  for (const auto& row : row_events) {
    stream.events.insert(stream.events.end(), row.begin(), row.end());
  }
  std::stable_sort(stream.events.begin(), stream.events.end(), [](const Event& a, const Event& b) {
    if (a.t_us != b.t_us) return a.t_us < b.t_us;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  return stream;
}

ImageBuffer render_blurred_frame(const Scene& scene, const Trajectory& traj, const CameraModel& cam,
                                 std::int64_t t_mid_us, std::int64_t exposure_us, int n_substeps,
                                 int threads) {
  if (n_substeps < 1) throw std::invalid_argument("render_blurred_frame: n_substeps must be >= 1");
  if (exposure_us < 0) throw std::invalid_argument("render_blurred_frame: exposure must be >= 0");
  if (n_substeps == 1 || exposure_us == 0) {
    return scene_render(scene, interpolate_pose(traj, t_mid_us), cam, threads);
  }
  ImageBuffer acc = ImageBuffer::zeros(cam.width, cam.height, 3);
  for (int k = 0; k < n_substeps; ++k) {
    const double f = static_cast<double>(k) / (n_substeps - 1);  // spans the full exposure
    const auto t = static_cast<std::int64_t>(
        std::llround(static_cast<double>(t_mid_us) + (f - 0.5) * static_cast<double>(exposure_us)));
    const ImageBuffer sharp = scene_render(scene, interpolate_pose(traj, t), cam, threads);
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += sharp.data[i];
  }
  for (auto& v : acc.data) v /= static_cast<float>(n_substeps);
  return acc;
}

std::vector<NoEventInterval> find_no_event_intervals(const EventStream& stream,
                                                     std::int64_t t_noevs_us) {
  if (t_noevs_us <= 0) throw std::invalid_argument("find_no_event_intervals: T_noevs must be > 0");
  const std::size_t n_px = static_cast<std::size_t>(stream.width) * stream.height;
  std::vector<std::int64_t> last_t(n_px, stream.t_begin_us);
  std::vector<NoEventInterval> out;
  const auto emit = [&](std::uint16_t x, std::uint16_t y, std::int64_t t0, std::int64_t t1) {
    if (t1 - t0 >= t_noevs_us) out.push_back({x, y, t0, t1});
  };
  for (const Event& ev : stream.events) {
    const std::size_t idx = static_cast<std::size_t>(ev.y) * stream.width + ev.x;
    emit(ev.x, ev.y, last_t[idx], ev.t_us);
    last_t[idx] = ev.t_us;
  }
  for (int y = 0; y < stream.height; ++y) {
    for (int x = 0; x < stream.width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * stream.width + x;
      emit(static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), last_t[idx],
           stream.t_end_us);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const NoEventInterval& a, const NoEventInterval& b) {
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.t0_us < b.t0_us;
  });
  return out;
}

PairIndex build_pair_index(const EventStream& stream, const PairSamplingStrategy& strategy) {
  PairIndex index;
  index.strategy = strategy;
  const std::size_t n = stream.events.size();
  index.partner.assign(n, -1);
  index.polarity_sum.assign(n, 0.0);
  const std::size_t n_px = static_cast<std::size_t>(stream.width) * stream.height;

  if (strategy.mode == PairSamplingStrategy::Mode::adjacent) {
    std::vector<std::int64_t> last(n_px, -1);
    for (std::size_t i = 0; i < n; ++i) {
      const Event& ev = stream.events[i];
      const std::size_t px = static_cast<std::size_t>(ev.y) * stream.width + ev.x;
      if (last[px] >= 0) {
        index.partner[i] = last[px];
        index.polarity_sum[i] = ev.polarity;
        index.eligible.push_back(static_cast<std::uint32_t>(i));
      }
      last[px] = static_cast<std::int64_t>(i);
    }
    return index;
  }

  if (strategy.window_us <= 0) throw std::invalid_argument("window strategy: window_us must be > 0");
  if (strategy.max_accum < 1) throw std::invalid_argument("window strategy: max_accum must be >= 1");
  // Per-pixel event lists (already time sorted within a pixel).
  std::vector<std::vector<std::uint32_t>> per_pixel(n_px);
  for (std::size_t i = 0; i < n; ++i) {
    const Event& ev = stream.events[i];
    per_pixel[static_cast<std::size_t>(ev.y) * stream.width + ev.x].push_back(
        static_cast<std::uint32_t>(i));
  }
  for (const auto& list : per_pixel) {
    std::size_t group_begin = 0;
    while (group_begin < list.size()) {
      const std::int64_t w =
          (stream.events[list[group_begin]].t_us - stream.t_begin_us) / strategy.window_us;
      std::size_t group_end = group_begin + 1;
      while (group_end < list.size() &&
             (stream.events[list[group_end]].t_us - stream.t_begin_us) / strategy.window_us == w) {
        ++group_end;
      }
      const std::size_t last = group_end - 1;
      for (std::size_t k = group_begin; k < last; ++k) {
        const std::size_t j = std::min(k + static_cast<std::size_t>(strategy.max_accum), last);
        double sum = 0.0;
        for (std::size_t i = k + 1; i <= j; ++i) sum += stream.events[list[i]].polarity;
        index.partner[list[k]] = list[j];
        index.polarity_sum[list[k]] = sum;
        index.eligible.push_back(list[k]);
      }
      group_begin = group_end;
    }
  }
  std::sort(index.eligible.begin(), index.eligible.end());
  return index;
}

EventBatch sample_event_batch(const EventStream& stream, const PairIndex& index,
                              std::size_t batch_size, double contrast, std::uint64_t seed) {
  if (!(contrast > 0.0)) throw std::invalid_argument("sample_event_batch: contrast must be > 0");
  EventBatch batch;
  const std::size_t available = index.eligible.size();
  const bool windowed = index.strategy.mode == PairSamplingStrategy::Mode::window;

  const auto emit = [&](std::uint32_t event_idx) {
    const Event& ev = stream.events[event_idx];
    const Event& partner = stream.events[static_cast<std::size_t>(index.partner[event_idx])];
    EventPairSample s;
    s.x = ev.x;
    s.y = ev.y;
    s.kind = SampleKind::event;
    s.delta_l_target = contrast * index.polarity_sum[event_idx];
    if (windowed) {  // sampled event is the earlier element of the pair
      s.t_prev_us = ev.t_us;
      s.t_curr_us = partner.t_us;
    } else {  // partner is the immediate predecessor
      s.t_prev_us = partner.t_us;
      s.t_curr_us = ev.t_us;
    }
    batch.samples.push_back(s);
  };

  if (batch_size > available) {
    log_warn("sample_event_batch: requested " + std::to_string(batch_size) + " pairs, only " +
             std::to_string(available) + " available");
    batch.truncated = true;
    for (const std::uint32_t idx : index.eligible) emit(idx);
    return batch;
  }
  Rng rng(seed);
  batch.samples.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) {
    emit(index.eligible[rng.below(available)]);
  }
  return batch;
}

EventBatch sample_event_batch(const EventStream& stream, const PairSamplingStrategy& strategy,
                              std::size_t batch_size, double contrast, std::uint64_t seed) {
  return sample_event_batch(stream, build_pair_index(stream, strategy), batch_size, contrast, seed);
}

std::vector<EventPairSample> sample_no_event_batch(std::span<const NoEventInterval> intervals,
                                                   std::size_t count, std::uint64_t seed) {
  if (intervals.empty()) {
    throw std::invalid_argument("sample_no_event_batch: interval list is empty");
  }
  Rng rng(seed);
  std::vector<EventPairSample> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const NoEventInterval& iv = intervals[rng.below(intervals.size())];
    if (iv.t1_us <= iv.t0_us) {
      throw std::invalid_argument("sample_no_event_batch: degenerate interval");
    }
    std::int64_t a = rng.range_i64(iv.t0_us, iv.t1_us);
    std::int64_t b = rng.range_i64(iv.t0_us, iv.t1_us);
    while (a == b) b = rng.range_i64(iv.t0_us, iv.t1_us);
    EventPairSample s;
    s.x = iv.x;
    s.y = iv.y;
    s.t_prev_us = std::min(a, b);
    s.t_curr_us = std::max(a, b);
    s.kind = SampleKind::no_event;
    out.push_back(s);
  }
  return out;
}

namespace {

constexpr char kEventMagic[4] = {'E', 'V', 'T', '1'};
constexpr std::uint32_t kEventVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));  // little-endian host
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_event_file(const std::filesystem::path& path, const EventStream& stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataFormatError("write_event_file: cannot open " + path.string());
  out.write(kEventMagic, 4);
  write_le<std::uint32_t>(out, kEventVersion);
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(stream.width));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(stream.height));
  float threshold = stream.contrast_threshold;
  if (std::isnan(threshold)) {
    const std::uint32_t canonical_nan = 0x7fc00000u;  // byte-stable NaN
    std::memcpy(&threshold, &canonical_nan, sizeof(threshold));
  }
  write_le<float>(out, threshold);
  for (const Event& ev : stream.events) {
    if (ev.t_us < 0) {
      throw DataFormatError("write_event_file: negative timestamp cannot be stored");
    }
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(ev.t_us));
    write_le<std::uint16_t>(out, ev.x);
    write_le<std::uint16_t>(out, ev.y);
    write_le<std::int8_t>(out, ev.polarity);
  }
  if (!out) throw DataFormatError("write_event_file: short write to " + path.string());
}

EventStream read_event_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("read_event_file: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kEventMagic, 4) != 0) {
    throw DataFormatError("read_event_file: bad magic in " + path.string());
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kEventVersion) {
    throw DataFormatError("read_event_file: unsupported version " + std::to_string(version));
  }
  EventStream stream;
  stream.width = read_le<std::uint16_t>(in);
  stream.height = read_le<std::uint16_t>(in);
  stream.contrast_threshold = read_le<float>(in);
  if (!in) throw DataFormatError("read_event_file: truncated header in " + path.string());
  while (true) {
    unsigned char rec[13];  // u64 t, u16 x, u16 y, i8 p
    in.read(reinterpret_cast<char*>(rec), sizeof(rec));
    if (in.gcount() == 0 && in.eof()) break;
    if (in.gcount() != sizeof(rec)) {
      throw DataFormatError("read_event_file: truncated record in " + path.string());
    }
    Event ev;
    std::uint64_t t;
    std::memcpy(&t, rec, 8);
    std::memcpy(&ev.x, rec + 8, 2);
    std::memcpy(&ev.y, rec + 10, 2);
    std::memcpy(&ev.polarity, rec + 12, 1);
    ev.t_us = static_cast<std::int64_t>(t);
    if (ev.polarity != 1 && ev.polarity != -1) {
      throw DataFormatError("read_event_file: invalid polarity in " + path.string());
    }
    if (ev.x >= stream.width || ev.y >= stream.height) {
      throw DataFormatError("read_event_file: event outside sensor bounds in " + path.string());
    }
    stream.events.push_back(ev);
  }
  // The span is not serialized; fall back to the observed extent.
  if (!stream.events.empty()) {
    stream.t_begin_us = stream.events.front().t_us;
    stream.t_end_us = stream.events.back().t_us;
  }
  return stream;
}

void write_event_csv(const std::filesystem::path& path, const EventStream& stream) {
  std::ofstream out(path);
  if (!out) throw DataFormatError("write_event_csv: cannot open " + path.string());
  out << "t,x,y,p\n";
  for (const Event& ev : stream.events) {
    out << ev.t_us << ',' << ev.x << ',' << ev.y << ',' << static_cast<int>(ev.polarity) << '\n';
  }
}

}  // namespace enerf
