#pragma once

#include <algorithm>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "tiersim/types.hpp"

namespace tiersim {

struct FeatureConfig {
  int k = 12;                          // access-history length
  Seconds max_interval = 2592000.0;    // 1 month; deltas are clamped to this
  double missing_sentinel = -1.0;      // outside the normalized [0,1] range
  Bytes max_file_size = 10 * kGiB;     // size normalization ceiling

  int width() const { return k + 3; }

  void validate() const {
    if (k < 1 || max_interval <= 0.0 ||
        (missing_sentinel >= 0.0 && missing_sentinel <= 1.0))
      throw SimError(ErrorCode::ConfigError, "invalid feature config");
  }
};

struct TrainingPoint {
  std::vector<double> features;
  int label = 0;
  Seconds reference_time = 0.0;
};

// Fixed feature layout, width k+3:
//   [0]            normalized file size
//   [1]            delta(t_ref, creation)
//   [2]            delta(t_ref, most recent access before t_ref)   *
//   [3]            delta(oldest known access, creation)            *
//   [4 .. k+2]     deltas between consecutive accesses, oldest pair first *
// Slots marked * hold the missing sentinel when undefined. With m accesses
// before t_ref there are m+2 populated delta slots (m >= 1), so k-m
// access-based slots stay missing. No raw timestamps appear, only deltas.
inline std::vector<double> build_features(const FileMeta& meta, Seconds t_ref,
                                          const FeatureConfig& cfg) {
  if (t_ref < meta.created_at)
    throw SimError(ErrorCode::InvalidReference, "reference time before creation");

  auto norm = [&cfg](Seconds d) { return std::min(d / cfg.max_interval, 1.0); };

  std::vector<double> x(static_cast<size_t>(cfg.width()), cfg.missing_sentinel);
  x[0] = std::min(static_cast<double>(meta.size) / static_cast<double>(cfg.max_file_size), 1.0);
  x[1] = norm(t_ref - meta.created_at);

  // Accesses strictly before the reference time.
  auto end = std::lower_bound(meta.access_times.begin(), meta.access_times.end(), t_ref);
  auto m = static_cast<size_t>(std::distance(meta.access_times.begin(), end));
  if (m >= 1) {
    x[2] = norm(t_ref - meta.access_times[m - 1]);
    x[3] = norm(meta.access_times[0] - meta.created_at);
    for (size_t i = 0; i + 1 < m; ++i)
      x[4 + i] = norm(meta.access_times[i + 1] - meta.access_times[i]);
  }
  return x;
}

// 1 iff the file is accessed in the half-open window (t_ref, t_ref + w].
// An access exactly at t_ref belongs to the past, not the window.
inline int label_in_window(const FileMeta& meta, Seconds t_ref, Seconds w, Seconds now) {
  if (t_ref + w > now)
    throw SimError(ErrorCode::FutureWindow, "class window extends beyond current time");
  for (Seconds a : meta.access_times)
    if (a > t_ref && a <= t_ref + w) return 1;
  return 0;
}

// Training point with the reference time w before now, so the label is fully
// determined by the history seen so far.
inline TrainingPoint sample_training_point(const FileMeta& meta, Seconds now, Seconds w,
                                           const FeatureConfig& cfg) {
  Seconds t_ref = now - w;
  if (t_ref < meta.created_at)
    throw SimError(ErrorCode::TooYoung, "file " + std::to_string(meta.file_id));
  TrainingPoint p;
  p.reference_time = t_ref;
  p.features = build_features(meta, t_ref, cfg);
  p.label = label_in_window(meta, t_ref, w, now);
  return p;
}

// Positive point generated right after the file was accessed at `now`: the
// triggering access sits inside (now - w, now], so the label is 1 by
// construction while the features only see accesses before now - w.
inline TrainingPoint on_access_positive_sample(const FileMeta& meta, Seconds now, Seconds w,
                                               const FeatureConfig& cfg) {
  TrainingPoint p = sample_training_point(meta, now, w, cfg);
  p.label = 1;
  return p;
}

inline nlohmann::ordered_json training_point_to_json(const TrainingPoint& p) {
  return nlohmann::ordered_json{
      {"features", p.features}, {"label", p.label}, {"t_ref", p.reference_time}};
}

inline void dump_training_points(std::ostream& out, const std::vector<TrainingPoint>& points) {
  for (const TrainingPoint& p : points) out << training_point_to_json(p).dump() << '\n';
}

}  // namespace tiersim
