#pragma once

#include <algorithm>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "tiersim/classic_policies.hpp"
#include "tiersim/features.hpp"
#include "tiersim/gbt.hpp"
#include "tiersim/policy.hpp"

namespace tiersim {

struct XgbPolicyConfig {
  int scan_k = 200;                        // candidates scored per decision
  double discrimination_threshold = 0.5;   // strict: equal scores do not upgrade
  double warmup_error_threshold = 0.01;
  Bytes upgrade_batch_cap = kGiB;          // scheduled bytes per loop invocation
  Seconds downgrade_window = 6.0 * 3600.0;
  Seconds upgrade_window = 30.0 * 60.0;
  int holdout_every = 10;    // every Nth point is scored before it is trained on
  int holdout_window = 200;  // rolling error window
  int sweep_sample = 500;    // files sampled per periodic sweep
  Seconds sweep_interval = 300.0;
  int boost_trigger = 500;
  std::size_t store_capacity = 100000;
  GbtConfig gbt;
  FeatureConfig features;

  void validate() const {
    if (scan_k < 1 || discrimination_threshold <= 0.0 || discrimination_threshold >= 1.0)
      throw SimError(ErrorCode::ConfigError, "invalid xgb policy config");
    gbt.validate();
    features.validate();
  }
};

inline bool xgb_should_upgrade(double probability, double threshold) {
  return probability > threshold;
}

// Scores the scan_k least-recently-used candidates and returns the file with
// the lowest predicted access probability (lowest id on score ties).
template <typename ScoreFn, typename RecencyFn>
FileId xgb_select_downgrade(std::vector<FileId> candidates, int scan_k, ScoreFn&& score,
                            RecencyFn&& recency) {
  if (candidates.empty()) throw SimError(ErrorCode::EmptyCandidates, "xgb downgrade");
  std::sort(candidates.begin(), candidates.end(), [&](FileId a, FileId b) {
    Seconds ra = recency(a), rb = recency(b);
    if (ra != rb) return ra < rb;
    return a < b;
  });
  if (static_cast<int>(candidates.size()) > scan_k) candidates.resize(scan_k);
  FileId best = candidates.front();
  double best_score = score(best);
  for (FileId f : candidates) {
    double s = score(f);
    if (s < best_score || (s == best_score && f < best)) {
      best = f;
      best_score = s;
    }
  }
  return best;
}

struct UpgradeCandidate {
  FileId id = -1;
  Bytes size = 0;
  double score = 0.0;
};

// Schedules candidates in descending score while the score clears the
// threshold and the bytes already scheduled are still under the cap (the
// last scheduled file may push the total past it).
inline std::vector<FileId> plan_upgrade_batch(std::vector<UpgradeCandidate> scored,
                                              double threshold, Bytes cap) {
  std::sort(scored.begin(), scored.end(), [](const UpgradeCandidate& a, const UpgradeCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  std::vector<FileId> out;
  Bytes scheduled = 0;
  for (const UpgradeCandidate& c : scored) {
    if (!xgb_should_upgrade(c.score, threshold)) break;
    if (scheduled >= cap) break;
    out.push_back(c.id);
    scheduled += c.size;
  }
  return out;
}

struct ModelDiagnostics {
  std::optional<Seconds> warm_time;
  std::vector<std::pair<Seconds, double>> holdout_errors;  // (time, rolling error)
  std::uint64_t points = 0;
  std::uint64_t holdouts = 0;
  std::uint64_t boosts = 0;
  std::size_t store_size = 0;
  std::size_t tree_count = 0;
  std::uint64_t fallback_decisions = 0;
  std::uint64_t model_decisions = 0;
};

// One incrementally trained access model: a training stream (periodic sweeps
// plus a positive sample after every access), a 1-in-N holdout gate, and a
// warm-up latch. The model answers "will this file be accessed within the
// class window" with the reference time equal to now.
class OnlineAccessModel {
 public:
  OnlineAccessModel(Seconds class_window, const XgbPolicyConfig& cfg, std::uint64_t seed)
      : window_(class_window),
        cfg_(cfg),
        learner_(cfg.gbt, cfg.features.width(), cfg.store_capacity, cfg.boost_trigger),
        rng_(seed) {}

  Seconds class_window() const { return window_; }
  bool warm() const { return warm_latched_; }
  const IncrementalLearner& learner() const { return learner_; }

  void observe_access(const FileMeta& meta, Seconds now) {
    if (now - window_ < meta.created_at) return;  // too young for a sample
    feed_point(on_access_positive_sample(meta, now, window_, cfg_.features), now);
  }

  void sweep(const Cluster& cluster, Seconds now) {
    std::vector<FileId> files = cluster.all_files();
    std::size_t want = std::min(files.size(), static_cast<std::size_t>(cfg_.sweep_sample));
    // Partial Fisher-Yates over the ascending id list.
    for (std::size_t i = 0; i < want; ++i) {
      std::size_t j = i + rng_.uniform_int(files.size() - i);
      std::swap(files[i], files[j]);
    }
    for (std::size_t i = 0; i < want; ++i) {
      const FileMeta& meta = cluster.meta(files[i]);
      if (now - window_ < meta.created_at) continue;
      feed_point(sample_training_point(meta, now, window_, cfg_.features), now);
    }
  }

  // Every holdout_every-th point is scored first, then trained on like any
  // other point. The model counts as warm once the rolling error over a full
  // holdout window has dropped below the threshold; warmth then latches.
  void feed_point(const TrainingPoint& p, Seconds now) {
    ++points_;
    if (points_ % cfg_.holdout_every == 0) {
      bool predicted = learner_.predict(p.features) > cfg_.discrimination_threshold;
      bool correct = predicted == (p.label == 1);
      window_hits_.push_back(correct);
      if (!correct) ++window_wrong_;
      if (static_cast<int>(window_hits_.size()) > cfg_.holdout_window) {
        if (!window_hits_.front()) --window_wrong_;
        window_hits_.pop_front();
      }
      ++holdouts_;
      double err = rolling_error();
      if (!warm_latched_ && static_cast<int>(window_hits_.size()) >= cfg_.holdout_window &&
          err < cfg_.warmup_error_threshold) {
        warm_latched_ = true;
        warm_time_ = now;
      }
      holdout_errors_.emplace_back(now, err);
    }
    learner_.add(p.features, p.label);
  }

  double rolling_error() const {
    if (window_hits_.empty()) return 1.0;
    return static_cast<double>(window_wrong_) / static_cast<double>(window_hits_.size());
  }

  double score(const FileMeta& meta, Seconds now) const {
    return learner_.predict(build_features(meta, now, cfg_.features));
  }

  ModelDiagnostics diagnostics() const {
    ModelDiagnostics d;
    d.warm_time = warm_time_;
    d.holdout_errors = holdout_errors_;
    d.points = points_;
    d.holdouts = holdouts_;
    d.boosts = learner_.boost_count();
    d.store_size = learner_.store_size();
    d.tree_count = learner_.model().tree_count();
    return d;
  }

 private:
  Seconds window_;
  XgbPolicyConfig cfg_;
  IncrementalLearner learner_;
  Rng rng_;
  std::uint64_t points_ = 0;
  std::uint64_t holdouts_ = 0;
  std::deque<bool> window_hits_;
  int window_wrong_ = 0;
  bool warm_latched_ = false;
  std::optional<Seconds> warm_time_;
  std::vector<std::pair<Seconds, double>> holdout_errors_;
};

class XgbDowngradePolicy : public DowngradePolicy {
 public:
  XgbDowngradePolicy(const Cluster& cluster, const XgbPolicyConfig& cfg, std::uint64_t seed)
      : cluster_(cluster), cfg_(cfg), model_(cfg.downgrade_window, cfg, seed) {
    cfg.validate();
  }

  std::string name() const override { return "xgb"; }

  void on_access(const FileMeta& meta, Seconds now) override {
    model_.observe_access(meta, now);
  }

  void on_tick(Seconds now) override {
    if (now >= next_sweep_) {
      model_.sweep(cluster_, now);
      next_sweep_ = now + cfg_.sweep_interval;
    }
  }

  // Warm: lowest predicted probability among the scan_k LRU candidates.
  // Not warm yet: plain LRU.
  FileId select_victim(TierKind, const std::vector<FileId>& candidates, Seconds now) override {
    if (candidates.empty()) throw SimError(ErrorCode::EmptyCandidates, name());
    auto recency = [this](FileId f) { return cluster_.meta(f).last_activity(); };
    if (!model_.warm()) {
      ++fallbacks_;
      FileId best = candidates.front();
      Seconds best_t = recency(best);
      for (FileId f : candidates) {
        Seconds t = recency(f);
        if (t < best_t) {
          best = f;
          best_t = t;
        }
      }
      return best;
    }
    ++model_decisions_;
    return xgb_select_downgrade(
        candidates, cfg_.scan_k,
        [this, now](FileId f) { return model_.score(cluster_.meta(f), now); }, recency);
  }

  OnlineAccessModel& model() { return model_; }

  ModelDiagnostics diagnostics() const {
    ModelDiagnostics d = model_.diagnostics();
    d.fallback_decisions = fallbacks_;
    d.model_decisions = model_decisions_;
    return d;
  }

 private:
  const Cluster& cluster_;
  XgbPolicyConfig cfg_;
  OnlineAccessModel model_;
  Seconds next_sweep_ = -1.0;
  std::uint64_t fallbacks_ = 0;
  std::uint64_t model_decisions_ = 0;
};

class XgbUpgradePolicy : public UpgradePolicy {
 public:
  XgbUpgradePolicy(const Cluster& cluster, const XgbPolicyConfig& cfg, std::uint64_t seed)
      : cluster_(cluster), cfg_(cfg), model_(cfg.upgrade_window, cfg, seed) {
    cfg.validate();
  }

  std::string name() const override { return "xgb"; }

  void on_access(const FileMeta& meta, Seconds now) override {
    model_.observe_access(meta, now);
  }

  void on_tick(Seconds now) override {
    if (now >= next_sweep_) {
      model_.sweep(cluster_, now);
      next_sweep_ = now + cfg_.sweep_interval;
    }
  }

  // Warm: scan the scan_k most recently used files without a memory replica,
  // highest score first, under the per-invocation byte cap. Not warm yet:
  // behave like OSA on the accessed file.
  std::vector<FileId> plan_upgrades(std::optional<FileId> accessed, Seconds now,
                                    const Prober&) override {
    if (!model_.warm()) {
      ++fallbacks_;
      if (accessed && cluster_.exists(*accessed) &&
          osa_should_upgrade(cluster_.has_placement_on_tier(*accessed, TierKind::Memory)))
        return {*accessed};
      return {};
    }
    ++model_decisions_;

    std::vector<FileId> mru;
    for (FileId f : cluster_.all_files())
      if (!cluster_.has_placement_on_tier(f, TierKind::Memory)) mru.push_back(f);
    std::sort(mru.begin(), mru.end(), [this](FileId a, FileId b) {
      Seconds ra = cluster_.meta(a).last_activity();
      Seconds rb = cluster_.meta(b).last_activity();
      if (ra != rb) return ra > rb;
      return a < b;
    });
    if (static_cast<int>(mru.size()) > cfg_.scan_k) mru.resize(cfg_.scan_k);

    std::vector<UpgradeCandidate> scored;
    scored.reserve(mru.size());
    for (FileId f : mru) {
      const FileMeta& meta = cluster_.meta(f);
      scored.push_back({f, meta.size, model_.score(meta, now)});
    }
    return plan_upgrade_batch(std::move(scored), cfg_.discrimination_threshold,
                              cfg_.upgrade_batch_cap);
  }

  OnlineAccessModel& model() { return model_; }

  ModelDiagnostics diagnostics() const {
    ModelDiagnostics d = model_.diagnostics();
    d.fallback_decisions = fallbacks_;
    d.model_decisions = model_decisions_;
    return d;
  }

 private:
  const Cluster& cluster_;
  XgbPolicyConfig cfg_;
  OnlineAccessModel model_;
  Seconds next_sweep_ = -1.0;
  std::uint64_t fallbacks_ = 0;
  std::uint64_t model_decisions_ = 0;
};

}  // namespace tiersim
