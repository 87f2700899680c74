#pragma once

#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "tiersim/policy.hpp"

namespace tiersim {

// Recency/frequency weight updates. Both are applied on access only; weights
// are not decayed between accesses.
inline double lrfu_updated_weight(double w_old, Seconds gap, Seconds half_life) {
  return 1.0 + (half_life * w_old) / (gap + half_life);
}

inline double exd_updated_weight(double w_old, Seconds gap, double alpha) {
  return 1.0 + w_old * std::exp(-alpha * gap);
}

constexpr Seconds kDefaultLrfuHalfLife = 6.0 * 3600.0;
constexpr double kDefaultExdAlpha = 1.16e-8;  // 1/seconds
constexpr double kDefaultLrfuUpgradeThreshold = 3.0;

struct AgePartitionConfig {
  Seconds old_window = 9.0 * 3600.0;  // files idle at least this long are "old"
};

// Per-file weight state shared by the LRFU and EXD policies.
class WeightTable {
 public:
  struct Entry {
    double weight = 1.0;
    Seconds last_access = 0.0;
  };

  void on_create(const FileMeta& meta) {
    table_[meta.file_id] = Entry{1.0, meta.created_at};
  }

  template <typename UpdateFn>
  double on_access(const FileMeta& meta, Seconds now, UpdateFn&& update) {
    Entry& e = entry(meta);
    e.weight = update(e.weight, now - e.last_access);
    e.last_access = now;
    return e.weight;
  }

  void on_delete(FileId id) { table_.erase(id); }

  double weight(const FileMeta& meta) const {
    auto it = table_.find(meta.file_id);
    return it == table_.end() ? 1.0 : it->second.weight;
  }

 private:
  Entry& entry(const FileMeta& meta) {
    auto it = table_.find(meta.file_id);
    if (it == table_.end())
      it = table_.emplace(meta.file_id, Entry{1.0, meta.created_at}).first;
    return it->second;
  }

  std::map<FileId, Entry> table_;
};

// Candidate scans. Candidates arrive ascending by file id, so keeping the
// first strict minimum yields the lowest-id tie-break everywhere.

class LruDowngrade : public DowngradePolicy {
 public:
  explicit LruDowngrade(const Cluster& cluster) : cluster_(cluster) {}
  std::string name() const override { return "lru"; }

  FileId select_victim(TierKind, const std::vector<FileId>& candidates, Seconds) override {
    if (candidates.empty()) throw SimError(ErrorCode::EmptyCandidates, name());
    FileId best = candidates.front();
    Seconds best_t = cluster_.meta(best).last_activity();
    for (FileId f : candidates) {
      Seconds t = cluster_.meta(f).last_activity();
      if (t < best_t) {
        best = f;
        best_t = t;
      }
    }
    return best;
  }

 private:
  const Cluster& cluster_;
};

class LfuDowngrade : public DowngradePolicy {
 public:
  explicit LfuDowngrade(const Cluster& cluster) : cluster_(cluster) {}
  std::string name() const override { return "lfu"; }

  FileId select_victim(TierKind, const std::vector<FileId>& candidates, Seconds) override {
    if (candidates.empty()) throw SimError(ErrorCode::EmptyCandidates, name());
    return least_frequently_used(cluster_, candidates);
  }

  static FileId least_frequently_used(const Cluster& cluster,
                                      const std::vector<FileId>& candidates) {
    FileId best = candidates.front();
    std::uint64_t best_n = cluster.meta(best).total_access_count;
    for (FileId f : candidates) {
      std::uint64_t n = cluster.meta(f).total_access_count;
      if (n < best_n) {
        best = f;
        best_n = n;
      }
    }
    return best;
  }

 private:
  const Cluster& cluster_;
};

class LrfuDowngrade : public DowngradePolicy {
 public:
  LrfuDowngrade(const Cluster& cluster, Seconds half_life = kDefaultLrfuHalfLife)
      : cluster_(cluster), half_life_(half_life) {}
  std::string name() const override { return "lrfu"; }

  void on_create(const FileMeta& meta, Seconds) override { weights_.on_create(meta); }
  void on_access(const FileMeta& meta, Seconds now) override {
    weights_.on_access(meta, now,
                       [this](double w, Seconds gap) { return lrfu_updated_weight(w, gap, half_life_); });
  }
  void on_delete(FileId id) override { weights_.on_delete(id); }

  double weight(const FileMeta& meta) const { return weights_.weight(meta); }

  FileId select_victim(TierKind, const std::vector<FileId>& candidates, Seconds) override {
    if (candidates.empty()) throw SimError(ErrorCode::EmptyCandidates, name());
    FileId best = candidates.front();
    double best_w = weights_.weight(cluster_.meta(best));
    for (FileId f : candidates) {
      double w = weights_.weight(cluster_.meta(f));
      if (w < best_w) {
        best = f;
        best_w = w;
      }
    }
    return best;
  }

 private:
  const Cluster& cluster_;
  Seconds half_life_;
  WeightTable weights_;
};

class ExdDowngrade : public DowngradePolicy {
 public:
  ExdDowngrade(const Cluster& cluster, double alpha = kDefaultExdAlpha)
      : cluster_(cluster), alpha_(alpha) {}
  std::string name() const override { return "exd"; }

  void on_create(const FileMeta& meta, Seconds) override { weights_.on_create(meta); }
  void on_access(const FileMeta& meta, Seconds now) override {
    weights_.on_access(meta, now,
                       [this](double w, Seconds gap) { return exd_updated_weight(w, gap, alpha_); });
  }
  void on_delete(FileId id) override { weights_.on_delete(id); }

  double weight(const FileMeta& meta) const { return weights_.weight(meta); }

  FileId select_victim(TierKind, const std::vector<FileId>& candidates, Seconds) override {
    if (candidates.empty()) throw SimError(ErrorCode::EmptyCandidates, name());
    FileId best = candidates.front();
    double best_w = weights_.weight(cluster_.meta(best));
    for (FileId f : candidates) {
      double w = weights_.weight(cluster_.meta(f));
      if (w < best_w) {
        best = f;
        best_w = w;
      }
    }
    return best;
  }

 private:
  const Cluster& cluster_;
  double alpha_;
  WeightTable weights_;
};

// Shared partition step for LIFE and LFU-F. A file is "old" when its last
// activity (access, or creation if never accessed) is at least old_window ago.
inline std::vector<FileId> old_partition(const Cluster& cluster,
                                         const std::vector<FileId>& candidates, Seconds now,
                                         Seconds old_window) {
  std::vector<FileId> old;
  for (FileId f : candidates)
    if (now - cluster.meta(f).last_activity() >= old_window) old.push_back(f);
  return old;
}

class LifeDowngrade : public DowngradePolicy {
 public:
  LifeDowngrade(const Cluster& cluster, AgePartitionConfig cfg = {})
      : cluster_(cluster), cfg_(cfg) {}
  std::string name() const override { return "life"; }

  FileId select_victim(TierKind, const std::vector<FileId>& candidates, Seconds now) override {
    if (candidates.empty()) throw SimError(ErrorCode::EmptyCandidates, name());
    std::vector<FileId> old = old_partition(cluster_, candidates, now, cfg_.old_window);
    if (!old.empty()) return LfuDowngrade::least_frequently_used(cluster_, old);
    // All files are recent: evict the largest one.
    FileId best = candidates.front();
    Bytes best_size = cluster_.meta(best).size;
    for (FileId f : candidates) {
      Bytes s = cluster_.meta(f).size;
      if (s > best_size) {
        best = f;
        best_size = s;
      }
    }
    return best;
  }

 private:
  const Cluster& cluster_;
  AgePartitionConfig cfg_;
};

class LfuFDowngrade : public DowngradePolicy {
 public:
  LfuFDowngrade(const Cluster& cluster, AgePartitionConfig cfg = {})
      : cluster_(cluster), cfg_(cfg) {}
  std::string name() const override { return "lfu-f"; }

  FileId select_victim(TierKind, const std::vector<FileId>& candidates, Seconds now) override {
    if (candidates.empty()) throw SimError(ErrorCode::EmptyCandidates, name());
    std::vector<FileId> old = old_partition(cluster_, candidates, now, cfg_.old_window);
    const std::vector<FileId>& pool = old.empty() ? candidates : old;
    return LfuDowngrade::least_frequently_used(cluster_, pool);
  }

 private:
  const Cluster& cluster_;
  AgePartitionConfig cfg_;
};

// Upgrade admission rules, separated from the policy objects for direct
// testing.
inline bool osa_should_upgrade(bool has_memory_placement) { return !has_memory_placement; }

inline bool lrfu_should_upgrade(double weight, double threshold = kDefaultLrfuUpgradeThreshold) {
  return weight > threshold;  // strict: ties do not upgrade
}

inline bool exd_should_upgrade(Bytes size, double weight, Bytes headroom,
                               const std::vector<std::pair<FileId, double>>& eviction_preview) {
  if (size <= headroom) return true;
  double sum = 0.0;
  for (const auto& [id, w] : eviction_preview) sum += w;
  return weight > sum;
}

// Upgrade a file into memory upon access, if not already there.
class OsaUpgrade : public UpgradePolicy {
 public:
  explicit OsaUpgrade(const Cluster& cluster) : cluster_(cluster) {}
  std::string name() const override { return "osa"; }

  std::vector<FileId> plan_upgrades(std::optional<FileId> accessed, Seconds,
                                    const Prober&) override {
    if (!accessed || !cluster_.exists(*accessed)) return {};
    if (!osa_should_upgrade(cluster_.has_placement_on_tier(*accessed, TierKind::Memory)))
      return {};
    return {*accessed};
  }

 private:
  const Cluster& cluster_;
};

class LrfuUpgrade : public UpgradePolicy {
 public:
  LrfuUpgrade(const Cluster& cluster, Seconds half_life = kDefaultLrfuHalfLife,
              double threshold = kDefaultLrfuUpgradeThreshold)
      : cluster_(cluster), half_life_(half_life), threshold_(threshold) {}
  std::string name() const override { return "lrfu"; }

  void on_create(const FileMeta& meta, Seconds) override { weights_.on_create(meta); }
  void on_access(const FileMeta& meta, Seconds now) override {
    weights_.on_access(meta, now,
                       [this](double w, Seconds gap) { return lrfu_updated_weight(w, gap, half_life_); });
  }
  void on_delete(FileId id) override { weights_.on_delete(id); }

  std::vector<FileId> plan_upgrades(std::optional<FileId> accessed, Seconds,
                                    const Prober&) override {
    if (!accessed || !cluster_.exists(*accessed)) return {};
    if (cluster_.has_placement_on_tier(*accessed, TierKind::Memory)) return {};
    if (!lrfu_should_upgrade(weights_.weight(cluster_.meta(*accessed)), threshold_)) return {};
    return {*accessed};
  }

 private:
  const Cluster& cluster_;
  Seconds half_life_;
  double threshold_;
  WeightTable weights_;
};

// Admit the accessed file when it fits the destination outright, or when its
// weight beats the combined weight of the files that would have to leave to
// make room for it.
class ExdUpgrade : public UpgradePolicy {
 public:
  ExdUpgrade(const Cluster& cluster, double alpha = kDefaultExdAlpha)
      : cluster_(cluster), alpha_(alpha) {}
  std::string name() const override { return "exd"; }

  void on_create(const FileMeta& meta, Seconds) override { weights_.on_create(meta); }
  void on_access(const FileMeta& meta, Seconds now) override {
    weights_.on_access(meta, now,
                       [this](double w, Seconds gap) { return exd_updated_weight(w, gap, alpha_); });
  }
  void on_delete(FileId id) override { weights_.on_delete(id); }

  double weight(const FileMeta& meta) const { return weights_.weight(meta); }

  std::vector<FileId> plan_upgrades(std::optional<FileId> accessed, Seconds,
                                    const Prober& probe) override {
    if (!accessed || !cluster_.exists(*accessed)) return {};
    std::optional<TargetProbe> target = probe(*accessed);
    if (!target) return {};
    const FileMeta& meta = cluster_.meta(*accessed);
    std::vector<std::pair<FileId, double>> preview =
        eviction_preview(target->dest.node, meta.size, target->headroom);
    if (meta.size > target->headroom && preview.empty()) return {};  // room cannot be made
    if (!exd_should_upgrade(meta.size, weights_.weight(meta), target->headroom, preview))
      return {};
    return {*accessed};
  }

  // Files on the destination node's memory tier, lowest weight first, up to
  // the point where enough bytes would be freed. Empty when even evicting
  // everything would not fit the file.
  std::vector<std::pair<FileId, double>> eviction_preview(NodeId node, Bytes size,
                                                          Bytes headroom) const {
    if (size <= headroom) return {};
    std::vector<std::pair<FileId, double>> on_node;
    for (FileId f : cluster_.files_on_tier(TierKind::Memory)) {
      for (const Placement& p : cluster_.placements(f)) {
        if (p.tier == TierKind::Memory && p.node == node) {
          on_node.emplace_back(f, weights_.weight(cluster_.meta(f)));
          break;
        }
      }
    }
    std::stable_sort(on_node.begin(), on_node.end(),
                     [](const auto& a, const auto& b) { return a.second < b.second; });
    Bytes freed = 0;
    std::vector<std::pair<FileId, double>> preview;
    for (const auto& fw : on_node) {
      if (headroom + freed >= size) break;
      preview.push_back(fw);
      freed += cluster_.meta(fw.first).size;
    }
    if (headroom + freed < size) return {};
    return preview;
  }

 private:
  const Cluster& cluster_;
  double alpha_;
  WeightTable weights_;
};

}  // namespace tiersim
