#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tiersim/cluster.hpp"
#include "tiersim/types.hpp"

namespace tiersim {

// Start/stop fractions for the proactive downgrade process.
struct PolicyThresholds {
  double start_downgrade_frac = 0.90;
  double stop_downgrade_frac = 0.85;

  void validate() const {
    if (!(0.0 < stop_downgrade_frac && stop_downgrade_frac < start_downgrade_frac &&
          start_downgrade_frac <= 1.0))
      throw SimError(ErrorCode::ConfigError,
                     "thresholds must satisfy 0 < stop < start <= 1");
  }
};

// One iteration of a downgrade/upgrade process, for inspection and logs.
struct PolicyDecision {
  bool start = false;
  std::optional<FileId> selected_file;
  std::optional<TierKind> target_tier;
  bool stop = false;
};

struct MoveRecord {
  FileId file = -1;
  Placement from;
  Placement to;
};

// Victim selection for the downgrade process. Policies also receive one
// callback per simulator event so they can keep private per-file state.
class DowngradePolicy {
 public:
  virtual ~DowngradePolicy() = default;
  virtual std::string name() const = 0;

  virtual void on_create(const FileMeta& meta, Seconds now) {}
  virtual void on_access(const FileMeta& meta, Seconds now) {}
  virtual void on_delete(FileId file) {}
  virtual void on_tick(Seconds now) {}

  // candidates is non-empty and ascending by file id.
  virtual FileId select_victim(TierKind tier, const std::vector<FileId>& candidates,
                               Seconds now) = 0;
};

class UpgradePolicy {
 public:
  virtual ~UpgradePolicy() = default;
  virtual std::string name() const = 0;

  virtual void on_create(const FileMeta& meta, Seconds now) {}
  virtual void on_access(const FileMeta& meta, Seconds now) {}
  virtual void on_delete(FileId file) {}
  virtual void on_tick(Seconds now) {}

  struct TargetProbe {
    Placement dest;   // memory instance the manager would use
    Bytes headroom;   // free bytes there right now
  };
  using Prober = std::function<std::optional<TargetProbe>(FileId)>;

  // Ordered upgrade intents for one invocation of the upgrade process.
  // `accessed` is absent on periodic invocations.
  virtual std::vector<FileId> plan_upgrades(std::optional<FileId> accessed, Seconds now,
                                            const Prober& probe) = 0;
};

// Drives the downgrade/upgrade processes against the simulator and fans out
// simulator events to the policies (exactly once per event, in event order).
class ReplicationManager : public ClusterObserver {
 public:
  ReplicationManager(Cluster& cluster, PolicyThresholds thresholds,
                     std::unique_ptr<DowngradePolicy> down, std::unique_ptr<UpgradePolicy> up)
      : cluster_(cluster),
        thresholds_(thresholds),
        down_(std::move(down)),
        up_(std::move(up)) {
    thresholds_.validate();
    cluster_.set_observer(this);
  }

  void set_logger(std::function<void(const std::string&)> log) { logger_ = std::move(log); }

  DowngradePolicy* downgrade_policy() { return down_.get(); }
  UpgradePolicy* upgrade_policy() { return up_.get(); }

  const std::vector<MoveRecord>& downgrade_moves() const { return downgrade_moves_; }
  const std::vector<MoveRecord>& upgrade_moves() const { return upgrade_moves_; }
  const std::vector<PolicyDecision>& last_decisions() const { return last_decisions_; }
  std::uint64_t exhausted_downgrades() const { return exhausted_downgrades_; }
  std::uint64_t skipped_upgrades() const { return skipped_upgrades_; }

  // ClusterObserver. Data additions queue a downgrade check on the receiving
  // tiers; upgrades run on access before the read completes (the move is
  // piggybacked on the read, so the triggering access is still served from
  // the pre-upgrade placement).
  void on_create(const FileMeta& meta) override {
    Seconds now = meta.created_at;
    if (down_) down_->on_create(meta, now);
    if (up_) up_->on_create(meta, now);
    for (const Placement& p : cluster_.placements(meta.file_id)) pending_.insert(p.tier);
    drain(now);
  }

  void on_access(const FileMeta& meta, Seconds now) override {
    if (down_) down_->on_access(meta, now);
    if (up_) up_->on_access(meta, now);
    run_upgrade(meta.file_id, now);
    drain(now);
  }

  void on_delete(FileId file) override {
    if (down_) down_->on_delete(file);
    if (up_) up_->on_delete(file);
  }

  // Periodic invocation (configurable cadence). Policies get a tick for
  // their own bookkeeping; the upgrade process runs with no accessed file.
  void periodic_tick(Seconds now) {
    if (down_) down_->on_tick(now);
    if (up_) up_->on_tick(now);
    run_upgrade(std::nullopt, now);
    drain(now);
  }

  // Downgrade process for one tier. Returns the executed moves in order;
  // replica deletions (no feasible lower tier) do not appear in the list.
  std::vector<MoveRecord> run_downgrade(TierKind tier, Seconds now) {
    std::vector<MoveRecord> moves;
    if (!down_ || downgrade_running_[static_cast<int>(tier)]) return moves;
    if (!(cluster_.tier_usage(tier) > thresholds_.start_downgrade_frac)) return moves;
    downgrade_running_[static_cast<int>(tier)] = true;
    last_decisions_.clear();

    std::set<FileId> exempt;
    for (;;) {
      PolicyDecision d;
      d.start = true;
      std::vector<FileId> candidates;
      for (FileId f : cluster_.files_on_tier(tier))
        if (!exempt.count(f)) candidates.push_back(f);
      if (candidates.empty()) {
        ++exhausted_downgrades_;
        log("downgrade: candidate set exhausted on " + std::string(tier_name(tier)));
        last_decisions_.push_back(d);
        break;
      }
      FileId victim = down_->select_victim(tier, candidates, now);
      d.selected_file = victim;

      Placement source = source_placement(victim, tier);
      std::optional<Placement> target = select_target_tier(victim, Direction::Down, source);
      if (target) {
        d.target_tier = target->tier;
        cluster_.move_replica(victim, source, *target, now);
        moves.push_back({victim, source, *target});
        downgrade_moves_.push_back(moves.back());
        pending_.insert(target->tier);
      } else if (cluster_.placements(victim).size() >= 2) {
        cluster_.delete_replica(victim, source, now);
      } else {
        // Last copy with nowhere to go: exempt it from this activation.
        exempt.insert(victim);
        log("downgrade: file " + std::to_string(victim) + " exempt (single replica)");
        last_decisions_.push_back(d);
        continue;
      }
      d.stop = cluster_.tier_usage(tier) <= thresholds_.stop_downgrade_frac;
      last_decisions_.push_back(d);
      if (d.stop) break;
    }
    downgrade_running_[static_cast<int>(tier)] = false;
    return moves;
  }

  // Upgrade process. When a planned upgrade does not fit its destination,
  // a downgrade on the destination tier is attempted first.
  std::vector<MoveRecord> run_upgrade(std::optional<FileId> accessed, Seconds now) {
    std::vector<MoveRecord> moves;
    if (!up_ || upgrade_running_) return moves;
    upgrade_running_ = true;

    auto probe = [this](FileId f) -> std::optional<UpgradePolicy::TargetProbe> {
      if (!cluster_.exists(f) || cluster_.has_placement_on_tier(f, TierKind::Memory))
        return std::nullopt;
      Placement src = upgrade_source(f);
      std::optional<Placement> dest = select_target_tier(f, Direction::Up, src);
      if (!dest) return std::nullopt;
      return UpgradePolicy::TargetProbe{*dest, cluster_.tier_free_bytes(dest->node, dest->tier)};
    };

    std::vector<FileId> planned = up_->plan_upgrades(accessed, now, probe);
    for (FileId f : planned) {
      if (!cluster_.exists(f) || cluster_.has_placement_on_tier(f, TierKind::Memory)) continue;
      Placement src = upgrade_source(f);
      std::optional<Placement> dest = select_target_tier(f, Direction::Up, src);
      if (!dest) {
        ++skipped_upgrades_;
        continue;
      }
      Bytes size = cluster_.meta(f).size;
      if (cluster_.tier_free_bytes(dest->node, dest->tier) < size) {
        run_downgrade(dest->tier, now);
        dest = select_target_tier(f, Direction::Up, src);
        if (!dest || cluster_.tier_free_bytes(dest->node, dest->tier) < size) {
          ++skipped_upgrades_;
          log("upgrade: no room in memory for file " + std::to_string(f));
          continue;
        }
      }
      cluster_.move_replica(f, src, *dest, now);
      moves.push_back({f, src, *dest});
      upgrade_moves_.push_back(moves.back());
      pending_.insert(dest->tier);
    }
    upgrade_running_ = false;
    return moves;
  }

  enum class Direction { Up, Down };

  // Placement heuristic standing in for a multi-objective placer: downgrades
  // go to the adjacent lower tier, upgrades to memory, on the eligible node
  // with the most free bytes (ties to the lowest node id). Eligible nodes are
  // those not holding the file, plus the source replica's own node.
  std::optional<Placement> select_target_tier(FileId file, Direction dir, Placement source) const {
    TierKind target_tier;
    if (dir == Direction::Down) {
      if (!tier_below(source.tier, target_tier)) return std::nullopt;
    } else {
      target_tier = TierKind::Memory;
    }
    Bytes size = cluster_.meta(file).size;
    std::set<NodeId> holding;
    for (const Placement& p : cluster_.placements(file)) holding.insert(p.node);

    NodeId pick = -1;
    Bytes best_free = 0;
    for (int n = 0; n < cluster_.node_count(); ++n) {
      if (holding.count(n) && n != source.node) continue;
      Bytes f = cluster_.tier_free_bytes(n, target_tier);
      if (dir == Direction::Down && f < size) continue;
      if (pick < 0 || f > best_free) {
        pick = n;
        best_free = f;
      }
    }
    if (pick < 0) return std::nullopt;
    return Placement{pick, target_tier};
  }

 private:
  // The replica that leaves `tier` when a file is downgraded: the instance on
  // the fullest node (ties to the lowest node id).
  Placement source_placement(FileId file, TierKind tier) const {
    Placement best{-1, tier};
    Bytes best_free = 0;
    for (const Placement& p : cluster_.placements(file)) {
      if (p.tier != tier) continue;
      Bytes f = cluster_.tier_free_bytes(p.node, p.tier);
      if (best.node < 0 || f < best_free) {
        best = p;
        best_free = f;
      }
    }
    if (best.node < 0)
      throw SimError(ErrorCode::InvalidMove,
                     "file has no replica on " + std::string(tier_name(tier)));
    return best;
  }

  // Upgrades move the file's lowest-tier replica (lowest node id on ties).
  Placement upgrade_source(FileId file) const {
    const auto& ps = cluster_.placements(file);
    Placement worst = ps.front();
    for (const Placement& p : ps)
      if (tier_higher(worst.tier, p.tier)) worst = p;
    return worst;
  }

  void drain(Seconds now) {
    while (!pending_.empty()) {
      TierKind tier = *pending_.begin();
      pending_.erase(pending_.begin());
      run_downgrade(tier, now);
    }
  }

  void log(const std::string& msg) {
    if (logger_) logger_(msg);
  }

  Cluster& cluster_;
  PolicyThresholds thresholds_;
  std::unique_ptr<DowngradePolicy> down_;
  std::unique_ptr<UpgradePolicy> up_;
  std::set<TierKind> pending_;
  bool downgrade_running_[kTierCount] = {false, false, false};
  bool upgrade_running_ = false;
  std::vector<MoveRecord> downgrade_moves_;
  std::vector<MoveRecord> upgrade_moves_;
  std::vector<PolicyDecision> last_decisions_;
  std::uint64_t exhausted_downgrades_ = 0;
  std::uint64_t skipped_upgrades_ = 0;
  std::function<void(const std::string&)> logger_;
};

}  // namespace tiersim
