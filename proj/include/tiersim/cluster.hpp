#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tiersim/config.hpp"
#include "tiersim/types.hpp"

namespace tiersim {

// Receives one callback per simulator event, in event order.
class ClusterObserver {
 public:
  virtual ~ClusterObserver() = default;
  virtual void on_create(const FileMeta& meta) {}
  virtual void on_access(const FileMeta& meta, Seconds now) {}
  virtual void on_delete(FileId file) {}
};

struct ReadResult {
  Placement serving;
  Seconds service_time = 0.0;
  TierKind best_tier = TierKind::Hdd;  // highest tier holding the file at access time
};

// Byte totals for replica movement, kept per destination tier. Moves complete
// instantaneously in simulated time; this ledger is what policies are
// compared on for movement cost.
struct MoveLedger {
  Bytes moved_in[kTierCount] = {0, 0, 0};
  Bytes moved_out[kTierCount] = {0, 0, 0};
  Bytes upgraded_in[kTierCount] = {0, 0, 0};    // moves that raised the replica's tier
  Bytes downgraded_in[kTierCount] = {0, 0, 0};  // moves that lowered it
  std::uint64_t move_count = 0;
  std::uint64_t replica_deletes = 0;
};

// Deterministic in-process model of a cluster of nodes with memory/SSD/HDD
// tiers. Files are placed whole (all-or-nothing); every mutation keeps the
// byte ledger and placement map consistent.
class Cluster {
 public:
  explicit Cluster(const ClusterConfig& cfg)
      : cfg_(cfg), serve_rng_(cfg.seed ^ 0x5eedf00dULL) {
    nodes_.resize(cfg.node_count);
    for (int i = 0; i < cfg.node_count; ++i) {
      nodes_[i].node_id = i;
      for (int t = 0; t < kTierCount; ++t) {
        nodes_[i].tiers[t].capacity = cfg.tiers[t].capacity;
        nodes_[i].tiers[t].read_bw = cfg.tiers[t].read_bw;
        nodes_[i].tiers[t].write_bw = cfg.tiers[t].write_bw;
      }
    }
  }

  const ClusterConfig& config() const { return cfg_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  const Node& node(NodeId id) const { return nodes_.at(id); }

  void set_observer(ClusterObserver* obs) { observer_ = obs; }
  void enable_event_log(bool on) { log_enabled_ = on; }
  const std::vector<std::string>& event_log() const { return event_log_; }
  const MoveLedger& ledger() const { return ledger_; }

  bool exists(FileId id) const { return files_.count(id) > 0; }

  const FileMeta& meta(FileId id) const { return entry(id).meta; }

  const std::vector<Placement>& placements(FileId id) const { return entry(id).placements; }

  std::size_t file_count() const { return files_.size(); }

  // All live file ids, ascending.
  std::vector<FileId> all_files() const {
    std::vector<FileId> out;
    out.reserve(files_.size());
    for (const auto& [id, e] : files_) out.push_back(id);
    return out;
  }

  // Files with at least one replica on `tier`, ascending by id.
  std::vector<FileId> files_on_tier(TierKind tier) const {
    std::vector<FileId> out;
    const auto& m = tier_index_[static_cast<int>(tier)];
    out.reserve(m.size());
    for (const auto& [id, n] : m) out.push_back(id);
    return out;
  }

  bool has_placement_on_tier(FileId id, TierKind tier) const {
    for (const Placement& p : entry(id).placements)
      if (p.tier == tier) return true;
    return false;
  }

  TierKind best_tier(FileId id) const {
    const auto& ps = entry(id).placements;
    TierKind best = TierKind::Hdd;
    for (const Placement& p : ps)
      if (tier_higher(p.tier, best)) best = p.tier;
    return best;
  }

  double tier_usage(TierKind tier) const {
    Bytes used = 0, cap = 0;
    for (const Node& n : nodes_) {
      used += n.tier(tier).used;
      cap += n.tier(tier).capacity;
    }
    return cap == 0 ? 0.0 : static_cast<double>(used) / static_cast<double>(cap);
  }

  Bytes tier_free_bytes(NodeId node, TierKind tier) const {
    return nodes_.at(node).tier(tier).free();
  }

  std::vector<Placement> create_file(FileId id, Bytes size, Seconds at, int replication,
                                     PlacementMode mode) {
    if (exists(id)) throw SimError(ErrorCode::DuplicateFile, "file " + std::to_string(id));
    if (replication < 1 || replication > node_count())
      throw SimError(ErrorCode::CapacityExhausted,
                     "replication " + std::to_string(replication) + " exceeds node count");

    std::vector<Placement> plan = plan_placement(size, replication, mode);

    FileEntry e;
    e.meta.file_id = id;
    e.meta.size = size;
    e.meta.created_at = at;
    e.placements = plan;
    std::sort(e.placements.begin(), e.placements.end());
    files_.emplace(id, std::move(e));
    for (const Placement& p : plan) add_usage(p, size, id);

    if (log_enabled_) {
      nlohmann::ordered_json j{{"t", at}, {"ev", "create"}, {"file", id}, {"size", size}};
      nlohmann::json ps = nlohmann::json::array();
      for (const Placement& p : files_.at(id).placements)
        ps.push_back({p.node, static_cast<int>(p.tier)});
      j["placements"] = ps;
      event_log_.push_back(j.dump());
    }
    if (observer_) observer_->on_create(files_.at(id).meta);
    return files_.at(id).placements;
  }

  // Serves a read. The serving replica and the best available tier are
  // decided from the placements at entry: replica movement triggered by the
  // access is piggybacked on the read and only benefits later reads.
  ReadResult read_file(FileId id, Seconds at, bool tier_aware) {
    FileEntry& e = mutable_entry(id);
    ReadResult r;
    r.best_tier = best_tier(id);
    r.serving = tier_aware ? best_placement(e.placements)
                           : e.placements[serve_rng_.uniform_int(e.placements.size())];
    double bw = nodes_[r.serving.node].tier(r.serving.tier).read_bw;
    r.service_time = bw > 0 ? static_cast<double>(e.meta.size) / bw : 0.0;

    e.meta.access_times.push_back(at);
    while (static_cast<int>(e.meta.access_times.size()) > cfg_.access_history_k)
      e.meta.access_times.pop_front();
    e.meta.total_access_count++;

    if (log_enabled_) {
      nlohmann::ordered_json j{{"t", at},
                               {"ev", "read"},
                               {"file", id},
                               {"node", r.serving.node},
                               {"tier", tier_name(r.serving.tier)},
                               {"service", r.service_time}};
      event_log_.push_back(j.dump());
    }
    if (observer_) observer_->on_access(e.meta, at);
    return r;
  }

  // Moves one replica atomically; byte usage is conserved. A move may land on
  // the same node (tier change) but never on a second node already holding
  // the file.
  void move_replica(FileId id, Placement from, Placement to, Seconds at) {
    FileEntry& e = mutable_entry(id);
    auto it = std::find(e.placements.begin(), e.placements.end(), from);
    if (it == e.placements.end())
      throw SimError(ErrorCode::InvalidMove, "no replica of " + std::to_string(id) + " at source");
    if (from == to) throw SimError(ErrorCode::InvalidMove, "source equals destination");
    for (const Placement& p : e.placements) {
      if (p.node == to.node && p.node != from.node)
        throw SimError(ErrorCode::InvalidMove, "destination node already holds the file");
      if (p == to) throw SimError(ErrorCode::InvalidMove, "destination already holds the file");
    }
    TierState& dst = nodes_.at(to.node).tier(to.tier);
    if (dst.free() < e.meta.size)
      throw SimError(ErrorCode::CapacityExhausted, "no room on destination tier");

    remove_usage(from, e.meta.size, id);
    add_usage(to, e.meta.size, id);
    *it = to;
    std::sort(e.placements.begin(), e.placements.end());

    ledger_.moved_in[static_cast<int>(to.tier)] += e.meta.size;
    ledger_.moved_out[static_cast<int>(from.tier)] += e.meta.size;
    if (tier_higher(to.tier, from.tier))
      ledger_.upgraded_in[static_cast<int>(to.tier)] += e.meta.size;
    else if (tier_higher(from.tier, to.tier))
      ledger_.downgraded_in[static_cast<int>(to.tier)] += e.meta.size;
    ledger_.move_count++;

    if (log_enabled_) {
      nlohmann::ordered_json j{{"t", at},       {"ev", "move"},
                               {"file", id},    {"from", {from.node, static_cast<int>(from.tier)}},
                               {"to", {to.node, static_cast<int>(to.tier)}}};
      event_log_.push_back(j.dump());
    }
  }

  // Removes one replica. The last copy of a file can only go away through
  // delete_file.
  void delete_replica(FileId id, Placement p, Seconds at) {
    FileEntry& e = mutable_entry(id);
    if (e.placements.size() < 2)
      throw SimError(ErrorCode::LastReplica, "file " + std::to_string(id));
    erase_placement(e, p, id, at);
  }

  // Full deletion: removes every replica and the metadata.
  void delete_file(FileId id, Seconds at) {
    FileEntry& e = mutable_entry(id);
    for (const Placement& p : e.placements) remove_usage(p, e.meta.size, id);
    if (log_enabled_) {
      nlohmann::ordered_json j{{"t", at}, {"ev", "delete"}, {"file", id}};
      event_log_.push_back(j.dump());
    }
    files_.erase(id);
    if (observer_) observer_->on_delete(id);
  }

  // Test hook: recomputes tier usage from the placement map and checks it
  // against the incremental ledger. Returns false on any mismatch.
  bool check_conservation() const {
    std::map<std::pair<NodeId, int>, Bytes> expect;
    for (const auto& [id, e] : files_)
      for (const Placement& p : e.placements)
        expect[{p.node, static_cast<int>(p.tier)}] += e.meta.size;
    for (const Node& n : nodes_) {
      for (int t = 0; t < kTierCount; ++t) {
        Bytes want = 0;
        auto it = expect.find({n.node_id, t});
        if (it != expect.end()) want = it->second;
        if (n.tiers[t].used != want) return false;
        if (n.tiers[t].used > n.tiers[t].capacity) return false;
      }
    }
    return true;
  }

 private:
  struct FileEntry {
    FileMeta meta;
    std::vector<Placement> placements;  // sorted, distinct nodes
  };

  const FileEntry& entry(FileId id) const {
    auto it = files_.find(id);
    if (it == files_.end()) throw SimError(ErrorCode::UnknownFile, std::to_string(id));
    return it->second;
  }

  FileEntry& mutable_entry(FileId id) {
    auto it = files_.find(id);
    if (it == files_.end()) throw SimError(ErrorCode::UnknownFile, std::to_string(id));
    return it->second;
  }

  static Placement best_placement(const std::vector<Placement>& ps) {
    Placement best = ps.front();
    for (const Placement& p : ps)
      if (tier_higher(p.tier, best.tier) || (p.tier == best.tier && p.node < best.node))
        best = p;
    return best;
  }

  void add_usage(Placement p, Bytes size, FileId id) {
    TierState& ts = nodes_.at(p.node).tier(p.tier);
    ts.used += size;
    tier_index_[static_cast<int>(p.tier)][id]++;
  }

  void remove_usage(Placement p, Bytes size, FileId id) {
    TierState& ts = nodes_.at(p.node).tier(p.tier);
    ts.used -= size;
    auto& m = tier_index_[static_cast<int>(p.tier)];
    auto it = m.find(id);
    if (it != m.end() && --it->second == 0) m.erase(it);
  }

  void erase_placement(FileEntry& e, Placement p, FileId id, Seconds at) {
    auto it = std::find(e.placements.begin(), e.placements.end(), p);
    if (it == e.placements.end())
      throw SimError(ErrorCode::InvalidMove, "no such replica of " + std::to_string(id));
    remove_usage(p, e.meta.size, id);
    e.placements.erase(it);
    ledger_.replica_deletes++;
    if (log_enabled_) {
      nlohmann::ordered_json j{{"t", at},
                               {"ev", "drop_replica"},
                               {"file", id},
                               {"at", {p.node, static_cast<int>(p.tier)}}};
      event_log_.push_back(j.dump());
    }
  }

  // Greedy plan over a scratch copy of free bytes: for each replica, target
  // the mode's tier and degrade toward HDD until some unused node fits it.
  std::vector<Placement> plan_placement(Bytes size, int replication, PlacementMode mode) {
    std::vector<Bytes> free(nodes_.size() * kTierCount);
    for (size_t n = 0; n < nodes_.size(); ++n)
      for (int t = 0; t < kTierCount; ++t) free[n * kTierCount + t] = nodes_[n].tiers[t].free();

    std::vector<bool> used_node(nodes_.size(), false);
    std::vector<Placement> plan;
    for (int r = 0; r < replication; ++r) {
      TierKind target = TierKind::Hdd;
      if (mode == PlacementMode::StaticTiered && r < kTierCount)
        target = static_cast<TierKind>(r);
      bool placed = false;
      for (int t = static_cast<int>(target); t < kTierCount && !placed; ++t) {
        NodeId pick = -1;
        Bytes best_free = 0;
        for (size_t n = 0; n < nodes_.size(); ++n) {
          if (used_node[n]) continue;
          Bytes f = free[n * kTierCount + t];
          if (f >= size && (pick < 0 || f > best_free)) {
            pick = static_cast<NodeId>(n);
            best_free = f;
          }
        }
        if (pick >= 0) {
          plan.push_back(Placement{pick, static_cast<TierKind>(t)});
          used_node[pick] = true;
          free[pick * kTierCount + t] -= size;
          placed = true;
        }
      }
      if (!placed)
        throw SimError(ErrorCode::CapacityExhausted,
                       "no feasible placement for replica " + std::to_string(r + 1));
    }
    return plan;
  }

  ClusterConfig cfg_;
  std::vector<Node> nodes_;
  std::map<FileId, FileEntry> files_;
  std::map<FileId, int> tier_index_[kTierCount];
  ClusterObserver* observer_ = nullptr;
  MoveLedger ledger_;
  bool log_enabled_ = false;
  std::vector<std::string> event_log_;
  Rng serve_rng_;
};

}  // namespace tiersim
