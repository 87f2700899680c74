#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace tiersim {

using FileId = std::int64_t;
using NodeId = std::int32_t;
using Bytes = std::uint64_t;
using Seconds = double;

inline constexpr Bytes kMiB = 1024ULL * 1024ULL;
inline constexpr Bytes kGiB = 1024ULL * kMiB;

// Storage tiers ordered fastest to slowest. "Higher tier" always means
// toward Memory, so a smaller enum value is a higher tier.
enum class TierKind : int { Memory = 0, Ssd = 1, Hdd = 2 };

inline constexpr int kTierCount = 3;

inline constexpr TierKind kAllTiers[kTierCount] = {TierKind::Memory, TierKind::Ssd,
                                                   TierKind::Hdd};

inline bool tier_higher(TierKind a, TierKind b) {
  return static_cast<int>(a) < static_cast<int>(b);
}

inline const char* tier_name(TierKind t) {
  switch (t) {
    case TierKind::Memory: return "memory";
    case TierKind::Ssd: return "ssd";
    case TierKind::Hdd: return "hdd";
  }
  return "?";
}

// Tier one step toward Hdd, or nullopt-like sentinel via bool return.
inline bool tier_below(TierKind t, TierKind& out) {
  if (t == TierKind::Hdd) return false;
  out = static_cast<TierKind>(static_cast<int>(t) + 1);
  return true;
}

struct Placement {
  NodeId node = -1;
  TierKind tier = TierKind::Hdd;

  friend bool operator==(const Placement& a, const Placement& b) {
    return a.node == b.node && a.tier == b.tier;
  }
  friend bool operator<(const Placement& a, const Placement& b) {
    if (a.node != b.node) return a.node < b.node;
    return static_cast<int>(a.tier) < static_cast<int>(b.tier);
  }
};

struct TierState {
  Bytes capacity = 0;
  Bytes used = 0;
  double read_bw = 0.0;   // bytes/second
  double write_bw = 0.0;  // bytes/second

  Bytes free() const { return capacity - used; }
};

struct Node {
  NodeId node_id = -1;
  TierState tiers[kTierCount];

  TierState& tier(TierKind t) { return tiers[static_cast<int>(t)]; }
  const TierState& tier(TierKind t) const { return tiers[static_cast<int>(t)]; }
};

// Per-file metadata. access_times keeps the last `k` access timestamps
// (configured on the cluster); total_access_count is unbounded.
struct FileMeta {
  FileId file_id = -1;
  Bytes size = 0;
  Seconds created_at = 0.0;
  std::deque<Seconds> access_times;
  std::uint64_t total_access_count = 0;

  // Recency of a never-accessed file is its creation time.
  Seconds last_activity() const {
    return access_times.empty() ? created_at : access_times.back();
  }
};

enum class ErrorCode {
  DuplicateFile,
  UnknownFile,
  CapacityExhausted,
  InvalidMove,
  LastReplica,
  EmptyCandidates,
  InvalidReference,
  FutureWindow,
  TooYoung,
  EmptyDataset,
  WidthMismatch,
  SingleClass,
  NotWarm,
  SpecInvalid,
  MalformedTrace,
  ParseError,
  EmptyRecords,
  DivisionDomain,
  BinMismatch,
  ConfigError,
};

inline const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::DuplicateFile: return "DuplicateFile";
    case ErrorCode::UnknownFile: return "UnknownFile";
    case ErrorCode::CapacityExhausted: return "CapacityExhausted";
    case ErrorCode::InvalidMove: return "InvalidMove";
    case ErrorCode::LastReplica: return "LastReplica";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::InvalidReference: return "InvalidReference";
    case ErrorCode::FutureWindow: return "FutureWindow";
    case ErrorCode::TooYoung: return "TooYoung";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NotWarm: return "NotWarm";
    case ErrorCode::SpecInvalid: return "SpecInvalid";
    case ErrorCode::MalformedTrace: return "MalformedTrace";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyRecords: return "EmptyRecords";
    case ErrorCode::DivisionDomain: return "DivisionDomain";
    case ErrorCode::BinMismatch: return "BinMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "?";
}

class SimError : public std::runtime_error {
 public:
  SimError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Deterministic event queue: ties on time are broken by insertion sequence.
class SimClock {
 public:
  using Action = std::function<void(Seconds)>;

  Seconds now() const { return now_; }

  void schedule(Seconds at, Action action) {
    entries_.push(Entry{at, next_seq_++, std::move(action)});
  }

  bool empty() const { return entries_.empty(); }

  Seconds next_time() const { return entries_.top().at; }

  // Pops and runs the next action, advancing the clock. Time never decreases.
  void step() {
    Entry e = entries_.top();
    entries_.pop();
    if (e.at > now_) now_ = e.at;
    e.action(now_);
  }

 private:
  struct Entry {
    Seconds at;
    std::uint64_t seq;
    Action action;

    friend bool operator>(const Entry& a, const Entry& b) {
      if (a.at != b.at) return a.at > b.at;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> entries_;
  std::uint64_t next_seq_ = 0;
  Seconds now_ = 0.0;
};

// Deterministic RNG helpers. std::mt19937_64 with explicit draw logic so the
// generated streams do not depend on library-specific distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    return n == 0 ? 0 : next_u64() % n;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Derive an independent stream for a named purpose.
  Rng fork(std::uint64_t stream_id) {
    return Rng(state_ ^ (0xa0761d6478bd642fULL * (stream_id + 1)));
  }

 private:
  std::uint64_t state_;
};

}  // namespace tiersim
