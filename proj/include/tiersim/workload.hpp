#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tiersim/config.hpp"
#include "tiersim/metrics.hpp"
#include "tiersim/types.hpp"

namespace tiersim {

enum class EventKind { JobStart, Create, Read, Delete };

inline const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::JobStart: return "JobStart";
    case EventKind::Create: return "Create";
    case EventKind::Read: return "Read";
    case EventKind::Delete: return "Delete";
  }
  return "?";
}

struct TraceEvent {
  Seconds t = 0.0;
  EventKind kind = EventKind::Read;
  std::int64_t job = -1;  // -1 marks warm-up traffic outside any job
  FileId file = -1;
  Bytes size = 0;      // Create only
  Seconds cpu = 0.0;   // JobStart only

  friend bool operator==(const TraceEvent& a, const TraceEvent& b) {
    return a.t == b.t && a.kind == b.kind && a.job == b.job && a.file == b.file &&
           a.size == b.size && a.cpu == b.cpu;
  }
};

struct BinSpec {
  char label = '?';
  Bytes lo = 0;  // exclusive
  Bytes hi = 0;  // inclusive
  double fraction = 0.0;
};

inline std::vector<BinSpec> bins_with_fractions(const std::array<double, kBinCount>& fractions) {
  std::vector<BinSpec> out;
  for (int b = 0; b < kBinCount; ++b) {
    const SizeBin& sb = size_bins()[b];
    out.push_back({sb.label, sb.lo, sb.hi, fractions[b]});
  }
  return out;
}

struct WorkloadSpec {
  std::string name = "custom";
  int job_count = 1000;
  Seconds duration = 6.0 * 3600.0;
  std::vector<BinSpec> bins = bins_with_fractions({0.744, 0.162, 0.040, 0.030, 0.016, 0.008});
  double popularity_zipf_s = 1.1;
  double never_reaccessed_frac = 0.23;
  std::uint64_t seed = 1;

  // Generator plumbing. A history prefix creates the input pool and replays
  // statistically matching warm-up traffic before the first job, standing in
  // for the cluster's prior life; warm-up reads carry job = -1 and are
  // excluded from job metrics.
  Seconds history_span = 12.0 * 3600.0;
  std::array<double, kBinCount> pool_per_job = {0.60, 0.35, 0.35, 0.30, 0.20, 0.20};
  double output_prob = 0.25;          // fraction of jobs that write an output file
  double history_extra_reads = 0.5;   // extra zipf warm reads per pool file
  double within_bin_skew = 3.0;       // size = lo * (hi/lo)^(u^skew), skew > 1 favors small
  double coverage_boost = 1.3;        // pacing for first reads of fresh files
  Seconds cpu_min = 10.0;
  Seconds cpu_max = 300.0;

  void validate() const {
    if (job_count < 0 || duration <= 0.0 || bins.size() != kBinCount)
      throw SimError(ErrorCode::SpecInvalid, "bad workload spec");
    double sum = 0.0;
    Bytes prev_hi = 0;
    for (const BinSpec& b : bins) {
      if (b.lo != prev_hi || b.hi <= b.lo || b.fraction < 0.0)
        throw SimError(ErrorCode::SpecInvalid, "bins must partition the size range");
      prev_hi = b.hi;
      sum += b.fraction;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw SimError(ErrorCode::SpecInvalid, "bin fractions must sum to 1");
    if (never_reaccessed_frac < 0.0 || never_reaccessed_frac >= 1.0)
      throw SimError(ErrorCode::SpecInvalid, "never_reaccessed_frac out of range");
    if (history_span < 0.0 || output_prob < 0.0 || output_prob > 1.0)
      throw SimError(ErrorCode::SpecInvalid, "bad generator parameters");
  }
};

// Presets encode the published bin fractions and reuse statistics; the zipf
// exponent is a calibrated default recorded here.
inline WorkloadSpec fb_workload() {
  WorkloadSpec s;
  s.name = "fb";
  s.job_count = 1000;
  s.bins = bins_with_fractions({0.744, 0.162, 0.040, 0.030, 0.016, 0.008});
  s.never_reaccessed_frac = 0.23;
  s.popularity_zipf_s = 1.1;
  return s;
}

inline WorkloadSpec cmu_workload() {
  WorkloadSpec s;
  s.name = "cmu";
  s.job_count = 800;
  s.bins = bins_with_fractions({0.634, 0.291, 0.009, 0.049, 0.015, 0.003});
  s.never_reaccessed_frac = 0.18;
  s.popularity_zipf_s = 1.1;
  return s;
}

inline WorkloadSpec preset_workload(const std::string& name) {
  if (name == "fb") return fb_workload();
  if (name == "cmu") return cmu_workload();
  throw SimError(ErrorCode::SpecInvalid, "unknown preset '" + name + "'");
}

inline WorkloadSpec workload_from_kv(const KeyValueConfig& kv) {
  WorkloadSpec s = kv.has("preset") ? preset_workload(kv.get_string("preset", "fb"))
                                    : WorkloadSpec{};
  s.name = kv.get_string("name", s.name);
  s.job_count = static_cast<int>(kv.get_int("job_count", s.job_count));
  s.duration = kv.get_double("duration_s", s.duration);
  s.popularity_zipf_s = kv.get_double("zipf_s", s.popularity_zipf_s);
  s.never_reaccessed_frac = kv.get_double("never_reaccessed_frac", s.never_reaccessed_frac);
  s.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(s.seed)));
  s.history_span = kv.get_double("history_span_s", s.history_span);
  s.output_prob = kv.get_double("output_prob", s.output_prob);
  s.history_extra_reads = kv.get_double("history_extra_reads", s.history_extra_reads);
  s.within_bin_skew = kv.get_double("within_bin_skew", s.within_bin_skew);
  for (int b = 0; b < kBinCount; ++b) {
    std::string key = std::string("fraction_") + size_bins()[b].label;
    s.bins[b].fraction = kv.get_double(key, s.bins[b].fraction);
    std::string pool_key = std::string("pool_per_job_") + size_bins()[b].label;
    s.pool_per_job[b] = kv.get_double(pool_key, s.pool_per_job[b]);
  }
  s.validate();
  return s;
}

namespace workload_detail {

// Zipf draw over ranked items: weight of rank r (1-based) is r^-s.
class ZipfPicker {
 public:
  explicit ZipfPicker(double s) : s_(s) {}

  void grow_to(std::size_t n) {
    while (cum_.size() < n) {
      double w = std::pow(static_cast<double>(cum_.size() + 1), -s_);
      cum_.push_back((cum_.empty() ? 0.0 : cum_.back()) + w);
    }
  }

  // index in [0, n)
  std::size_t pick(std::size_t n, Rng& rng) {
    grow_to(n);
    double u = rng.uniform01() * cum_[n - 1];
    auto it = std::lower_bound(cum_.begin(), cum_.begin() + n, u);
    return static_cast<std::size_t>(it - cum_.begin());
  }

 private:
  double s_;
  std::vector<double> cum_;
};

}  // namespace workload_detail

// Deterministic synthetic trace: a history prefix (pool creation plus warm-up
// reads), then jobs with jittered arrivals. Each job reads one input file of
// its bin, chosen either as the first read of a not-yet-read file or by zipf
// popularity over already-read files, and may create one output file.
inline std::vector<TraceEvent> generate(const WorkloadSpec& spec) {
  spec.validate();
  Rng master(spec.seed);
  Rng r_bins = master.fork(1);
  Rng r_sizes = master.fork(2);
  Rng r_times = master.fork(3);
  Rng r_choice = master.fork(4);
  Rng r_cpu = master.fork(5);
  Rng r_hist = master.fork(6);

  auto draw_size = [&](int bin, Rng& rng) -> Bytes {
    const BinSpec& b = spec.bins[bin];
    double lo = static_cast<double>(std::max<Bytes>(b.lo, kMiB));
    double hi = static_cast<double>(b.hi);
    double u = std::pow(rng.uniform01(), spec.within_bin_skew);
    double v = lo * std::pow(hi / lo, u);
    Bytes size = static_cast<Bytes>(v / kMiB) * kMiB;
    return std::clamp<Bytes>(size, static_cast<Bytes>(lo), b.hi);
  };

  // Job bins.
  std::vector<int> job_bin(spec.job_count);
  std::array<int, kBinCount> bin_jobs{};
  for (int j = 0; j < spec.job_count; ++j) {
    double u = r_bins.uniform01();
    double acc = 0.0;
    int pick = kBinCount - 1;
    for (int b = 0; b < kBinCount; ++b) {
      acc += spec.bins[b].fraction;
      if (u < acc) {
        pick = b;
        break;
      }
    }
    job_bin[j] = pick;
    bin_jobs[pick]++;
  }

  std::vector<TraceEvent> events;
  FileId next_file = 1;
  std::uint64_t created_total = 0;
  std::uint64_t flagged_total = 0;
  // Exact-fraction striping of files that are created but never read again.
  auto flag_never = [&]() {
    ++created_total;
    std::uint64_t want =
        static_cast<std::uint64_t>(spec.never_reaccessed_frac * created_total + 0.5);
    if (want > flagged_total) {
      ++flagged_total;
      return true;
    }
    return false;
  };

  struct PerBin {
    std::vector<FileId> covered;                       // read at least once, in rank order
    std::vector<std::pair<Seconds, FileId>> pending;   // eligible, not yet read
  };
  std::array<PerBin, kBinCount> per_bin;

  // History prefix: the pool and its warm-up traffic.
  if (spec.history_span > 0.0) {
    Seconds create_end = spec.history_span * 0.3;
    std::array<std::vector<FileId>, kBinCount> pool_eligible;
    for (int b = 0; b < kBinCount; ++b) {
      if (bin_jobs[b] == 0) continue;
      int pool_n = std::max(1, static_cast<int>(std::lround(bin_jobs[b] * spec.pool_per_job[b])));
      std::vector<Seconds> times(pool_n);
      for (int i = 0; i < pool_n; ++i) times[i] = r_times.uniform(0.0, create_end);
      std::sort(times.begin(), times.end());
      for (int i = 0; i < pool_n; ++i) {
        FileId id = next_file++;
        Bytes size = draw_size(b, r_sizes);
        events.push_back({times[i], EventKind::Create, -1, id, size, 0.0});
        if (!flag_never()) pool_eligible[b].push_back(id);
      }
    }
    // Every eligible pool file is read once during warm-up, in a shuffled
    // order that also fixes its popularity rank.
    for (int b = 0; b < kBinCount; ++b) {
      auto& elig = pool_eligible[b];
      for (std::size_t i = elig.size(); i > 1; --i)
        std::swap(elig[i - 1], elig[r_hist.uniform_int(i)]);
      std::vector<Seconds> read_times(elig.size());
      for (std::size_t i = 0; i < read_times.size(); ++i)
        read_times[i] = r_times.uniform(create_end, spec.history_span);
      std::sort(read_times.begin(), read_times.end());
      for (std::size_t i = 0; i < elig.size(); ++i) {
        events.push_back({read_times[i], EventKind::Read, -1, elig[i], 0, 0.0});
        per_bin[b].covered.push_back(elig[i]);
      }
      // Extra zipf-weighted warm reads reinforce the popular files.
      workload_detail::ZipfPicker zipf(spec.popularity_zipf_s);
      int extra = static_cast<int>(std::lround(elig.size() * spec.history_extra_reads));
      for (int i = 0; i < extra && !elig.empty(); ++i) {
        Seconds t = r_times.uniform(create_end, spec.history_span);
        FileId id = elig[zipf.pick(elig.size(), r_hist)];
        events.push_back({t, EventKind::Read, -1, id, 0, 0.0});
      }
    }
  }

  // Job phase.
  std::array<int, kBinCount> remaining = bin_jobs;
  std::array<workload_detail::ZipfPicker, kBinCount> zipf = {
      workload_detail::ZipfPicker(spec.popularity_zipf_s),
      workload_detail::ZipfPicker(spec.popularity_zipf_s),
      workload_detail::ZipfPicker(spec.popularity_zipf_s),
      workload_detail::ZipfPicker(spec.popularity_zipf_s),
      workload_detail::ZipfPicker(spec.popularity_zipf_s),
      workload_detail::ZipfPicker(spec.popularity_zipf_s)};
  double slot = spec.job_count > 0 ? spec.duration / spec.job_count : 0.0;
  for (int j = 0; j < spec.job_count; ++j) {
    int b = job_bin[j];
    PerBin& pb = per_bin[b];
    Seconds t = spec.history_span + (j + r_times.uniform01()) * slot;
    Seconds cpu = spec.cpu_min * std::pow(spec.cpu_max / spec.cpu_min, r_cpu.uniform01());
    events.push_back({t, EventKind::JobStart, j, -1, 0, cpu});

    // Outputs that have finished writing become readable candidates.
    std::vector<std::pair<Seconds, FileId>> still_pending;
    for (const auto& [avail, id] : pb.pending) {
      if (avail < t)
        pb.covered.push_back(id);
      else
        still_pending.push_back({avail, id});
    }
    pb.pending = std::move(still_pending);

    std::size_t uncovered = pb.pending.size();
    double p_cover = remaining[b] > 0
                         ? std::min(1.0, spec.coverage_boost * static_cast<double>(uncovered) /
                                             remaining[b])
                         : 0.0;
    FileId input = -1;
    if (!pb.pending.empty() && r_choice.uniform01() < p_cover) {
      input = pb.pending.front().second;
      pb.pending.erase(pb.pending.begin());
      pb.covered.push_back(input);
    } else if (!pb.covered.empty()) {
      input = pb.covered[zipf[b].pick(pb.covered.size(), r_choice)];
    } else {
      // No file of this bin exists yet: materialize a fresh input.
      input = next_file++;
      Bytes size = draw_size(b, r_sizes);
      events.push_back({t, EventKind::Create, j, input, size, 0.0});
      flag_never();  // read immediately below, so the flag only keeps striping exact
      pb.covered.push_back(input);
    }
    events.push_back({t, EventKind::Read, j, input, 0, 0.0});
    remaining[b]--;

    if (r_choice.uniform01() < spec.output_prob) {
      FileId out = next_file++;
      Bytes size = draw_size(b, r_sizes);
      Seconds done = t + cpu;
      events.push_back({done, EventKind::Create, j, out, size, 0.0});
      if (!flag_never()) pb.pending.push_back({done, out});
    }
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const TraceEvent& a, const TraceEvent& b) { return a.t < b.t; });
  return events;
}

// Concatenates two generated workloads: the second one's clock, file ids and
// job ids are shifted past the first. Used for pattern-shift experiments.
inline std::vector<TraceEvent> generate_mix(const WorkloadSpec& first,
                                            const WorkloadSpec& second) {
  std::vector<TraceEvent> a = generate(first);
  std::vector<TraceEvent> b = generate(second);
  Seconds t_shift = first.history_span + first.duration;
  FileId id_shift = 0;
  for (const TraceEvent& e : a) id_shift = std::max(id_shift, e.file + 1);
  for (TraceEvent& e : b) {
    e.t += t_shift;
    if (e.file >= 0) e.file += id_shift;
    if (e.job >= 0) e.job += first.job_count;
  }
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline void save_trace(const std::vector<TraceEvent>& events, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SimError(ErrorCode::ConfigError, "cannot write " + path);
  for (const TraceEvent& e : events) {
    nlohmann::ordered_json j{{"t", e.t},       {"kind", event_kind_name(e.kind)},
                             {"job", e.job},   {"file", e.file},
                             {"size", e.size}, {"cpu", e.cpu}};
    out << j.dump() << '\n';
  }
}

inline std::vector<TraceEvent> load_trace(std::istream& in) {
  std::vector<TraceEvent> events;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw SimError(ErrorCode::ParseError, "line " + std::to_string(lineno));
    try {
      TraceEvent e;
      e.t = j.at("t").get<Seconds>();
      std::string kind = j.at("kind").get<std::string>();
      if (kind == "JobStart") e.kind = EventKind::JobStart;
      else if (kind == "Create") e.kind = EventKind::Create;
      else if (kind == "Read") e.kind = EventKind::Read;
      else if (kind == "Delete") e.kind = EventKind::Delete;
      else throw SimError(ErrorCode::ParseError,
                          "line " + std::to_string(lineno) + ": unknown kind '" + kind + "'");
      e.job = j.at("job").get<std::int64_t>();
      e.file = j.at("file").get<FileId>();
      e.size = j.at("size").get<Bytes>();
      e.cpu = j.at("cpu").get<Seconds>();
      events.push_back(e);
    } catch (const SimError&) {
      throw;
    } catch (const std::exception&) {
      throw SimError(ErrorCode::ParseError, "line " + std::to_string(lineno));
    }
  }
  return events;
}

inline std::vector<TraceEvent> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SimError(ErrorCode::ConfigError, "cannot open " + path);
  return load_trace(in);
}

// Structural validation: events sorted, reads and deletes only touch files
// that exist at that point.
inline void validate_trace(const std::vector<TraceEvent>& events) {
  Seconds prev = -std::numeric_limits<double>::infinity();
  std::set<FileId> live;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const TraceEvent& e = events[i];
    if (e.t < prev)
      throw SimError(ErrorCode::MalformedTrace, "event " + std::to_string(i) + " out of order");
    prev = e.t;
    switch (e.kind) {
      case EventKind::Create:
        if (live.count(e.file))
          throw SimError(ErrorCode::MalformedTrace,
                         "duplicate create of file " + std::to_string(e.file));
        live.insert(e.file);
        break;
      case EventKind::Read:
      case EventKind::Delete:
        if (!live.count(e.file))
          throw SimError(ErrorCode::MalformedTrace,
                         "reference to missing file " + std::to_string(e.file));
        if (e.kind == EventKind::Delete) live.erase(e.file);
        break;
      case EventKind::JobStart:
        break;
    }
  }
}

// Aggregate statistics of a trace, for calibration checks.
struct TraceStats {
  int jobs = 0;
  std::array<int, kBinCount> jobs_per_bin{};
  std::uint64_t files_created = 0;
  std::uint64_t files_never_read = 0;
  std::uint64_t reads = 0;
  Bytes total_file_bytes = 0;
  std::array<Bytes, kBinCount> file_bytes_per_bin{};
  double frac_files_over_5_accesses = 0.0;

  double never_read_frac() const {
    return files_created == 0 ? 0.0
                              : static_cast<double>(files_never_read) / files_created;
  }
};

inline TraceStats trace_stats(const std::vector<TraceEvent>& events) {
  TraceStats st;
  std::map<FileId, Bytes> sizes;
  std::map<FileId, int> read_counts;
  std::map<std::int64_t, Bytes> job_input;
  for (const TraceEvent& e : events) {
    switch (e.kind) {
      case EventKind::JobStart:
        st.jobs++;
        break;
      case EventKind::Create:
        sizes[e.file] = e.size;
        break;
      case EventKind::Read:
        read_counts[e.file]++;
        st.reads++;
        if (e.job >= 0 && !job_input.count(e.job)) job_input[e.job] = sizes[e.file];
        break;
      case EventKind::Delete:
        break;
    }
  }
  st.files_created = sizes.size();
  std::uint64_t over5 = 0;
  for (const auto& [id, size] : sizes) {
    st.total_file_bytes += size;
    st.file_bytes_per_bin[bin_index(size)] += size;
    auto it = read_counts.find(id);
    if (it == read_counts.end())
      st.files_never_read++;
    else if (it->second > 5)
      ++over5;
  }
  if (st.files_created > 0)
    st.frac_files_over_5_accesses = static_cast<double>(over5) / st.files_created;
  for (const auto& [job, size] : job_input) st.jobs_per_bin[bin_index(size)]++;
  return st;
}

}  // namespace tiersim
