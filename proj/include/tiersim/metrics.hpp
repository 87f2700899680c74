#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tiersim/cluster.hpp"
#include "tiersim/types.hpp"

namespace tiersim {

// Job size bins, half-open (lo, hi].
struct SizeBin {
  char label;
  Bytes lo;
  Bytes hi;
};

inline const std::array<SizeBin, 6>& size_bins() {
  static const std::array<SizeBin, 6> bins = {{
      {'A', 0, 128 * kMiB},
      {'B', 128 * kMiB, 512 * kMiB},
      {'C', 512 * kMiB, 1 * kGiB},
      {'D', 1 * kGiB, 2 * kGiB},
      {'E', 2 * kGiB, 5 * kGiB},
      {'F', 5 * kGiB, 10 * kGiB},
  }};
  return bins;
}

inline constexpr int kBinCount = 6;

inline int bin_index(Bytes size) {
  const auto& bins = size_bins();
  for (int i = 0; i < kBinCount; ++i)
    if (size <= bins[i].hi) return i;
  return kBinCount - 1;
}

inline char bin_label(int index) { return size_bins().at(index).label; }

// One read, as recorded by the replay. `served` is where the read actually
// came from; `best` is the highest tier holding the file right before the
// access. job < 0 marks warm-up traffic outside any job.
struct AccessRecord {
  Seconds t = 0.0;
  FileId file = -1;
  Bytes bytes = 0;
  TierKind served = TierKind::Hdd;
  TierKind best = TierKind::Hdd;
  std::int64_t job = -1;
  int bin = 0;
};

enum class RatioBasis { ByAccess, ByLocation };

inline double hit_ratio(const std::vector<AccessRecord>& records, TierKind tier,
                        RatioBasis basis) {
  if (records.empty()) throw SimError(ErrorCode::EmptyRecords, "hit_ratio");
  std::size_t hits = 0;
  for (const AccessRecord& r : records) {
    TierKind t = basis == RatioBasis::ByAccess ? r.served : r.best;
    if (t == tier) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

inline double byte_hit_ratio(const std::vector<AccessRecord>& records, TierKind tier,
                             RatioBasis basis) {
  if (records.empty()) throw SimError(ErrorCode::EmptyRecords, "byte_hit_ratio");
  double hit = 0.0, total = 0.0;
  for (const AccessRecord& r : records) {
    total += static_cast<double>(r.bytes);
    TierKind t = basis == RatioBasis::ByAccess ? r.served : r.best;
    if (t == tier) hit += static_cast<double>(r.bytes);
  }
  return total == 0.0 ? 0.0 : hit / total;
}

struct ByteAccuracyCoverage {
  std::optional<double> byte_accuracy;  // absent when nothing was upgraded
  double byte_coverage = 0.0;
};

inline ByteAccuracyCoverage byte_accuracy_coverage(Bytes upgraded_to_memory,
                                                   const std::vector<AccessRecord>& records) {
  double mem_bytes = 0.0, total = 0.0;
  for (const AccessRecord& r : records) {
    total += static_cast<double>(r.bytes);
    if (r.served == TierKind::Memory) mem_bytes += static_cast<double>(r.bytes);
  }
  ByteAccuracyCoverage out;
  if (upgraded_to_memory > 0)
    out.byte_accuracy = mem_bytes / static_cast<double>(upgraded_to_memory);
  out.byte_coverage = total == 0.0 ? 0.0 : mem_bytes / total;
  return out;
}

struct JobStat {
  std::int64_t job = -1;
  int bin = -1;  // from the job's input data size
  Seconds cpu = 0.0;
  Seconds completion = 0.0;    // max over reads of service_time + cpu
  double machine_time = 0.0;   // sum of service times + cpu
  std::uint64_t reads = 0;
};

struct BinAggregate {
  int jobs = 0;
  double mean_completion = 0.0;
  double machine_time = 0.0;
};

inline std::array<BinAggregate, kBinCount> efficiency_and_completion(
    const std::vector<JobStat>& jobs) {
  std::array<BinAggregate, kBinCount> out{};
  std::array<double, kBinCount> completion_sum{};
  for (const JobStat& j : jobs) {
    if (j.bin < 0 || j.bin >= kBinCount) continue;  // jobs that never read input
    out[j.bin].jobs++;
    completion_sum[j.bin] += j.completion;
    out[j.bin].machine_time += j.machine_time;
  }
  for (int b = 0; b < kBinCount; ++b)
    if (out[b].jobs > 0) out[b].mean_completion = completion_sum[b] / out[b].jobs;
  return out;
}

struct RunReport {
  // configuration echo
  std::string trace;
  std::string down_policy = "none";
  std::string up_policy = "none";
  std::string placement_mode;
  int nodes = 0;
  bool tier_aware = true;
  std::uint64_t seed = 0;
  nlohmann::ordered_json cluster_config;

  // job-window metrics (warm-up traffic excluded)
  std::uint64_t reads = 0;
  Bytes read_bytes = 0;
  double hr_access = 0.0, hr_location = 0.0;
  double bhr_access = 0.0, bhr_location = 0.0;
  std::optional<double> byte_accuracy;
  double byte_coverage = 0.0;
  std::array<BinAggregate, kBinCount> bins{};
  // per bin, fraction of accesses served by each tier
  double access_distribution[kBinCount][kTierCount] = {};

  // movement totals over the whole run
  Bytes upgraded_to_memory = 0;
  Bytes bytes_moved_in[kTierCount] = {0, 0, 0};
  Bytes bytes_upgraded_in[kTierCount] = {0, 0, 0};
  Bytes bytes_downgraded_in[kTierCount] = {0, 0, 0};
  std::uint64_t moves = 0;
  std::uint64_t replica_deletes = 0;

  nlohmann::ordered_json model_diagnostics;  // empty unless an xgb policy ran
};

// Pure function of the run logs; the live report and any later recomputation
// from persisted logs go through here.
inline RunReport build_report(const std::vector<AccessRecord>& records,
                              const std::vector<JobStat>& jobs, const MoveLedger& ledger) {
  RunReport rep;
  std::vector<AccessRecord> job_records;
  for (const AccessRecord& r : records)
    if (r.job >= 0) job_records.push_back(r);

  rep.reads = job_records.size();
  for (const AccessRecord& r : job_records) rep.read_bytes += r.bytes;
  if (!job_records.empty()) {
    rep.hr_access = hit_ratio(job_records, TierKind::Memory, RatioBasis::ByAccess);
    rep.hr_location = hit_ratio(job_records, TierKind::Memory, RatioBasis::ByLocation);
    rep.bhr_access = byte_hit_ratio(job_records, TierKind::Memory, RatioBasis::ByAccess);
    rep.bhr_location = byte_hit_ratio(job_records, TierKind::Memory, RatioBasis::ByLocation);
  }
  Bytes upgraded_mem = ledger.upgraded_in[static_cast<int>(TierKind::Memory)];
  ByteAccuracyCoverage bac = byte_accuracy_coverage(upgraded_mem, job_records);
  rep.byte_accuracy = bac.byte_accuracy;
  rep.byte_coverage = bac.byte_coverage;
  rep.upgraded_to_memory = upgraded_mem;

  rep.bins = efficiency_and_completion(jobs);

  std::uint64_t counts[kBinCount][kTierCount] = {};
  std::uint64_t bin_totals[kBinCount] = {};
  for (const AccessRecord& r : job_records) {
    counts[r.bin][static_cast<int>(r.served)]++;
    bin_totals[r.bin]++;
  }
  for (int b = 0; b < kBinCount; ++b)
    for (int t = 0; t < kTierCount; ++t)
      rep.access_distribution[b][t] =
          bin_totals[b] == 0 ? 0.0 : static_cast<double>(counts[b][t]) / bin_totals[b];

  for (int t = 0; t < kTierCount; ++t) {
    rep.bytes_moved_in[t] = ledger.moved_in[t];
    rep.bytes_upgraded_in[t] = ledger.upgraded_in[t];
    rep.bytes_downgraded_in[t] = ledger.downgraded_in[t];
  }
  rep.moves = ledger.move_count;
  rep.replica_deletes = ledger.replica_deletes;
  return rep;
}

inline nlohmann::ordered_json report_to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["trace"] = r.trace;
  j["down_policy"] = r.down_policy;
  j["up_policy"] = r.up_policy;
  j["placement_mode"] = r.placement_mode;
  j["nodes"] = r.nodes;
  j["tier_aware"] = r.tier_aware;
  j["seed"] = r.seed;
  if (!r.cluster_config.is_null()) j["cluster_config"] = r.cluster_config;
  j["reads"] = r.reads;
  j["read_bytes"] = r.read_bytes;
  j["hr_access"] = r.hr_access;
  j["hr_location"] = r.hr_location;
  j["bhr_access"] = r.bhr_access;
  j["bhr_location"] = r.bhr_location;
  if (r.byte_accuracy)
    j["byte_accuracy"] = *r.byte_accuracy;
  else
    j["byte_accuracy"] = nullptr;
  j["byte_coverage"] = r.byte_coverage;
  j["upgraded_to_memory"] = r.upgraded_to_memory;
  nlohmann::ordered_json bins = nlohmann::ordered_json::array();
  for (int b = 0; b < kBinCount; ++b) {
    nlohmann::ordered_json jb;
    jb["bin"] = std::string(1, bin_label(b));
    jb["jobs"] = r.bins[b].jobs;
    jb["mean_completion_s"] = r.bins[b].mean_completion;
    jb["machine_time_s"] = r.bins[b].machine_time;
    jb["access_memory"] = r.access_distribution[b][0];
    jb["access_ssd"] = r.access_distribution[b][1];
    jb["access_hdd"] = r.access_distribution[b][2];
    bins.push_back(std::move(jb));
  }
  j["bins"] = std::move(bins);
  for (int t = 0; t < kTierCount; ++t) {
    std::string name = tier_name(static_cast<TierKind>(t));
    j["bytes_moved_in_" + name] = r.bytes_moved_in[t];
    j["bytes_upgraded_in_" + name] = r.bytes_upgraded_in[t];
    j["bytes_downgraded_in_" + name] = r.bytes_downgraded_in[t];
  }
  j["moves"] = r.moves;
  j["replica_deletes"] = r.replica_deletes;
  if (!r.model_diagnostics.is_null()) j["model_diagnostics"] = r.model_diagnostics;
  return j;
}

// Flat CSV, one row per bin and metric.
inline std::string report_to_csv(const RunReport& r) {
  std::string out = "bin,metric,value\n";
  auto row = [&out](char bin, const std::string& metric, double value) {
    out += bin;
    out += ',' + metric + ',' + std::to_string(value) + '\n';
  };
  for (int b = 0; b < kBinCount; ++b) {
    char L = bin_label(b);
    row(L, "jobs", r.bins[b].jobs);
    row(L, "mean_completion_s", r.bins[b].mean_completion);
    row(L, "machine_time_s", r.bins[b].machine_time);
    row(L, "access_memory", r.access_distribution[b][0]);
    row(L, "access_ssd", r.access_distribution[b][1]);
    row(L, "access_hdd", r.access_distribution[b][2]);
  }
  return out;
}

struct BinDelta {
  int jobs = 0;
  double completion_reduction_pct = 0.0;  // positive = faster than baseline
  double machine_time_reduction_pct = 0.0;
};

// Percent reductions against a named baseline run, per bin.
inline std::array<BinDelta, kBinCount> compare_to_baseline(const RunReport& run,
                                                           const RunReport& baseline) {
  std::array<BinDelta, kBinCount> out{};
  for (int b = 0; b < kBinCount; ++b) {
    if (run.bins[b].jobs != baseline.bins[b].jobs)
      throw SimError(ErrorCode::BinMismatch,
                     std::string("job counts differ in bin ") + bin_label(b));
    out[b].jobs = run.bins[b].jobs;
    if (baseline.bins[b].mean_completion > 0.0)
      out[b].completion_reduction_pct =
          100.0 * (1.0 - run.bins[b].mean_completion / baseline.bins[b].mean_completion);
    if (baseline.bins[b].machine_time > 0.0)
      out[b].machine_time_reduction_pct =
          100.0 * (1.0 - run.bins[b].machine_time / baseline.bins[b].machine_time);
  }
  return out;
}

// Log persistence for oracle recomputation.

inline nlohmann::ordered_json access_record_to_json(const AccessRecord& r) {
  return nlohmann::ordered_json{{"t", r.t},
                                {"file", r.file},
                                {"bytes", r.bytes},
                                {"served", static_cast<int>(r.served)},
                                {"best", static_cast<int>(r.best)},
                                {"job", r.job},
                                {"bin", r.bin}};
}

inline AccessRecord access_record_from_json(const nlohmann::json& j) {
  AccessRecord r;
  r.t = j.at("t").get<Seconds>();
  r.file = j.at("file").get<FileId>();
  r.bytes = j.at("bytes").get<Bytes>();
  r.served = static_cast<TierKind>(j.at("served").get<int>());
  r.best = static_cast<TierKind>(j.at("best").get<int>());
  r.job = j.at("job").get<std::int64_t>();
  r.bin = j.at("bin").get<int>();
  return r;
}

inline nlohmann::ordered_json job_stat_to_json(const JobStat& s) {
  return nlohmann::ordered_json{{"job", s.job},         {"bin", s.bin},
                                {"cpu", s.cpu},         {"completion", s.completion},
                                {"machine", s.machine_time}, {"reads", s.reads}};
}

inline JobStat job_stat_from_json(const nlohmann::json& j) {
  JobStat s;
  s.job = j.at("job").get<std::int64_t>();
  s.bin = j.at("bin").get<int>();
  s.cpu = j.at("cpu").get<Seconds>();
  s.completion = j.at("completion").get<Seconds>();
  s.machine_time = j.at("machine").get<double>();
  s.reads = j.at("reads").get<std::uint64_t>();
  return s;
}

inline nlohmann::ordered_json ledger_to_json(const MoveLedger& l) {
  nlohmann::ordered_json j;
  for (int t = 0; t < kTierCount; ++t) {
    std::string name = tier_name(static_cast<TierKind>(t));
    j["moved_in_" + name] = l.moved_in[t];
    j["moved_out_" + name] = l.moved_out[t];
    j["upgraded_in_" + name] = l.upgraded_in[t];
    j["downgraded_in_" + name] = l.downgraded_in[t];
  }
  j["move_count"] = l.move_count;
  j["replica_deletes"] = l.replica_deletes;
  return j;
}

inline MoveLedger ledger_from_json(const nlohmann::json& j) {
  MoveLedger l;
  for (int t = 0; t < kTierCount; ++t) {
    std::string name = tier_name(static_cast<TierKind>(t));
    l.moved_in[t] = j.at("moved_in_" + name).get<Bytes>();
    l.moved_out[t] = j.at("moved_out_" + name).get<Bytes>();
    l.upgraded_in[t] = j.at("upgraded_in_" + name).get<Bytes>();
    l.downgraded_in[t] = j.at("downgraded_in_" + name).get<Bytes>();
  }
  l.move_count = j.at("move_count").get<std::uint64_t>();
  l.replica_deletes = j.at("replica_deletes").get<std::uint64_t>();
  return l;
}

}  // namespace tiersim
