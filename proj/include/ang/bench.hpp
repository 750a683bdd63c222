#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ang/graph.hpp"
#include "ang/ivfadc.hpp"
#include "ang/search.hpp"

namespace ang {

// One CSV row: means over all queries for an (engine, k, T) point.
// For engine "ivfadc", k is the recall cutoff, T the re-rank list length, and
// accuracy the mean recall@k of the true nearest neighbor.
struct EvalRow {
  std::string engine;
  int k = 0;
  int T = 0;
  double accuracy = 0.0;
  double mean_us = 0.0;
  double dist_evals = 0.0;
  double heap_ops = 0.0;

  friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

struct SweepConfig {
  std::vector<std::string> engines{"augmented"};
  std::vector<int> ks{1};
  std::vector<int> visits{100};
  int plain_seeds = 3;
  std::uint32_t seed = 0;
  int threads = 0;
  bool timing = true;  // false writes mean_us as 0 so output is byte-reproducible
};

struct IvfSweepConfig {
  std::vector<int> ks{1, 10, 100};
  std::vector<int> list_lens{1000};
  int probes = 16;
  int probe_budget = 0;
  int threads = 0;
  bool timing = true;
};

inline constexpr std::string_view kCsvHeader = "engine,k,T,accuracy,mean_us,dist_evals,heap_ops";

// min(count, n) distinct random seeds for the plain-graph baseline, a pure
// function of (seed, query).
std::vector<std::int32_t> plain_seeds_for(std::int64_t query, std::int64_t n, int count, std::uint32_t seed);

std::vector<EvalRow> run_sweep(const AugmentedGraph& g, const Dataset& base, const Dataset& queries,
                               const RowMatrixXi& truth, const SweepConfig& cfg);

std::vector<EvalRow> run_ivf_sweep(const CoarseIndex& ix, const Dataset& base, const Dataset& queries,
                                   const RowMatrixXi& truth, const IvfSweepConfig& cfg);

void write_csv(std::ostream& out, const std::vector<EvalRow>& rows);

// Exact k nearest ids per query, ties to the smaller id.
RowMatrixXi groundtruth(const Dataset& base, const Dataset& queries, int k, int threads = 0);

std::vector<int> parse_int_list(std::string_view text);
std::vector<std::string> parse_name_list(std::string_view text);

// Command implementations behind the CLI; errors are thrown as ang::Error.
struct GroundtruthCommand {
  std::filesystem::path base, queries, out;
  VecFormat format = VecFormat::fvecs;
  int k = 100;
  int threads = 0;
};
void cmd_groundtruth(const GroundtruthCommand& cmd);

struct BuildCommand {
  std::filesystem::path base, out;
  VecFormat format = VecFormat::fvecs;
  BuildParams params;
};
AugmentedGraph cmd_build(const BuildCommand& cmd, std::ostream& log);

struct SearchCommand {
  std::filesystem::path index, base, queries, truth, out;  // empty out writes to the given stream
  VecFormat format = VecFormat::fvecs;
  SweepConfig sweep;
  IvfSweepConfig ivf;  // used when the index is an ANNV file
};
void cmd_search(const SearchCommand& cmd, std::ostream& fallback_out);

struct IvfBuildCommand {
  std::filesystem::path base, out;
  VecFormat format = VecFormat::fvecs;
  IvfBuildParams params;
};
CoarseIndex cmd_ivf_build(const IvfBuildCommand& cmd, std::ostream& log);

}  // namespace ang
