#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sbmrecon/bpcore.hpp"
#include "sbmrecon/broadcast.hpp"
#include "sbmrecon/pipeline.hpp"

namespace sbm {

enum class ExperimentKind {
  TreeAccuracy,
  RobustAccuracy,
  MomentsCheck,
  ContractionCheck,
  ThresholdSweep,
  ConductanceCheck,
  GraphRecover,
};

std::string_view to_string(ExperimentKind kind);
/// Throws std::invalid_argument for an unknown name.
ExperimentKind parse_experiment_kind(std::string_view name);
const std::vector<ExperimentKind>& all_experiment_kinds();

/// One experiment, fully resolved: every optional key of the JSON config has
/// been replaced by its default, so to_json(spec) reproduces the run.
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::TreeAccuracy;
  TreeKind::Family family = TreeKind::Family::GaltonWatson;
  // Tree parameters; when a and b are given these are derived from them.
  std::optional<double> a;
  std::optional<double> b;
  std::vector<double> d;
  std::vector<double> theta;
  std::vector<double> delta;
  std::vector<int> k;
  std::vector<double> signal;  // threshold-sweep: theta^2 d values
  std::int64_t trials = 10000;
  std::uint64_t seed = 1;
  SamplingMethod method = SamplingMethod::Auto;
  double clamp = kDefaultClamp;
  // graph-recover; trials counts independent graphs
  std::int64_t n = 0;
  std::string blackbox = "oracle-noise";
  double blackbox_delta = 0.25;
  AlgoConfig algo;
  std::int64_t tree_trials = 10000;
};

/// Parses a config object for `kind`. Unknown keys, wrong types and empty
/// grids throw std::invalid_argument naming the offending key.
ExperimentSpec parse_spec(ExperimentKind kind, const nlohmann::json& config);
ExperimentSpec default_spec(ExperimentKind kind);
nlohmann::json to_json(const ExperimentSpec& spec);
/// Human-readable list of accepted keys per experiment.
std::string config_schema();

struct RunOptions {
  unsigned threads = 1;     // 0 = all hardware threads
  bool deterministic = false;  // forces one thread and zeroes the timing column
};

struct ResultRow {
  std::vector<std::string> coords;
  double estimate = 0.0;
  double ci = 0.0;
  std::int64_t trials = 0;
  double seconds = 0.0;
};

struct ResultTable {
  std::string experiment;
  std::vector<std::string> coord_names;
  std::vector<ResultRow> rows;
  nlohmann::json spec;

  /// Index of a coordinate column; throws std::out_of_range if absent.
  std::size_t column(std::string_view name) const;
  /// Rows whose coordinates match every (name, value) pair.
  std::vector<const ResultRow*> select(
      std::initializer_list<std::pair<std::string_view, std::string_view>> match) const;
};

/// Shortest round-trip decimal form, as used in coordinate columns.
std::string format_number(double x);

ResultTable run_tree_accuracy(const ExperimentSpec& spec, const RunOptions& opts);
ResultTable run_robust_accuracy(const ExperimentSpec& spec, const RunOptions& opts);
ResultTable run_moments_check(const ExperimentSpec& spec, const RunOptions& opts);
ResultTable run_contraction_check(const ExperimentSpec& spec, const RunOptions& opts);
ResultTable run_threshold_sweep(const ExperimentSpec& spec, const RunOptions& opts);
ResultTable run_conductance_check(const ExperimentSpec& spec, const RunOptions& opts);
ResultTable run_graph_recover(const ExperimentSpec& spec, const RunOptions& opts);
ResultTable run_experiment(const ExperimentSpec& spec, const RunOptions& opts);

/// CSV header: experiment,<coordinates>,estimate,ci,trials,seconds.
std::string to_csv(const ResultTable& table);
nlohmann::json to_json(const ResultTable& table);

/// Writes the CSV to `path` and the JSON mirror next to it (extension
/// replaced by .json). Throws std::runtime_error carrying the path on I/O
/// failure.
void write_results(const ResultTable& table, const std::filesystem::path& path);
std::filesystem::path json_mirror_path(const std::filesystem::path& csv_path);

}  // namespace sbm
