#pragma once

// Experiment driver: typed configs read from flat key-value files, the five
// experiments, and their claim summaries.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "samlab/explicit_bias.hpp"
#include "samlab/kvfile.hpp"
#include "samlab/losses.hpp"
#include "samlab/manifold.hpp"
#include "samlab/optim.hpp"
#include "samlab/sharpness.hpp"

namespace samlab {

enum class Experiment { kQuadratic, kToy4D, kFlowCompare, kSharpnessScan, kExplicitBias };

std::string to_string(Experiment e);
Experiment parse_experiment(const std::string& name);

struct ExperimentConfig {
  Experiment experiment = Experiment::kToy4D;
  /// "toy4d", "diag: a b c ..." or a loss spec file path.
  std::string loss = "toy4d";
  /// Directory used to resolve a relative loss path.
  std::string base_dir = ".";

  double eta = 0.005;
  double rho = 0.01;
  /// 0 picks a per-experiment default.
  std::size_t steps = 0;
  std::size_t record_every = 1000;
  std::uint64_t seed = 0;
  /// Flow horizon in tau = eta rho^2 t units.
  double horizon = 1.0;
  std::string out = "out";
  Vector x0;

  Algorithm algorithm = Algorithm::kSam;
  /// Empty means the flow matching the algorithm.
  std::optional<FlowKind> flow;
  SharpnessType type = SharpnessType::kMax;
  bool stochastic = false;

  Box box;
  std::size_t n_starts = 16;
  std::size_t grid = 201;
  std::size_t axis0 = 0;
  std::size_t axis1 = 1;
  /// Expected (axis0, axis1) location of the selected minimizer; empty means the grid argmin.
  Vector target;

  std::vector<Vector> points;
  std::vector<double> rho_list;
  std::size_t avg_samples = kDefaultAvgSamples;
  unsigned threads = 1;
  /// Extra seeded attempts for the stochastic tracking claim.
  std::size_t retries = 1;
};

/// Defaults for one experiment.
ExperimentConfig default_config(Experiment e);

/// Sets one key from its text form; throws std::invalid_argument naming the key.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// Applies every entry of a config file. A file's 'experiment' key, if any, must match cfg.
void apply_config_file(ExperimentConfig& cfg, const KeyValueFile& file);
/// All keys in a stable order, in the file format.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg);
std::string format_config(const ExperimentConfig& cfg);

LossPtr resolve_loss(const ExperimentConfig& cfg);

/// Steps actually run: cfg.steps, or the experiment/algorithm default.
std::size_t effective_steps(const ExperimentConfig& cfg);

/// Full validation before anything runs: loss loads, dimensions agree,
/// hyper-parameters are finite and in range. Throws std::invalid_argument.
void validate_config(const ExperimentConfig& cfg);

struct Claim {
  std::string id;
  std::string description;
  double target = 0.0;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  /// Informational claims are reported but do not affect the exit status.
  bool asserted = true;
  std::string provenance;
};

struct RunSummary {
  std::string experiment;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<Claim> claims;
  std::vector<std::pair<std::string, std::string>> notes;

  bool all_pass() const;
  const Claim* find(const std::string& id) const;
};

/// A CSV table written next to the summary.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct RunOutput {
  RunSummary summary;
  std::optional<Trajectory> trajectory;
  std::vector<std::pair<std::string, Table>> tables;
};

RunOutput run_quadratic(const ExperimentConfig& cfg);
RunOutput run_toy4d(const ExperimentConfig& cfg);
RunOutput run_flow_compare(const ExperimentConfig& cfg);
RunOutput run_sharpness_scan(const ExperimentConfig& cfg);
RunOutput run_explicit_bias(const ExperimentConfig& cfg);

/// Dispatches on cfg.experiment after validate_config.
RunOutput run_experiment(const ExperimentConfig& cfg);

}  // namespace samlab
