#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "msglab/env.hpp"
#include "msglab/train.hpp"

namespace msglab {

struct ExperimentConfig {
  /// recletter, goals3 or goals5.
  std::string env = "recletter";
  ObsMode obs_mode = ObsMode::PosObs;
  int stream_length = 1;
  TrainConfig train;
  /// Unset values follow the environment: gamma 0 and tabular networks for
  /// the letter game, gamma 0.99 and MLPs for the grid.
  std::optional<double> gamma;
  std::optional<Architecture> arch;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir;
  int jobs = 1;

  TrainConfig resolved_train() const;
  std::vector<std::string> violations() const;
};

/// Sets one key; throws std::invalid_argument for unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// Flat key=value lines; '#' starts a comment.
ExperimentConfig parse_config(std::istream& in, const std::string& origin = "<stream>");
ExperimentConfig load_config(const std::string& path);
/// "a..b" (inclusive) or a comma list.
std::vector<std::uint64_t> parse_seeds(const std::string& text);
std::vector<double> parse_grid(const std::string& text);

std::unique_ptr<Environment> make_environment(const ExperimentConfig& cfg);

/// Output directory: explicit value, else $MSGLAB_OUT, else ./msglab_out.
std::string resolve_output_dir(const std::string& explicit_dir);

std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);
std::string format_number(double v);

struct ExperimentResult {
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<MetricsRow>> rows;
  std::vector<std::string> files;
};

/// One CSV per seed, aggregate.csv (mean and sample std over every seed) and
/// timing.csv. Seeds run on up to cfg.jobs threads.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct HeatmapCell {
  double lambda = 0.0;
  double epsilon = 0.0;
  double honesty_mean = 0.0;
  double honesty_std = 0.0;
  std::size_t seeds = 0;
};

/// Runs every (lambda, epsilon) cell and writes honesty_heatmap.csv. Honesty
/// per seed is the mean over the final 10% of rows.
std::vector<HeatmapCell> run_honesty_sweep(const ExperimentConfig& base,
                                           const std::vector<double>& lambda_grid,
                                           const std::vector<double>& epsilon_grid);

struct OracleCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct OracleReport {
  std::vector<OracleCheck> checks;
  bool all_passed() const;
};

struct Lemma1Result {
  Eigen::VectorXd finite_difference;
  Eigen::VectorXd signaling;
  Eigen::VectorXd policy_gradient;
  double signaling_rel_error = 0.0;
  double pg_rel_error = 0.0;
  double exact_value = 0.0;
  double mc_value = 0.0;
  double mc_stderr = 0.0;
};

/// Letter game with a frozen receiver that decodes the committed scheme's
/// posterior; compares both estimators against finite differences of the
/// exact sender value.
Lemma1Result lemma1_check(long samples, std::uint64_t seed);

OracleReport run_oracle_suite(std::ostream& log);

}  // namespace msglab
