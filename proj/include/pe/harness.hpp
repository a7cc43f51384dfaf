#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <string>
#include <vector>

#include "pe/core.hpp"
#include "pe/environments.hpp"
#include "pe/tuner.hpp"

namespace pe {

enum class EnvironmentKind { Bernoulli, Gaussian, Contextual, Glucose };

std::string_view to_string(EnvironmentKind k);
EnvironmentKind parse_environment_kind(std::string_view name);

struct EnvironmentSpec {
  EnvironmentKind kind = EnvironmentKind::Bernoulli;
  /// Bernoulli success probabilities or Gaussian means.
  std::vector<double> means{0.3, 0.7};
  double sigma = 1.0;
  // Contextual bandit.
  std::array<std::vector<double>, 2> beta{std::vector<double>{0.4, 0.2, -0.2},
                                          std::vector<double>{0.2, 0.5, 0.2}};
  std::vector<double> context_mean{0.0, 0.0};
  /// Row-major (d - 1) x (d - 1).
  std::vector<double> context_cov{1.0, 0.0, 0.0, 1.0};
  double noise_sd = 0.5;
  GlucoseMdp glucose{};
};

struct ExperimentConfig {
  std::string name = "experiment";
  EnvironmentSpec environment{};
  std::vector<PolicyVariant> variants;
  int horizon = 50;
  int replicates = 96;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "results";
  TuningConfig tuning{};
  GlucoseRunOptions glucose{};
  /// "section.key" entries that were filled from defaults.
  std::vector<std::string> defaulted;

  /// Throws PreconditionError with a descriptive message.
  void validate() const;
};

/// Parses the INI-style experiment format documented in the README.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<std::string> preset_names();
/// INI text of a built-in experiment. Throws PreconditionError if unknown.
std::string preset_text(const std::string& name);
ExperimentConfig preset(const std::string& name);

struct Summary {
  double mean = 0.0;
  /// Sample SD / sqrt(n); reported as 0 when n == 1.
  double se = 0.0;
  bool se_undefined = false;
  std::size_t n = 0;
};

/// Throws PreconditionError on empty input.
Summary summarize(std::span<const double> values);

struct EpisodeFailure {
  std::string variant;
  int replicate = 0;
  std::string message;
};

struct VariantResult {
  std::string name;
  /// Successful replicates only, in replicate order.
  std::vector<double> values;
  std::vector<int> replicates;
  std::optional<Summary> summary;
};

struct ExperimentResult {
  /// Successful episodes in (variant, replicate) order.
  std::vector<EpisodeRecord> episodes;
  std::vector<VariantResult> rows;
  std::vector<EpisodeFailure> failures;
};

/// Seed of replicate r. It does not depend on the variant, so every variant
/// faces the same environment streams (common random numbers).
std::uint64_t episode_seed(std::uint64_t base, int replicate);

/// Called after each finished episode (serialized).
using ProgressFn = std::function<void(const std::string& variant, int replicate,
                                      std::size_t done, std::size_t total)>;

/// Runs every variant x replicate on `workers` threads. Results do not
/// depend on the worker count. Episode exceptions are recorded as failures.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const ProgressFn& progress = {});

/// Shortest round-trip decimal form; empty for NaN.
std::string format_double(double v);

std::string summary_csv(const ExperimentResult& result);
std::string episodes_csv(const ExperimentResult& result);
std::string metadata_json(const ExperimentConfig& cfg, const ExperimentResult& result);

/// Writes summary.csv, episodes.csv and metadata.json into `dir`.
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                   const std::filesystem::path& dir);

struct SummaryRow {
  std::string variant;
  Summary summary;
};

/// Recomputes the summary table from an episodes.csv stream: the final
/// cumulative value of each (variant, replicate) is one observation.
std::vector<SummaryRow> summarize_episode_log(std::istream& in);
std::string summary_rows_csv(const std::vector<SummaryRow>& rows);

}  // namespace pe
