// Copyright 2026 The kinetic-ergo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kergo/audit.hpp"
#include "kergo/dissipativity.hpp"
#include "kergo/entropy.hpp"
#include "kergo/model.hpp"
#include "kergo/sde.hpp"

namespace kergo {

enum class PipelineKind {
  kErgodicityClassical,
  kErgodicityMv,
  kMvFixedPoint,
  kChaosScan,
  kHypoVerify,
  kDissipativity,
};

std::string to_string(PipelineKind kind);
/// Accepts the pipeline names and the `check-dissipativity` alias.
PipelineKind pipeline_from_string(const std::string& name);
std::vector<std::string> pipeline_names();

inline constexpr int kExitPass = 0;
inline constexpr int kExitAcceptanceFailure = 2;
inline constexpr int kExitInputError = 3;

/// Errors caused by the configuration rather than by the computation.
bool is_input_error(ErrorCode code);

struct IntegratorSettings {
  Scheme scheme = Scheme::kKineticSplitting;
  double dt = 1e-2;
  double horizon = 10.0;
  double snapshot_every = 0.25;
  bool allow_large_step = false;
};

struct FitSettings {
  double t_lo = 0.0;
  std::optional<double> t_hi;
  /// Noise floor = floor_factor x (estimator value between two independent
  /// reference samples).
  double floor_factor = 3.0;
};

enum class W2Mode { kExact, kGaussianFit };
std::string to_string(W2Mode mode);

struct ErgodicitySettings {
  std::size_t particles = 10000;
  Vec initial_mean;                ///< empty: zero
  std::optional<Mat> initial_cov;  ///< absent: the reference covariance
  W2Mode w2_mode = W2Mode::kExact;
  /// Exact W2 uses at most this many points per side.
  std::size_t w2_points = 2048;
  KlMode kl_mode = KlMode::kGaussianFit;
  int kl_neighbors = kDefaultNeighbors;
  FitSettings fit;
  std::size_t floor_replicates = 4;
  double rate_tolerance = 0.1;
  double ratio_lo = 1.7;
  double ratio_hi = 2.3;
  /// Burn-in for a simulated reference when no closed form exists; 0 uses 2 x horizon.
  double reference_horizon = 0.0;
  bool audit = true;
  ProbeDesign probes;
  double audit_time = 1.0;
};

struct MeanFieldSettings {
  std::size_t particles = 4000;
  double tol = 1e-3;
  std::size_t max_iter = 30;
  double relax_time = 0.0;
  Vec initial_mean;
  double cov_tolerance = 0.1;
};

struct ChaosSettings {
  std::vector<std::size_t> n_values;
  double t_stat = 10.0;
  std::size_t replicates = 8;
  /// Strengths of the model's interaction kernel; the first is the baseline.
  std::vector<double> interaction_strengths = {0.0};
  std::string kernel = "linear_attraction";
  int rate_dimension = 0;
  double slope_lo = -0.65;
  double slope_hi = -0.35;
  double factor_bound = 3.0;
};

struct HypoSettings {
  std::optional<double> kb;
  std::optional<double> delta1;
  std::optional<double> c_pi;
  std::vector<double> t_grid = {0.0, 0.5, 1.0, 1.5, 2.0};
  std::size_t outer = 1024;
  std::size_t inner = 256;
  std::string test_function = "quadratic";
  std::size_t stationary_particles = 10000;
  double relax_time = 20.0;
  std::size_t rt_trials = 1000;
  std::size_t rt_states = 16;
  double se_multiplier = 3.0;
};

struct DissipativitySettings {
  std::optional<DissipativityCert> cert;
  std::size_t trials = 100000;
  double rmax = 0.0;
  std::optional<std::size_t> particles;
};

/// Validated experiment description. Construction from JSON rejects unknown
/// keys, wrong types and out-of-range values with kSchema errors that name
/// the offending path.
class ExperimentConfig {
 public:
  static ExperimentConfig from_json(const nlohmann::json& j, std::optional<PipelineKind> pipeline = std::nullopt);
  static ExperimentConfig load(const std::filesystem::path& path, std::optional<PipelineKind> pipeline = std::nullopt);

  PipelineKind pipeline;
  std::uint64_t seed = 0;
  std::string output;
  IntegratorSettings integrator;
  ErgodicitySettings ergodicity;
  MeanFieldSettings mean_field;
  ChaosSettings chaos;
  HypoSettings hypo;
  DissipativitySettings dissipativity;

  const DriftSpec& drift() const { return *drift_; }
  const DiffusionSpec& diffusion() const { return *diffusion_; }
  /// The input document, as given.
  const nlohmann::json& source() const { return source_; }
  /// Normalized settings actually used, defaults filled in.
  nlohmann::json to_json() const;

 private:
  ExperimentConfig() = default;
  std::optional<DriftSpec> drift_;
  std::optional<DiffusionSpec> diffusion_;
  nlohmann::json source_;
};

struct AcceptanceCheck {
  std::string name;
  bool passed = false;
  nlohmann::json value;
  nlohmann::json bound;

  nlohmann::json to_json() const;
};

/// A file produced by a pipeline, held in memory until written.
struct Artifact {
  std::string path;  ///< relative to the output directory
  std::string content;
};

struct ExperimentReport {
  PipelineKind pipeline;
  bool passed = false;
  std::vector<AcceptanceCheck> checks;
  std::vector<std::string> warnings;
  nlohmann::json results;
  std::vector<Artifact> artifacts;

  nlohmann::json summary(const ExperimentConfig& cfg) const;
};

/// Runs the configured pipeline, writing data/*.csv, plots/*.svg and
/// summary.json under `out_dir`. Module errors are rethrown with the
/// pipeline name prefixed.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Pipelines without file output, for tests and the acceptance driver.
ExperimentReport compute_experiment(const ExperimentConfig& cfg);

/// Writes the report's CSV/SVG payload and summary.json.
void write_report(const ExperimentReport& report, const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace kergo
