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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kergo/audit.hpp"
#include "kergo/error.hpp"
#include "kergo/fit.hpp"
#include "kergo/gaussian.hpp"
#include "kergo/harness.hpp"
#include "kergo/rng.hpp"
#include "kergo/svg.hpp"

using namespace kergo;
using nlohmann::json;

namespace {

const std::filesystem::path kSourceDir = KERGO_SOURCE_DIR;

std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> t;
  for (int k = 0; lo + k * step <= hi + 1e-12; ++k) t.push_back(lo + k * step);
  return t;
}

ErrorCode code_of(const json& j, std::optional<PipelineKind> kind = std::nullopt) {
  try {
    (void)ExperimentConfig::from_json(j, kind);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("config was accepted");
  return ErrorCode::kSchema;
}

json d1_model(double a = 1.0, double gamma = 1.0) {
  return {{"drift", {{"dimension", 1}, {"linear_position", a}, {"friction", gamma}}},
          {"diffusion", {{"sigma", std::sqrt(2.0)}}}};
}

json small_classical() {
  return {{"pipeline", "ergodicity-classical"},
          {"seed", 11},
          {"model", d1_model()},
          {"integrator", {{"dt", 0.01}, {"horizon", 12}, {"snapshot_every", 0.25}}},
          {"ergodicity",
           {{"particles", 4000},
            {"initial_mean", {30.0, 0.0}},
            {"w2_mode", "gaussian-fit"},
            {"kl_mode", "gaussian-fit"},
            {"probes", {{"seed", 3}}}}}};
}

// Taylor series for e^M, independent of the library's propagator.
Mat expm_series(const Mat& m) {
  Mat term = Mat::Identity(m.rows(), m.cols());
  Mat sum = term;
  for (int k = 1; k < 60; ++k) {
    term = term * m / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

// Counts opening and closing tags; self-closing tags count as both.
bool tags_balanced(const std::string& s) {
  int depth = 0;
  for (std::size_t i = s.find('<'); i != std::string::npos; i = s.find('<', i + 1)) {
    const std::size_t close = s.find('>', i);
    if (close == std::string::npos) return false;
    if (s[i + 1] == '?' || s[i + 1] == '!') continue;
    if (s[i + 1] == '/') {
      if (--depth < 0) return false;
    } else if (s[close - 1] != '/') {
      ++depth;
    }
  }
  return depth == 0;
}

}  // namespace

TEST_CASE("fit_rate: exact exponential is recovered with zero residual") {
  const std::vector<double> t = grid(0.0, 10.0, 1.0);
  std::vector<double> v;
  for (double s : t) v.push_back(3.0 * std::exp(-0.7 * s));
  const RateFit f = fit_rate(t, v, 0.0);
  CHECK(f.lambda_hat == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.residual_rms < 1e-12);
  CHECK(f.n_points == 11);
  CHECK(f.t_lo < f.t_hi);
}

TEST_CASE("fit_rate: exact on random exponentials") {
  RngCursor rng(CounterRng(99, StreamPurpose::kProbe), 0);
  for (int trial = 0; trial < 50; ++trial) {
    const double lambda = 3.0 * rng.uniform() - 1.0;
    const double c = 0.1 + 10.0 * rng.uniform();
    const std::vector<double> t = grid(0.0, 5.0, 0.5);
    std::vector<double> v;
    for (double s : t) v.push_back(c * std::exp(-lambda * s));
    const RateFit f = fit_rate(t, v, 0.0);
    CHECK(f.lambda_hat == doctest::Approx(lambda).epsilon(1e-10).scale(1.0));
    CHECK(f.residual_rms < 1e-10);
  }
}

TEST_CASE("fit_rate: constant series has zero rate") {
  const std::vector<double> t = grid(0.0, 10.0, 1.0);
  const RateFit f = fit_rate(t, std::vector<double>(t.size(), 2.5), 0.0);
  CHECK(std::abs(f.lambda_hat) < 1e-14);
  CHECK(f.residual_rms < 1e-14);
}

TEST_CASE("fit_rate: points at or below the floor and outside the window are dropped") {
  const std::vector<double> t = grid(0.0, 10.0, 1.0);
  std::vector<double> v;
  for (double s : t) v.push_back(std::exp(-s));
  const RateFit f = fit_rate(t, v, std::exp(-6.5), FitWindow{1.0, 9.0});
  CHECK(f.n_points == 6);  // t = 1..6
  CHECK(f.t_lo == 1.0);
  CHECK(f.t_hi == 6.0);
  CHECK(f.lambda_hat == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> floors(t.size(), 0.0);
  floors[3] = 10.0;
  CHECK(fit_rate(t, v, floors).n_points == 10);
}

TEST_CASE("fit_rate: fewer than four points above the floor is an error") {
  const std::vector<double> t = grid(0.0, 10.0, 1.0);
  std::vector<double> v;
  for (double s : t) v.push_back(std::exp(-s));
  try {
    (void)fit_rate(t, v, std::exp(-2.5));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientPoints);
  }
  CHECK_THROWS_AS(fit_rate({0.0, 1.0, 2.0}, {1.0, 0.5, 0.25}, 0.0), Error);
  CHECK_THROWS_AS(fit_rate(t, std::vector<double>(3, 1.0), 0.0), Error);
}

TEST_CASE("fit_rate: oracle W2 curve of the d=1 model decays at the spectral rate") {
  // B = [[0, 1], [-1, -1]] has eigenvalues (-1 +- i sqrt 3) / 2.
  const LinearModel model(Mat::Identity(1, 1), 1.0, 2.0 * Mat::Identity(1, 1));
  const GaussianLaw mu = invariant_law(model);
  const GaussianLaw start(Vec::Constant(2, 5.0), 0.5 * Mat::Identity(2, 2));
  const double period = 2.0 * M_PI / (std::sqrt(3.0) / 2.0);
  const std::vector<double> t = grid(0.0, 25.0, 0.1);
  std::vector<double> w;
  for (double s : t) w.push_back(w2_gaussian(transition_law(model, start, s), mu));
  const RateFit f = fit_rate(t, w, 0.0, FitWindow{period, 25.0});
  CHECK(f.lambda_hat == doctest::Approx(0.5).epsilon(0.05));
  CHECK(f.t_lo >= period);
}

TEST_CASE("config: schema errors are reported before any compute") {
  json chaos = {{"pipeline", "chaos-scan"},
                {"model", d1_model()},
                {"chaos", {{"n_values", json::array()}}}};
  chaos["model"]["drift"]["interaction"] = {{"name", "linear_attraction"}, {"params", {0.02}}};
  CHECK(code_of(chaos) == ErrorCode::kSchema);

  chaos["chaos"]["n_values"] = {64, 32};
  CHECK(code_of(chaos) == ErrorCode::kSchema);

  json unknown = small_classical();
  unknown["ergodicity"]["particels"] = 100;
  try {
    (void)ExperimentConfig::from_json(unknown);
    FAIL("unknown key accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSchema);
    CHECK(std::string(e.what()).find("particels") != std::string::npos);
    CHECK(e.detail().at("path").get<std::string>().find("ergodicity") != std::string::npos);
  }

  CHECK(code_of(small_classical(), PipelineKind::kHypoVerify) == ErrorCode::kSchema);

  json missing = small_classical();
  missing.erase("model");
  CHECK(code_of(missing) == ErrorCode::kSchema);

  json bad_kernel = small_classical();
  bad_kernel["model"]["drift"]["interaction"] = {{"name", "gravity"}, {"params", {1.0}}};
  CHECK(code_of(bad_kernel) == ErrorCode::kSchema);

  json interacting = small_classical();
  interacting["model"]["drift"]["interaction"] = {{"name", "linear_attraction"}, {"params", {0.05}}};
  CHECK(is_input_error(code_of(interacting)));

  json bad_type = small_classical();
  bad_type["seed"] = "eleven";
  CHECK(code_of(bad_type) == ErrorCode::kSchema);

  json wrong_dim = small_classical();
  wrong_dim["ergodicity"]["initial_mean"] = {1.0, 2.0, 3.0};
  CHECK(is_input_error(code_of(wrong_dim)));
}

TEST_CASE("config: normalized form round-trips") {
  const ExperimentConfig cfg = ExperimentConfig::from_json(small_classical());
  const json norm = cfg.to_json();
  const ExperimentConfig again = ExperimentConfig::from_json(norm);
  CHECK(again.to_json() == norm);
  CHECK(norm.at("ergodicity").at("particles") == 4000);
  CHECK(norm.at("ergodicity").contains("floor_replicates"));
}

TEST_CASE("config: every shipped config loads") {
  int loaded = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kSourceDir / "configs")) {
    if (entry.path().extension() != ".json") continue;
    INFO(entry.path().string());
    CHECK_NOTHROW((void)ExperimentConfig::load(entry.path()));
    ++loaded;
  }
  CHECK(loaded >= 7);
}

TEST_CASE("pipeline names and exit-code mapping") {
  for (const std::string& name : pipeline_names())
    if (name != "check-dissipativity") CHECK(to_string(pipeline_from_string(name)) == name);
  CHECK(pipeline_from_string("check-dissipativity") == PipelineKind::kDissipativity);
  CHECK_THROWS_AS(pipeline_from_string("ergodicity"), Error);
  CHECK(is_input_error(ErrorCode::kSchema));
  CHECK(is_input_error(ErrorCode::kNotHurwitz));
  CHECK(is_input_error(ErrorCode::kIo));
  CHECK_FALSE(is_input_error(ErrorCode::kNonContraction));
  CHECK_FALSE(is_input_error(ErrorCode::kInsufficientPoints));
  CHECK(kExitPass == 0);
  CHECK(kExitAcceptanceFailure == 2);
  CHECK(kExitInputError == 3);
}

TEST_CASE("audit: invariant law as probe gives zero on both sides") {
  const LinearModel model(Mat::Identity(1, 1), 1.0, 2.0 * Mat::Identity(1, 1));
  const GaussianLaw mu = invariant_law(model);
  const AuditReport rep = talagrand_harnack_audit(model, 1.0, {{mu}});
  CHECK(rep.identity_zero);
  CHECK(rep.talagrand_violations == 0);
  CHECK(rep.poincare == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("audit: 100 random probes on the d=1 model, no Talagrand violations, stable c1") {
  const LinearModel model(Mat::Identity(1, 1), 1.0, 2.0 * Mat::Identity(1, 1));
  ProbeDesign design;
  design.seed = 5;
  const AuditReport rep = talagrand_harnack_audit(model, 1.0, design);
  CHECK(rep.probes == 400);
  CHECK(rep.talagrand_violations == 0);
  CHECK(rep.talagrand_worst_ratio <= 1.0);
  CHECK(rep.c1_per_set.size() == 4);
  CHECK(std::isfinite(rep.c1));
  CHECK(rep.c1_stable(0.1));
}

TEST_CASE("audit: mean-shift probes match the propagator norm") {
  // For nu = N(m, I) and mu = N(0, I): P_t nu = N(e^{tB} m, I), so
  // KL / W2^2 = |e^{tB} u|^2 / 2 for the unit direction u. Gaussian
  // Talagrand holds with ratio exactly 1/2.
  const LinearModel model(Mat::Identity(1, 1), 1.0, 2.0 * Mat::Identity(1, 1));
  Mat b(2, 2);
  b << 0.0, 1.0, -1.0, -1.0;
  Eigen::JacobiSVD<Mat> svd(expm_series(b));
  const double s_max = svd.singularValues()(0);
  const double mean_only = 0.5 * s_max * s_max;

  std::vector<GaussianLaw> set;
  for (int k = 0; k < 720; ++k) {
    const double a = M_PI * k / 720.0;
    Vec m(2);
    m << 0.3 * std::cos(a), 0.3 * std::sin(a);
    set.emplace_back(m, Mat::Identity(2, 2));
  }
  const AuditReport rep = talagrand_harnack_audit(model, 1.0, {set});
  CHECK(rep.c1_probe_max_per_set.at(0) == doctest::Approx(mean_only).epsilon(1e-4));
  CHECK(rep.c1_probe_max_per_set.at(0) <= mean_only * (1.0 + 1e-9));
  CHECK(rep.talagrand_worst_ratio == doctest::Approx(0.5).epsilon(1e-9));

  // Small covariance perturbations S = I + eps u u^T give
  // KL / W2^2 -> |e^{tB} u|^4, so the best constant is at least s_max^4.
  CHECK(rep.c1 >= s_max * s_max * s_max * s_max * (1.0 - 1e-3));
  CHECK(rep.c1 >= rep.c1_probe_max_per_set.at(0));
}

TEST_CASE("audit: the refined constant bounds every probe ratio") {
  const LinearModel model(Mat::Identity(1, 1), 1.0, 2.0 * Mat::Identity(1, 1));
  const GaussianLaw mu = invariant_law(model);
  ProbeDesign design;
  design.seed = 21;
  design.probes_per_set = 50;
  design.sets = 2;
  const AuditReport rep = talagrand_harnack_audit(model, 1.0, design);
  ProbeDesign fresh = design;
  fresh.seed = 22;
  fresh.probes_per_set = 2000;
  fresh.sets = 1;
  fresh.cov_scale = 0.6;
  double worst = 0.0;
  const auto probes = random_probe_sets(mu, fresh);
  for (const GaussianLaw& nu : probes[0]) {
    const double w = w2_gaussian(nu, mu);
    worst = std::max(worst, kl_gaussian(transition_law(model, nu, 1.0), mu) / (w * w));
  }
  CHECK(worst <= rep.c1 * (1.0 + 1e-9));
}

TEST_CASE("svg: well formed, drops unplottable points") {
  PlotSpec p;
  p.title = "decay <test> & more";
  p.x_label = "t";
  p.y_label = "value";
  p.log_y = true;
  p.series.push_back({"curve", {0, 1, 2, 3}, {1.0, 0.0, std::nan(""), 0.1}});
  p.series.push_back({"floor", {0, 3}, {0.05, 0.05}, true, false});
  const std::string svg = render_svg(p);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(tags_balanced(svg));
  CHECK(svg.find("nan") == std::string::npos);
  CHECK(svg.find("inf") == std::string::npos);
  CHECK(svg.find("<test>") == std::string::npos);
  CHECK(svg.find("curve") != std::string::npos);

  PlotSpec empty;
  CHECK(tags_balanced(render_svg(empty)));
}

TEST_CASE("pipeline: dissipativity falsifies b = +x with a witness") {
  const json j = {{"pipeline", "dissipativity"},
                  {"seed", 1},
                  {"model", d1_model(-1.0, 0.0)},
                  {"dissipativity", {{"trials", 2000}}}};
  const ExperimentReport rep = compute_experiment(ExperimentConfig::from_json(j));
  CHECK_FALSE(rep.passed);
  const json& w = rep.results.at("verdict").at("witness");
  CHECK(w.at("z").size() == 2);
  CHECK(w.at("zbar").size() == 2);
  CHECK(w.at("lhs").get<double>() > w.at("threshold").get<double>());
}

TEST_CASE("pipeline: dissipativity certifies b = -x - y with the analytic certificate") {
  const json j = {{"pipeline", "dissipativity"},
                  {"seed", 1},
                  {"model", d1_model()},
                  {"dissipativity", {{"trials", 2000}, {"cert", {{"theta", 0.25}, {"r", 1.0}, {"r0", 0.5}, {"R", 1.0}}}}}};
  const ExperimentReport rep = compute_experiment(ExperimentConfig::from_json(j));
  CHECK(rep.passed);
}

TEST_CASE("pipeline: classical run on the d=1 model doubles the rate in entropy") {
  const ExperimentConfig cfg = ExperimentConfig::from_json(small_classical());
  const ExperimentReport rep = compute_experiment(cfg);
  const json s = rep.summary(cfg);
  for (const char* key : {"pipeline", "seed", "passed", "checks", "warnings", "results", "config", "files"})
    CHECK(s.contains(key));
  const json& r = s.at("results");
  REQUIRE(r.contains("w2_rate"));
  REQUIRE(r.contains("kl_rate"));
  const double ratio = r.at("ratio").get<double>();
  CHECK(ratio >= 1.7);
  CHECK(ratio <= 2.3);
  CHECK(r.at("w2_rate").at("lambda_hat").get<double>() == doctest::Approx(0.5).epsilon(0.1));
  CHECK(r.at("oracle_rate").get<double>() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.passed);

  SUBCASE("identical config and seed give byte-identical artifacts") {
    const ExperimentReport again = compute_experiment(cfg);
    REQUIRE(again.artifacts.size() == rep.artifacts.size());
    for (std::size_t i = 0; i < rep.artifacts.size(); ++i) {
      CHECK(again.artifacts[i].path == rep.artifacts[i].path);
      CHECK(again.artifacts[i].content == rep.artifacts[i].content);
    }
  }

  SUBCASE("write_report lays out data, plots and summary") {
    const auto dir = std::filesystem::temp_directory_path() / "kergo_harness_report";
    std::filesystem::remove_all(dir);
    write_report(rep, cfg, dir);
    std::ifstream in(dir / "summary.json");
    REQUIRE(in.good());
    const json on_disk = json::parse(in);
    for (const auto& f : on_disk.at("files")) CHECK(std::filesystem::exists(dir / f.get<std::string>()));
    CHECK(std::filesystem::exists(dir / "data" / "w2_curve.csv"));
    CHECK(std::filesystem::exists(dir / "plots" / "kl_decay.svg"));
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("pipeline: a different seed changes the sampled curves") {
  json j = small_classical();
  j["ergodicity"]["particles"] = 1000;
  j["ergodicity"]["audit"] = false;
  const ExperimentReport a = compute_experiment(ExperimentConfig::from_json(j));
  j["seed"] = 12;
  const ExperimentReport b = compute_experiment(ExperimentConfig::from_json(j));
  CHECK(a.artifacts.at(0).content != b.artifacts.at(0).content);
}
