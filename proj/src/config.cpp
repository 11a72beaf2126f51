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

// Experiment configuration: parsing, validation and normalization.

#include <cmath>
#include <fstream>
#include <set>

#include "kergo/error.hpp"
#include "kergo/harness.hpp"

namespace kergo {

std::string to_string(PipelineKind kind) {
  switch (kind) {
    case PipelineKind::kErgodicityClassical: return "ergodicity-classical";
    case PipelineKind::kErgodicityMv: return "ergodicity-mv";
    case PipelineKind::kMvFixedPoint: return "mv-fixed-point";
    case PipelineKind::kChaosScan: return "chaos-scan";
    case PipelineKind::kHypoVerify: return "hypo-verify";
    case PipelineKind::kDissipativity: return "dissipativity";
  }
  return "unknown";
}

std::vector<std::string> pipeline_names() {
  return {"ergodicity-classical", "ergodicity-mv", "mv-fixed-point", "chaos-scan",
          "hypo-verify",          "dissipativity", "check-dissipativity"};
}

PipelineKind pipeline_from_string(const std::string& name) {
  if (name == "ergodicity-classical") return PipelineKind::kErgodicityClassical;
  if (name == "ergodicity-mv") return PipelineKind::kErgodicityMv;
  if (name == "mv-fixed-point") return PipelineKind::kMvFixedPoint;
  if (name == "chaos-scan") return PipelineKind::kChaosScan;
  if (name == "hypo-verify") return PipelineKind::kHypoVerify;
  if (name == "dissipativity" || name == "check-dissipativity") return PipelineKind::kDissipativity;
  throw Error(ErrorCode::kSchema, "unknown pipeline '" + name + "'");
}

bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSchema:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kMissingMeasure:
    case ErrorCode::kKbUnderdeclared:
    case ErrorCode::kNotHurwitz:
    case ErrorCode::kIo:
      return true;
    default:
      return false;
  }
}

std::string to_string(W2Mode mode) { return mode == W2Mode::kExact ? "exact" : "gaussian-fit"; }

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw Error(ErrorCode::kSchema, path + ": " + message, {{"path", path}});
}

// One JSON object being read; finish() rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "must be an object");
  }

  std::string at(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_[key].is_null();
  }

  double num(const std::string& key, double def) {
    if (!has(key)) return def;
    const json& v = j_[key];
    if (!v.is_number()) fail(at(key), "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(at(key), "must be finite");
    return x;
  }
  std::optional<double> opt_num(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return num(key, 0.0);
  }
  double positive(const std::string& key, double def) {
    const double x = num(key, def);
    if (!(x > 0.0)) fail(at(key), "must be > 0");
    return x;
  }
  double nonneg(const std::string& key, double def) {
    const double x = num(key, def);
    if (!(x >= 0.0)) fail(at(key), "must be >= 0");
    return x;
  }
  std::uint64_t u64(const std::string& key, std::uint64_t def) {
    if (!has(key)) return def;
    const json& v = j_[key];
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      fail(at(key), "must be a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::size_t count(const std::string& key, std::size_t def, std::size_t min = 1) {
    const std::uint64_t v = u64(key, def);
    if (v < min) fail(at(key), "must be >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
  }
  bool flag(const std::string& key, bool def) {
    if (!has(key)) return def;
    if (!j_[key].is_boolean()) fail(at(key), "must be a boolean");
    return j_[key].get<bool>();
  }
  std::string str(const std::string& key, const std::string& def, const std::vector<std::string>& allowed = {}) {
    if (!has(key)) return def;
    if (!j_[key].is_string()) fail(at(key), "must be a string");
    std::string s = j_[key].get<std::string>();
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(at(key), "'" + s + "' is not one of: " + list);
    }
    return s;
  }
  std::vector<double> nums(const std::string& key, std::vector<double> def) {
    if (!has(key)) return def;
    const json& v = j_[key];
    if (!v.is_array()) fail(at(key), "must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>()))
        fail(at(key) + "/" + std::to_string(i), "must be a finite number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }
  std::vector<std::size_t> counts(const std::string& key) {
    if (!has(key)) return {};
    const json& v = j_[key];
    if (!v.is_array()) fail(at(key), "must be an array of positive integers");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer() || v[i].get<std::int64_t>() < 1)
        fail(at(key) + "/" + std::to_string(i), "must be a positive integer");
      out.push_back(v[i].get<std::size_t>());
    }
    return out;
  }
  Vec vec(const std::string& key, int size) {
    const std::vector<double> v = nums(key, {});
    if (!has(key)) return Vec();
    if (static_cast<int>(v.size()) != size) fail(at(key), "must have " + std::to_string(size) + " entries");
    return Eigen::Map<const Vec>(v.data(), size);
  }
  std::optional<Mat> mat(const std::string& key, int size) {
    if (!has(key)) return std::nullopt;
    const json& v = j_[key];
    if (!v.is_array() || static_cast<int>(v.size()) != size) fail(at(key), "must be a " + std::to_string(size) + "x" + std::to_string(size) + " matrix");
    Mat m(size, size);
    for (int r = 0; r < size; ++r) {
      if (!v[r].is_array() || static_cast<int>(v[r].size()) != size) fail(at(key), "rows must have " + std::to_string(size) + " entries");
      for (int c = 0; c < size; ++c) {
        if (!v[r][c].is_number()) fail(at(key), "entries must be numbers");
        m(r, c) = v[r][c].get<double>();
      }
    }
    return m;
  }
  std::optional<Section> sub(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return Section(j_[key], at(key));
  }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_[key];
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(at(key), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_fit(Section s, FitSettings& f) {
  f.t_lo = s.nonneg("t_lo", f.t_lo);
  f.t_hi = s.opt_num("t_hi");
  if (f.t_hi && *f.t_hi <= f.t_lo) fail(s.at("t_hi"), "must exceed t_lo");
  f.floor_factor = s.positive("floor_factor", f.floor_factor);
  s.finish();
}

void parse_probes(Section s, ProbeDesign& p) {
  p.probes_per_set = s.count("probes_per_set", p.probes_per_set);
  p.sets = s.count("sets", p.sets);
  p.mean_scale = s.nonneg("mean_scale", p.mean_scale);
  p.cov_scale = s.nonneg("cov_scale", p.cov_scale);
  p.seed = s.u64("seed", p.seed);
  s.finish();
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path, std::optional<PipelineKind> pipeline) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchema, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(j, pipeline);
}

ExperimentConfig ExperimentConfig::from_json(const json& j, std::optional<PipelineKind> pipeline) {
  ExperimentConfig cfg;
  cfg.source_ = j;
  Section top(j, "");
  top.str("description", "");
  const std::string named = top.str("pipeline", "", pipeline_names());
  if (!named.empty() && pipeline && pipeline_from_string(named) != *pipeline)
    fail("/pipeline", "config is for '" + named + "' but '" + to_string(*pipeline) + "' was requested");
  if (!pipeline && named.empty()) fail("/pipeline", "missing (or pass the pipeline on the command line)");
  cfg.pipeline = pipeline ? *pipeline : pipeline_from_string(named);
  cfg.seed = top.u64("seed", 0);
  cfg.output = top.str("output", "");

  {
    auto model = top.sub("model");
    if (!model) fail("/model", "required");
    auto drift = model->sub("drift");
    if (!drift) fail("/model/drift", "required");
    for (const char* k : {"dimension", "linear_position", "friction", "perturbation", "interaction", "K_b"}) drift->has(k);
    drift->finish();
    cfg.drift_ = DriftSpec::from_json(model->raw("drift"));
    const int d = cfg.drift_->dim();
    auto diff = model->sub("diffusion");
    if (!diff) fail("/model/diffusion", "required");
    for (const char* k : {"sigma", "delta1", "delta2"}) diff->has(k);
    diff->finish();
    cfg.diffusion_ = DiffusionSpec::from_json(model->raw("diffusion"), d);
    model->finish();
  }
  const int d = cfg.drift_->dim();

  if (auto s = top.sub("integrator")) {
    IntegratorSettings& it = cfg.integrator;
    it.scheme = scheme_from_string(s->str("scheme", to_string(it.scheme), {"euler-maruyama", "kinetic-splitting"}));
    it.dt = s->positive("dt", it.dt);
    it.horizon = s->positive("horizon", it.horizon);
    it.snapshot_every = s->positive("snapshot_every", it.snapshot_every);
    it.allow_large_step = s->flag("allow_large_step", it.allow_large_step);
    if (it.dt > it.horizon) fail(s->at("dt"), "must not exceed the horizon");
    s->finish();
  }

  if (auto s = top.sub("ergodicity")) {
    ErgodicitySettings& e = cfg.ergodicity;
    e.particles = s->count("particles", e.particles, 8);
    e.initial_mean = s->vec("initial_mean", 2 * d);
    e.initial_cov = s->mat("initial_cov", 2 * d);
    e.w2_mode = s->str("w2_mode", "exact", {"exact", "gaussian-fit"}) == "exact" ? W2Mode::kExact : W2Mode::kGaussianFit;
    e.w2_points = s->count("w2_points", e.w2_points, 8);
    e.kl_mode = kl_mode_from_string(s->str("kl_mode", to_string(e.kl_mode), {"knn", "gaussian-fit"}));
    e.kl_neighbors = static_cast<int>(s->count("kl_neighbors", static_cast<std::size_t>(e.kl_neighbors)));
    if (auto f = s->sub("fit")) parse_fit(*f, e.fit);
    e.floor_replicates = s->count("floor_replicates", e.floor_replicates);
    e.rate_tolerance = s->positive("rate_tolerance", e.rate_tolerance);
    const std::vector<double> band = s->nums("ratio_band", {e.ratio_lo, e.ratio_hi});
    if (band.size() != 2 || band[0] >= band[1]) fail(s->at("ratio_band"), "must be [lo, hi] with lo < hi");
    e.ratio_lo = band[0];
    e.ratio_hi = band[1];
    e.reference_horizon = s->nonneg("reference_horizon", e.reference_horizon);
    e.audit = s->flag("audit", e.audit);
    if (auto p = s->sub("probes")) parse_probes(*p, e.probes);
    e.audit_time = s->positive("audit_time", e.audit_time);
    s->finish();
  }

  if (auto s = top.sub("mean_field")) {
    MeanFieldSettings& m = cfg.mean_field;
    m.particles = s->count("particles", m.particles, 8);
    m.tol = s->positive("tol", m.tol);
    m.max_iter = s->count("max_iter", m.max_iter);
    m.relax_time = s->nonneg("relax_time", m.relax_time);
    m.initial_mean = s->vec("initial_mean", 2 * d);
    m.cov_tolerance = s->positive("cov_tolerance", m.cov_tolerance);
    s->finish();
  }

  if (auto s = top.sub("chaos")) {
    ChaosSettings& c = cfg.chaos;
    c.n_values = s->counts("n_values");
    c.t_stat = s->positive("t_stat", c.t_stat);
    c.replicates = s->count("replicates", c.replicates);
    c.interaction_strengths = s->nums("interaction_strengths", c.interaction_strengths);
    if (c.interaction_strengths.empty()) fail(s->at("interaction_strengths"), "must not be empty");
    c.kernel = s->str("kernel", cfg.drift_->has_interaction() ? cfg.drift_->interaction()->name() : c.kernel,
                      interaction_names());
    c.rate_dimension = static_cast<int>(s->u64("rate_dimension", 0));
    const std::vector<double> band = s->nums("slope_band", {c.slope_lo, c.slope_hi});
    if (band.size() != 2 || band[0] >= band[1]) fail(s->at("slope_band"), "must be [lo, hi] with lo < hi");
    c.slope_lo = band[0];
    c.slope_hi = band[1];
    c.factor_bound = s->positive("factor_bound", c.factor_bound);
    if (c.factor_bound < 1.0) fail(s->at("factor_bound"), "must be >= 1");
    s->finish();
  }

  if (auto s = top.sub("hypo")) {
    HypoSettings& h = cfg.hypo;
    h.kb = s->opt_num("kb");
    if (h.kb && *h.kb < 0.0) fail(s->at("kb"), "must be >= 0");
    h.delta1 = s->opt_num("delta1");
    if (h.delta1 && *h.delta1 <= 0.0) fail(s->at("delta1"), "must be > 0");
    h.c_pi = s->opt_num("c_pi");
    if (h.c_pi && *h.c_pi <= 0.0) fail(s->at("c_pi"), "must be > 0");
    h.t_grid = s->nums("t_grid", h.t_grid);
    if (h.t_grid.empty()) fail(s->at("t_grid"), "must not be empty");
    for (std::size_t i = 0; i < h.t_grid.size(); ++i)
      if (h.t_grid[i] < 0.0 || (i > 0 && h.t_grid[i] <= h.t_grid[i - 1]))
        fail(s->at("t_grid"), "must be non-negative and strictly increasing");
    h.outer = s->count("outer", h.outer, 2);
    h.inner = s->count("inner", h.inner, 2);
    h.test_function = s->str("test_function", h.test_function, {"linear", "quadratic", "bounded"});
    h.stationary_particles = s->count("stationary_particles", h.stationary_particles, 2);
    h.relax_time = s->positive("relax_time", h.relax_time);
    h.rt_trials = s->count("rt_trials", h.rt_trials);
    h.rt_states = s->count("rt_states", h.rt_states);
    h.se_multiplier = s->nonneg("se_multiplier", h.se_multiplier);
    s->finish();
  }

  if (auto s = top.sub("dissipativity")) {
    DissipativitySettings& ds = cfg.dissipativity;
    if (auto c = s->sub("cert")) {
      if (!c->has("theta")) fail(c->at("theta"), "required");
      if (!c->has("R")) fail(c->at("R"), "required");
      const double theta = c->positive("theta", 1.0);
      const double r = c->num("r", 1.0), r0 = c->num("r0", 0.5);
      const double radius = c->positive("R", 1.0);
      c->finish();
      try {
        ds.cert = DissipativityCert(theta, r, r0, radius);
      } catch (const Error& e) {
        fail(s->at("cert"), e.what());
      }
    }
    ds.trials = s->count("trials", ds.trials);
    ds.rmax = s->nonneg("rmax", ds.rmax);
    if (s->has("particles")) ds.particles = s->count("particles", 1);
    s->finish();
  }
  top.finish();

  // Pipeline-specific requirements, checked before any compute.
  switch (cfg.pipeline) {
    case PipelineKind::kErgodicityClassical:
      if (cfg.drift_->has_interaction()) fail("/model/drift/interaction", "use ergodicity-mv for interacting drifts");
      break;
    case PipelineKind::kErgodicityMv:
    case PipelineKind::kMvFixedPoint:
      if (!cfg.drift_->has_interaction()) fail("/model/drift/interaction", "required by " + to_string(cfg.pipeline));
      break;
    case PipelineKind::kChaosScan:
      if (!j.contains("chaos")) fail("/chaos", "required by chaos-scan");
      if (cfg.chaos.n_values.empty()) fail("/chaos/n_values", "must list at least one N");
      for (std::size_t k = 1; k < cfg.chaos.n_values.size(); ++k)
        if (cfg.chaos.n_values[k] <= cfg.chaos.n_values[k - 1]) fail("/chaos/n_values", "must be strictly increasing");
      break;
    case PipelineKind::kHypoVerify:
      if (!cfg.hypo.c_pi && !cfg.drift_->is_linear())
        fail("/hypo/c_pi", "required when the invariant law has no closed form");
      break;
    case PipelineKind::kDissipativity:
      break;
  }
  return cfg;
}

json ExperimentConfig::to_json() const {
  auto vec_json = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json j;
  j["pipeline"] = to_string(pipeline);
  j["seed"] = seed;
  j["model"] = {{"drift", drift_->to_json()}, {"diffusion", diffusion_->to_json()}};
  j["integrator"] = {{"scheme", to_string(integrator.scheme)},
                     {"dt", integrator.dt},
                     {"horizon", integrator.horizon},
                     {"snapshot_every", integrator.snapshot_every},
                     {"allow_large_step", integrator.allow_large_step}};
  switch (pipeline) {
    case PipelineKind::kErgodicityClassical:
    case PipelineKind::kErgodicityMv: {
      const ErgodicitySettings& e = ergodicity;
      json fit = {{"t_lo", e.fit.t_lo}, {"floor_factor", e.fit.floor_factor}};
      if (e.fit.t_hi) fit["t_hi"] = *e.fit.t_hi;
      j["ergodicity"] = {{"particles", e.particles},
                         {"initial_mean", vec_json(e.initial_mean)},
                         {"w2_mode", to_string(e.w2_mode)},
                         {"w2_points", e.w2_points},
                         {"kl_mode", to_string(e.kl_mode)},
                         {"kl_neighbors", e.kl_neighbors},
                         {"fit", fit},
                         {"floor_replicates", e.floor_replicates},
                         {"rate_tolerance", e.rate_tolerance},
                         {"ratio_band", {e.ratio_lo, e.ratio_hi}},
                         {"reference_horizon", e.reference_horizon},
                         {"audit", e.audit},
                         {"probes", e.probes.to_json()},
                         {"audit_time", e.audit_time}};
      if (pipeline == PipelineKind::kErgodicityClassical) break;
      [[fallthrough]];
    }
    case PipelineKind::kMvFixedPoint:
      j["mean_field"] = {{"particles", mean_field.particles},     {"tol", mean_field.tol},
                         {"max_iter", mean_field.max_iter},       {"relax_time", mean_field.relax_time},
                         {"initial_mean", vec_json(mean_field.initial_mean)},
                         {"cov_tolerance", mean_field.cov_tolerance}};
      break;
    case PipelineKind::kChaosScan:
      j["chaos"] = {{"n_values", chaos.n_values},
                    {"t_stat", chaos.t_stat},
                    {"replicates", chaos.replicates},
                    {"interaction_strengths", chaos.interaction_strengths},
                    {"kernel", chaos.kernel},
                    {"rate_dimension", chaos.rate_dimension},
                    {"slope_band", {chaos.slope_lo, chaos.slope_hi}},
                    {"factor_bound", chaos.factor_bound}};
      break;
    case PipelineKind::kHypoVerify: {
      json h = {{"t_grid", hypo.t_grid},
                {"outer", hypo.outer},
                {"inner", hypo.inner},
                {"test_function", hypo.test_function},
                {"stationary_particles", hypo.stationary_particles},
                {"relax_time", hypo.relax_time},
                {"rt_trials", hypo.rt_trials},
                {"rt_states", hypo.rt_states},
                {"se_multiplier", hypo.se_multiplier}};
      if (hypo.kb) h["kb"] = *hypo.kb;
      if (hypo.delta1) h["delta1"] = *hypo.delta1;
      if (hypo.c_pi) h["c_pi"] = *hypo.c_pi;
      j["hypo"] = h;
      break;
    }
    case PipelineKind::kDissipativity: {
      json ds = {{"trials", dissipativity.trials}, {"rmax", dissipativity.rmax}};
      if (const auto& c = dissipativity.cert)
        ds["cert"] = {{"theta", c->theta}, {"r", c->r}, {"r0", c->r0}, {"R", c->radius}};
      if (dissipativity.particles) ds["particles"] = *dissipativity.particles;
      j["dissipativity"] = ds;
      break;
    }
  }
  return j;
}

}  // namespace kergo
