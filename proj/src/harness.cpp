#include "hris/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace hris {

using nlohmann::json;

// ---- config ----

SetupSpec ExperimentConfig::setup_spec(int setup) const {
  if (setup == 0) {
    if (!custom_setup) throw ConfigError("setup 0 needs custom_setup");
    return *custom_setup;
  }
  return SetupSpec::table(setup);
}

void ExperimentConfig::validate() const {
  if (setups.empty()) throw ConfigError("at least one setup is required");
  for (int s : setups) {
    if (s < 0 || s > 3) throw ConfigError("setup must be 1, 2, 3 or 0 (custom)");
    const SetupSpec spec = setup_spec(s);
    if (spec.n_active < 1 || spec.n_active > dims.n_ris) {
      throw ConfigError("active element count must lie in [1, N_R]");
    }
    if (spec.n_blocks < 1 || spec.n_beams < 1 || spec.n_bs_combiners < 1 || spec.n_rf_ris < 1 ||
        spec.n_rf_bs < 1) {
      throw ConfigError("setup fields must be positive");
    }
    if (spec.n_bs_combiners > dims.n_bs) throw ConfigError("more BS combiners than antennas");
    if (spec.n_beams > dims.n_ms && training.pilot == PilotKind::kTruncatedDft) {
      throw ConfigError("DFT pilots need T <= N_M");
    }
  }
  if (dims.n_bs < 2 || dims.n_ris < 2 || dims.n_ms < 2) throw ConfigError("arrays need >= 2 elements");
  if (n_paths_mr < 1 || n_paths_rb < 1) throw ConfigError("path counts must be positive");
  if (n_paths_mr >= std::min(dims.n_ris, dims.n_ms) || n_paths_rb >= std::min(dims.n_bs, dims.n_ris)) {
    throw ConfigError("path count must be below the array sizes");
  }
  if (!(separation_factor >= 0.0)) throw ConfigError("separation_factor must be nonnegative");
  const int n_min = std::min({dims.n_bs, dims.n_ris, dims.n_ms});
  if (std::max(n_paths_mr, n_paths_rb) >= 2 &&
      std::max(n_paths_mr, n_paths_rb) * separation_factor / n_min >= 1.0) {
    throw ConfigError("separation_factor too large for the path count");
  }
  geometry.validate();
  path_loss.validate();
  if (!std::isfinite(noise.density_dbm_per_hz) || !(noise.bandwidth_hz > 0.0)) {
    throw ConfigError("invalid noise model");
  }
  estimator.validate();
  if (phase_design.quantization_bits < 0 || phase_design.quantization_bits > 16) {
    throw ConfigError("quantization_bits must lie in [0, 16]");
  }
  if (p_t_sweep_dbm.empty()) throw ConfigError("p_t sweep must be nonempty");
  for (double p : p_t_sweep_dbm) {
    if (!std::isfinite(p)) throw ConfigError("p_t values must be finite");
  }
  if (n_trials < 1) throw ConfigError("n_trials must be at least 1");
}

namespace {

const char* pilot_name(PilotKind k) {
  return k == PilotKind::kTruncatedDft ? "dft" : "random";
}

PilotKind pilot_from(const std::string& s) {
  if (s == "dft") return PilotKind::kTruncatedDft;
  if (s == "random") return PilotKind::kRandomUnitModulus;
  throw ConfigError("unknown pilot kind '" + s + "'");
}

const char* placement_name(ActivePlacement p) {
  switch (p) {
    case ActivePlacement::kCyclic: return "cyclic";
    case ActivePlacement::kFixedUniform: return "fixed_uniform";
    case ActivePlacement::kFixedRandom: return "fixed_random";
    case ActivePlacement::kRandomPerBlock: return "random_per_block";
  }
  return "cyclic";
}

ActivePlacement placement_from(const std::string& s) {
  for (auto p : {ActivePlacement::kCyclic, ActivePlacement::kFixedUniform,
                 ActivePlacement::kFixedRandom, ActivePlacement::kRandomPerBlock}) {
    if (s == placement_name(p)) return p;
  }
  throw ConfigError("unknown active placement '" + s + "'");
}

json setup_to_json(const SetupSpec& s) {
  return {{"n_active", s.n_active},   {"n_rf_ris", s.n_rf_ris},
          {"n_blocks", s.n_blocks},   {"n_beams", s.n_beams},
          {"n_bs_combiners", s.n_bs_combiners}, {"n_rf_bs", s.n_rf_bs}};
}

// Reads `key` into `out` when present.
template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

Point2D point_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("points are [x, y]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

}  // namespace

void to_json(json& j, const ExperimentConfig& c) {
  j = json::object();
  j["setups"] = c.setups;
  if (c.custom_setup) j["custom_setup"] = setup_to_json(*c.custom_setup);
  j["dims"] = {{"n_bs", c.dims.n_bs}, {"n_ris", c.dims.n_ris}, {"n_ms", c.dims.n_ms}};
  j["n_paths_mr"] = c.n_paths_mr;
  j["n_paths_rb"] = c.n_paths_rb;
  j["separation_factor"] = c.separation_factor;
  j["geometry"] = {{"bs", {c.geometry.bs.x, c.geometry.bs.y}},
                   {"ris", {c.geometry.ris.x, c.geometry.ris.y}},
                   {"ms", {c.geometry.ms.x, c.geometry.ms.y}}};
  j["path_loss"] = {{"d0", c.path_loss.d0}, {"gamma", c.path_loss.gamma}, {"fc", c.path_loss.fc}};
  j["amplitude"] = c.amplitude == AmplitudeConvention::kInverse ? "inverse" : "attenuation";
  j["noise"] = {{"density_dbm_per_hz", c.noise.density_dbm_per_hz},
                {"bandwidth_hz", c.noise.bandwidth_hz}};
  j["noiseless"] = c.noiseless;
  j["training"] = {{"pilot", pilot_name(c.training.pilot)},
                   {"combiner", pilot_name(c.training.combiner)},
                   {"placement", placement_name(c.training.placement)}};
  const auto& s = c.estimator.solver;
  j["estimator"] = {{"reg_scale", c.estimator.reg_scale},
                    {"reg_floor", c.estimator.reg_floor},
                    {"solver",
                     {{"max_iters", s.max_iters},
                      {"abs_tol", s.abs_tol},
                      {"rel_tol", s.rel_tol},
                      {"reg_relative_tol", s.reg_relative_tol},
                      {"penalty", s.penalty},
                      {"adaptive_penalty", s.adaptive_penalty},
                      {"anderson_memory", s.anderson_memory},
                      {"adapt_every", s.adapt_every}}}};
  j["phase_design"] = {{"quantization_bits", c.phase_design.quantization_bits},
                       {"local_refinement", c.phase_design.local_refinement}};
  j["p_t_sweep_dbm"] = c.p_t_sweep_dbm;
  j["n_trials"] = c.n_trials;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["baseline_csv"] = c.baseline_csv;
}

void from_json(const json& j, ExperimentConfig& c) {
  check_keys(j,
             {"setups", "setup", "custom_setup", "dims", "n_paths_mr", "n_paths_rb", "n_paths",
              "separation_factor", "geometry", "path_loss", "amplitude", "noise", "noiseless",
              "training", "estimator", "phase_design", "p_t_sweep_dbm", "n_trials", "seed",
              "output_dir", "baseline_csv"},
             "config");
  if (j.contains("setup")) c.setups = {j.at("setup").get<int>()};
  read(j, "setups", c.setups);
  if (j.contains("custom_setup")) {
    const auto& s = j.at("custom_setup");
    check_keys(s, {"n_active", "n_rf_ris", "n_blocks", "n_beams", "n_bs_combiners", "n_rf_bs"},
               "custom_setup");
    SetupSpec spec;
    read(s, "n_active", spec.n_active);
    read(s, "n_rf_ris", spec.n_rf_ris);
    read(s, "n_blocks", spec.n_blocks);
    read(s, "n_beams", spec.n_beams);
    read(s, "n_bs_combiners", spec.n_bs_combiners);
    read(s, "n_rf_bs", spec.n_rf_bs);
    c.custom_setup = spec;
  }
  if (j.contains("dims")) {
    const auto& d = j.at("dims");
    check_keys(d, {"n_bs", "n_ris", "n_ms"}, "dims");
    read(d, "n_bs", c.dims.n_bs);
    read(d, "n_ris", c.dims.n_ris);
    read(d, "n_ms", c.dims.n_ms);
  }
  if (j.contains("n_paths")) c.n_paths_mr = c.n_paths_rb = j.at("n_paths").get<int>();
  read(j, "n_paths_mr", c.n_paths_mr);
  read(j, "n_paths_rb", c.n_paths_rb);
  read(j, "separation_factor", c.separation_factor);
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    check_keys(g, {"d_total", "d_x", "d_y", "bs", "ris", "ms"}, "geometry");
    if (g.contains("d_total") || g.contains("d_x") || g.contains("d_y")) {
      c.geometry = Geometry2D::from_offsets(g.value("d_total", 25.0), g.value("d_x", 10.0),
                                            g.value("d_y", 2.0));
    }
    if (g.contains("bs")) c.geometry.bs = point_from(g.at("bs"));
    if (g.contains("ris")) c.geometry.ris = point_from(g.at("ris"));
    if (g.contains("ms")) c.geometry.ms = point_from(g.at("ms"));
  }
  if (j.contains("path_loss")) {
    const auto& p = j.at("path_loss");
    check_keys(p, {"d0", "gamma", "fc"}, "path_loss");
    read(p, "d0", c.path_loss.d0);
    read(p, "gamma", c.path_loss.gamma);
    read(p, "fc", c.path_loss.fc);
  }
  if (j.contains("amplitude")) {
    const auto a = j.at("amplitude").get<std::string>();
    if (a == "attenuation") {
      c.amplitude = AmplitudeConvention::kAttenuation;
    } else if (a == "inverse") {
      c.amplitude = AmplitudeConvention::kInverse;
    } else {
      throw ConfigError("amplitude must be 'attenuation' or 'inverse'");
    }
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    check_keys(n, {"density_dbm_per_hz", "bandwidth_hz"}, "noise");
    read(n, "density_dbm_per_hz", c.noise.density_dbm_per_hz);
    read(n, "bandwidth_hz", c.noise.bandwidth_hz);
  }
  read(j, "noiseless", c.noiseless);
  if (j.contains("training")) {
    const auto& t = j.at("training");
    check_keys(t, {"pilot", "combiner", "placement"}, "training");
    if (t.contains("pilot")) c.training.pilot = pilot_from(t.at("pilot").get<std::string>());
    if (t.contains("combiner")) c.training.combiner = pilot_from(t.at("combiner").get<std::string>());
    if (t.contains("placement")) {
      c.training.placement = placement_from(t.at("placement").get<std::string>());
    }
  }
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    check_keys(e, {"reg_scale", "reg_floor", "solver"}, "estimator");
    read(e, "reg_scale", c.estimator.reg_scale);
    read(e, "reg_floor", c.estimator.reg_floor);
    if (e.contains("solver")) {
      const auto& s = e.at("solver");
      check_keys(s, {"max_iters", "abs_tol", "rel_tol", "reg_relative_tol", "penalty", "adaptive_penalty", "adapt_every",
                     "anderson_memory"},
                 "solver");
      auto& sc = c.estimator.solver;
      read(s, "max_iters", sc.max_iters);
      read(s, "abs_tol", sc.abs_tol);
      read(s, "rel_tol", sc.rel_tol);
      read(s, "reg_relative_tol", sc.reg_relative_tol);
      read(s, "penalty", sc.penalty);
      read(s, "adaptive_penalty", sc.adaptive_penalty);
      read(s, "anderson_memory", sc.anderson_memory);
      read(s, "adapt_every", sc.adapt_every);
    }
  }
  if (j.contains("phase_design")) {
    const auto& p = j.at("phase_design");
    check_keys(p, {"quantization_bits", "local_refinement"}, "phase_design");
    read(p, "quantization_bits", c.phase_design.quantization_bits);
    read(p, "local_refinement", c.phase_design.local_refinement);
  }
  read(j, "p_t_sweep_dbm", c.p_t_sweep_dbm);
  read(j, "n_trials", c.n_trials);
  read(j, "seed", c.seed);
  read(j, "output_dir", c.output_dir);
  read(j, "baseline_csv", c.baseline_csv);
  c.estimator.n_paths_mr = c.n_paths_mr;
  c.estimator.n_paths_rb = c.n_paths_rb;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg = j.get<ExperimentConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::vector<double> parse_sweep(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad sweep '" + text + "'");
    }
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3) throw ConfigError("sweep must be 'value' or 'start:step:stop'");
  const double start = parts[0], step = parts[1], stop = parts[2];
  if (!(step > 0.0) || stop < start) throw ConfigError("sweep needs step > 0 and stop >= start");
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
  for (long i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

// ---- trials ----

TrialSeeds trial_seeds(std::uint64_t seed, const TrialKey& key) {
  const auto trial = static_cast<std::uint64_t>(key.trial);
  const auto setup = static_cast<std::uint64_t>(key.setup);
  const auto power = std::bit_cast<std::uint64_t>(key.p_t_dbm);
  return {mix_seed({seed, 0x6368616eULL, trial}),
          mix_seed({seed, 0x73636864ULL, setup, trial}),
          mix_seed({seed, 0x6e6f6973ULL, setup, power, trial})};
}

namespace {

std::vector<double> freqs_of(const std::vector<double>& angles) {
  std::vector<double> f;
  f.reserve(angles.size());
  for (double a : angles) f.push_back(spatial_frequency(a));
  return f;
}

struct ErrorPair {
  double rad = 0.0;
  double freq = 0.0;
};

// Matches each estimated list to the truth independently.
ErrorPair angle_errors(const std::vector<double>& est, const std::vector<double>& truth) {
  FrequencyEstimate e{freqs_of(est), 0};
  FrequencyEstimate t{freqs_of(truth), 0};
  const auto perm = pair_and_order(e, t);
  ErrorPair out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = circular_distance(e.freqs[perm[i]], t.freqs[i]);
    out.freq += d * d;
    const double r = est[perm[i]] - truth[i];
    out.rad += r * r;
  }
  out.rad /= static_cast<double>(truth.size());
  out.freq /= static_cast<double>(truth.size());
  return out;
}

// Path-level matching on the joint (departure, arrival) frequency distance.
std::vector<int> match_paths(const PathParams& est, const PathParams& truth) {
  const auto n = static_cast<Eigen::Index>(truth.n_paths());
  RMatrix cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double a = circular_distance(spatial_frequency(truth.aod[i]), spatial_frequency(est.aod[k]));
      const double b = circular_distance(spatial_frequency(truth.aoa[i]), spatial_frequency(est.aoa[k]));
      cost(i, k) = a * a + b * b;
    }
  }
  return optimal_assignment(cost);
}

PathParams permuted(const PathParams& p, const std::vector<int>& perm) {
  PathParams out;
  for (int k : perm) {
    out.aod.push_back(p.aod[k]);
    out.aoa.push_back(p.aoa[k]);
    out.gains.push_back(p.gains[k]);
  }
  return out;
}

CVector gains_of(const PathParams& p) {
  return Eigen::Map<const CVector>(p.gains.data(), static_cast<Eigen::Index>(p.gains.size()));
}

}  // namespace

TrialMetrics run_trial(const ExperimentConfig& cfg, const TrialKey& key) {
  const TrialSeeds seeds = trial_seeds(cfg.seed, key);
  const auto ms = ArrayGeometry::ula(cfg.dims.n_ms);
  const auto ris = ArrayGeometry::ula(cfg.dims.n_ris);
  const auto bs = ArrayGeometry::ula(cfg.dims.n_bs);
  const double f = cfg.separation_factor;

  Rng channel_rng(seeds.channel);
  auto mr = sample_path_params(channel_rng, ris, ms, cfg.n_paths_mr, f / ris.n_elements,
                               f / ms.n_elements);
  auto rb = sample_path_params(channel_rng, bs, ris, cfg.n_paths_rb, f / bs.n_elements,
                               f / ris.n_elements);
  const auto real = ChannelRealization::from_params(ms, ris, bs, mr, rb);

  TrainingOptions options = cfg.training;
  options.pilot_power = dbm_to_watts(key.p_t_dbm);
  const auto training = make_training_config(cfg.dims, cfg.setup_spec(key.setup), options,
                                             seeds.schedule);
  const LinkBudget budget = link_budget(cfg.path_loss, cfg.geometry, cfg.amplitude);
  const double sigma2_model = cfg.noise.sigma2();
  const double sigma2 = cfg.noiseless ? 0.0 : sigma2_model;

  Rng noise_rng(seeds.noise);
  const auto ris_obs = receive_at_ris(real, training, budget.amp_ris, sigma2, noise_rng);
  const auto bs_obs = receive_at_bs(real, training, budget.amp_bs, sigma2, noise_rng);

  EstimatorConfig est = cfg.estimator;
  est.n_paths_mr = cfg.n_paths_mr;
  est.n_paths_rb = cfg.n_paths_rb;
  const auto s1 = estimate_stage1(ris_obs, training, sigma2, budget.amp_ris, est);
  const auto s2 = estimate_stage2(bs_obs, s1, training, sigma2, budget.amp_bs, est);

  TrialMetrics m;
  m.training_overhead = training_overhead(training);
  m.iterations_stage1 = s1.anm_diag.iterations;
  m.iterations_stage2 = s2.anm_diag.iterations;
  m.stage1_converged = s1.anm_diag.converged;
  m.stage2_converged = s2.anm_diag.converged;
  m.failed = s1.degenerate || s2.degenerate;
  m.failure = s1.degenerate ? "stage 1: " + s1.failure
                            : (s2.degenerate ? "stage 2: " + s2.failure : std::string());

  const auto e_theta_mr = angle_errors(s1.params_hat_mr.aod, mr.aod);
  const auto e_phi_mr = angle_errors(s1.params_hat_mr.aoa, mr.aoa);
  const auto e_theta_rb = angle_errors(s2.params_hat_rb.aod, rb.aod);
  const auto e_phi_rb = angle_errors(s2.params_hat_rb.aoa, rb.aoa);
  m.mse_theta_mr = e_theta_mr.rad;
  m.mse_phi_mr = e_phi_mr.rad;
  m.mse_theta_rb = e_theta_rb.rad;
  m.mse_phi_rb = e_phi_rb.rad;
  m.msf_theta_mr = e_theta_mr.freq;
  m.msf_phi_mr = e_phi_mr.freq;
  m.msf_theta_rb = e_theta_rb.freq;
  m.msf_phi_rb = e_phi_rb.freq;

  // Cascaded parameters compared path by path after matching each hop.
  const auto hat_mr = permuted(s1.params_hat_mr, match_paths(s1.params_hat_mr, mr));
  const auto hat_rb = permuted(s2.params_hat_rb, match_paths(s2.params_hat_rb, rb));
  const auto truth = cascaded_params(mr.aoa, rb.aod, gains_of(mr), gains_of(rb));
  const auto hat = cascaded_params(hat_mr.aoa, hat_rb.aod, gains_of(hat_mr), gains_of(hat_rb));
  const auto n_casc = static_cast<double>(truth.delta_vec.size());
  m.mse_delta = (hat.delta_vec - truth.delta_vec).squaredNorm() / n_casc;
  m.mse_rho_prod = (hat.rho_prod - truth.rho_prod).squaredNorm() / n_casc;
  for (Eigen::Index i = 0; i < truth.sine_diff.size(); ++i) {
    const double d = circular_distance(wrap_unit(0.5 * hat.sine_diff(i)),
                                       wrap_unit(0.5 * truth.sine_diff(i)));
    m.msf_delta += d * d / n_casc;
  }

  // Both designs share the estimate-derived phase matrix.
  LinkDesign design;
  design.omega = design_phase_matrix(s2.cascaded, ris.n_elements, cfg.phase_design);
  const auto bf_est = design_beamformers(s2.h_hat_rb, design.omega, s1.h_hat_mr);
  design.w_bs = bf_est.w_bs;
  design.f_ms = bf_est.f_ms;
  LinkDesign perfect = design;
  const auto bf_true = design_beamformers(real.h_rb, design.omega, real.h_mr);
  perfect.w_bs = bf_true.w_bs;
  perfect.f_ms = bf_true.f_ms;
  const double p_t = dbm_to_watts(key.p_t_dbm);
  m.se_est = spectral_efficiency(real.h_rb, real.h_mr, design, p_t, sigma2_model, budget.amp_bs);
  m.se_perfect = spectral_efficiency(real.h_rb, real.h_mr, perfect, p_t, sigma2_model, budget.amp_bs);
  return m;
}

const std::vector<MetricField>& metric_fields() {
  static const std::vector<MetricField> fields = {
      {"se_est", &TrialMetrics::se_est},
      {"se_perfect", &TrialMetrics::se_perfect},
      {"mse_theta_mr", &TrialMetrics::mse_theta_mr},
      {"mse_phi_mr", &TrialMetrics::mse_phi_mr},
      {"mse_theta_rb", &TrialMetrics::mse_theta_rb},
      {"mse_phi_rb", &TrialMetrics::mse_phi_rb},
      {"mse_delta", &TrialMetrics::mse_delta},
      {"mse_rho_prod", &TrialMetrics::mse_rho_prod},
      {"msf_theta_mr", &TrialMetrics::msf_theta_mr},
      {"msf_phi_mr", &TrialMetrics::msf_phi_mr},
      {"msf_theta_rb", &TrialMetrics::msf_theta_rb},
      {"msf_phi_rb", &TrialMetrics::msf_phi_rb},
      {"msf_delta", &TrialMetrics::msf_delta},
  };
  return fields;
}

// ---- aggregation ----

void RunningStats::add(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

void RunningStats::merge(const RunningStats& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double n = static_cast<double>(n_ + o.n_);
  const double d = o.mean_ - mean_;
  mean_ += d * static_cast<double>(o.n_) / n;
  m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
  n_ += o.n_;
}

double RunningStats::variance() const {
  return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1);
}

double RunningStats::standard_error() const {
  return n_ < 1 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_));
}

std::vector<TrialMetrics> run_cell(const ExperimentConfig& cfg, int setup, double p_t_dbm,
                                   Execution exec) {
  std::vector<TrialMetrics> out(static_cast<std::size_t>(cfg.n_trials));
  auto one = [&](int t) {
    try {
      out[t] = run_trial(cfg, {setup, p_t_dbm, t});
    } catch (const std::exception& e) {
      out[t] = TrialMetrics{};
      out[t].failed = true;
      out[t].failure = e.what();
    }
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int t = 0; t < cfg.n_trials; ++t) one(t);
  } else {
    for (int t = 0; t < cfg.n_trials; ++t) one(t);
  }
  return out;
}

CellReport aggregate(int setup, double p_t_dbm, const std::vector<TrialMetrics>& trials) {
  CellReport cell;
  cell.setup = setup;
  cell.p_t_dbm = p_t_dbm;
  cell.n_trials = static_cast<int>(trials.size());
  const auto& fields = metric_fields();
  cell.stats.assign(fields.size(), RunningStats{});
  for (const auto& t : trials) {
    if (t.failed) ++cell.n_failed;
    if (!t.converged()) {
      ++cell.n_nonconverged;
      continue;
    }
    for (std::size_t f = 0; f < fields.size(); ++f) cell.stats[f].add(t.*(fields[f].field));
  }
  return cell;
}

AggregateReport run_experiment(const ExperimentConfig& cfg, Execution exec,
                               const ProgressFn& progress) {
  cfg.validate();
  AggregateReport report;
  report.config = cfg;
  const auto start = std::chrono::steady_clock::now();
  for (int setup : cfg.setups) {
    for (double p : cfg.p_t_sweep_dbm) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto trials = run_cell(cfg, setup, p, exec);
      CellReport cell = aggregate(setup, p, trials);
      cell.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (progress) progress(cell);
      report.cells.push_back(std::move(cell));
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<CalibrationPoint> calibrate_reg_scale(const ExperimentConfig& cfg,
                                                  const std::vector<double>& scales,
                                                  double p_t_dbm, Execution exec) {
  if (scales.empty()) throw ConfigError("no candidate scales");
  std::vector<CalibrationPoint> out;
  for (double scale : scales) {
    ExperimentConfig c = cfg;
    c.estimator.reg_scale = scale;
    c.validate();
    const auto trials = run_cell(c, c.setups.front(), p_t_dbm, exec);
    CalibrationPoint point;
    point.scale = scale;
    RunningStats s;
    for (const auto& t : trials) {
      if (!t.converged()) continue;
      s.add(t.mse_theta_mr + t.mse_phi_mr + t.mse_theta_rb + t.mse_phi_rb);
    }
    point.angle_mse = s.mean();
    point.n_converged = static_cast<int>(s.count());
    out.push_back(point);
  }
  return out;
}

}  // namespace hris
