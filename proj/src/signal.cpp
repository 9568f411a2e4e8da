#include "hris/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "json.hpp"

namespace hris {

double NoiseModel::sigma2() const {
  const double dbm = density_dbm_per_hz + 10.0 * std::log10(bandwidth_hz);
  return std::pow(10.0, (dbm - 30.0) / 10.0);
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

SetupSpec SetupSpec::table(int index) {
  switch (index) {
    case 1: return SetupSpec{8, 8, 5, 8, 8, 8};
    case 2: return SetupSpec{4, 4, 5, 8, 8, 8};
    case 3: return SetupSpec{2, 2, 5, 8, 8, 8};
    default: throw ConfigError("unknown setup " + std::to_string(index));
  }
}

namespace {

CMatrix unitary_dft(int n) {
  CMatrix f(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) f(r, c) = std::polar(scale, -2.0 * kPi * r * c / n);
  }
  return f;
}

// Columns with unit norm.
CMatrix make_columns(PilotKind kind, int rows, int cols, Rng& rng) {
  if (kind == PilotKind::kTruncatedDft) return unitary_dft(rows).leftCols(cols);
  CMatrix m(rows, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = scale * random_phase(rng);
  }
  return m;
}

std::vector<std::vector<int>> make_active_sets(ActivePlacement placement, int n_ris, int m,
                                               int n_blocks, Rng& rng) {
  std::vector<std::vector<int>> sets(n_blocks);
  auto random_subset = [&] {
    std::vector<int> all(n_ris);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<int> s(all.begin(), all.begin() + m);
    std::sort(s.begin(), s.end());
    return s;
  };
  switch (placement) {
    case ActivePlacement::kCyclic:
      for (int k = 0; k < n_blocks; ++k) {
        for (int i = 0; i < m; ++i) sets[k].push_back((k * m + i) % n_ris);
        std::sort(sets[k].begin(), sets[k].end());
      }
      break;
    case ActivePlacement::kFixedUniform: {
      std::vector<int> s;
      for (int i = 0; i < m; ++i) s.push_back(static_cast<int>((static_cast<long>(i) * n_ris) / m));
      std::fill(sets.begin(), sets.end(), s);
      break;
    }
    case ActivePlacement::kFixedRandom: {
      const auto s = random_subset();
      std::fill(sets.begin(), sets.end(), s);
      break;
    }
    case ActivePlacement::kRandomPerBlock:
      for (auto& s : sets) s = random_subset();
      break;
  }
  return sets;
}

}  // namespace

int TrainingConfig::n_active() const {
  return active_sets.empty() ? 0 : static_cast<int>(active_sets.front().size());
}

CMatrix TrainingConfig::selection(int block) const {
  const auto& set = active_sets.at(block);
  CMatrix w = CMatrix::Zero(static_cast<Eigen::Index>(set.size()), n_ris);
  for (std::size_t i = 0; i < set.size(); ++i) w(static_cast<Eigen::Index>(i), set[i]) = 1.0;
  return w;
}

CMatrix TrainingConfig::stacked_selection() const {
  const int m = n_active();
  CMatrix w(static_cast<Eigen::Index>(m) * n_blocks, n_ris);
  for (int k = 0; k < n_blocks; ++k) w.middleRows(static_cast<Eigen::Index>(k) * m, m) = selection(k);
  return w;
}

void TrainingConfig::validate() const {
  if (n_blocks < 1 || n_beams < 1) throw ConfigError("need at least one block and one beam");
  if (static_cast<int>(active_sets.size()) != n_blocks ||
      static_cast<int>(phase_schedule.size()) != n_blocks) {
    throw ConfigError("per-block schedule length differs from block count");
  }
  if (pilot.cols() != n_beams) throw ConfigError("pilot column count differs from T");
  const int m = n_active();
  if (m > n_ris) throw ConfigError("more active elements than RIS elements");
  if (n_rf_ris < 1 || n_rf_bs < 1) throw ConfigError("RF chain counts must be positive");
  for (Eigen::Index c = 0; c < pilot.cols(); ++c) {
    if (std::abs(pilot.col(c).squaredNorm() - pilot_power) > 1e-9 * std::max(1.0, pilot_power)) {
      throw ConfigError("pilot column power differs from P_t");
    }
  }
  for (Eigen::Index c = 0; c < bs_combiner.cols(); ++c) {
    if (std::abs(bs_combiner.col(c).norm() - 1.0) > 1e-9) {
      throw ConfigError("combiner columns must have unit norm");
    }
  }
  for (int k = 0; k < n_blocks; ++k) {
    const auto& set = active_sets[k];
    if (static_cast<int>(set.size()) != m) throw ConfigError("active-set size varies by block");
    const auto& omega = phase_schedule[k];
    if (omega.size() != n_ris) throw ConfigError("phase matrix size differs from N_R");
    std::vector<bool> active(n_ris, false);
    for (int i : set) {
      if (i < 0 || i >= n_ris) throw ConfigError("active index out of range");
      if (active[i]) throw ConfigError("duplicate active index");
      active[i] = true;
    }
    for (int i = 0; i < n_ris; ++i) {
      const double mag = std::abs(omega.diagonal()(i));
      if (active[i] ? mag != 0.0 : std::abs(mag - 1.0) > 1e-9) {
        throw ConfigError("phase schedule must be zero on active and unit-modulus on passive elements");
      }
    }
  }
}

TrainingConfig make_training_config(const SystemDims& dims, const SetupSpec& setup,
                                    const TrainingOptions& options, std::uint64_t seed) {
  if (setup.n_active < 0 || setup.n_active > dims.n_ris) {
    throw ConfigError("active element count M must lie in [0, N_R]");
  }
  if (setup.n_beams < 1 || setup.n_beams > dims.n_ms) throw ConfigError("T must lie in [1, N_M]");
  if (setup.n_bs_combiners < 1 || setup.n_bs_combiners > dims.n_bs) {
    throw ConfigError("N_C,B must lie in [1, N_B]");
  }
  if (setup.n_blocks < 1) throw ConfigError("K must be positive");
  if (!(options.pilot_power > 0.0)) throw ConfigError("pilot power must be positive");

  Rng rng(seed);
  TrainingConfig cfg;
  cfg.n_blocks = setup.n_blocks;
  cfg.n_beams = setup.n_beams;
  cfg.n_rf_ris = setup.n_rf_ris;
  cfg.n_rf_bs = setup.n_rf_bs;
  cfg.n_ris = dims.n_ris;
  cfg.pilot_power = options.pilot_power;
  cfg.pilot = std::sqrt(options.pilot_power) *
              make_columns(options.pilot, dims.n_ms, setup.n_beams, rng);
  cfg.bs_combiner = make_columns(options.combiner, dims.n_bs, setup.n_bs_combiners, rng);
  cfg.active_sets =
      make_active_sets(options.placement, dims.n_ris, setup.n_active, setup.n_blocks, rng);
  for (int k = 0; k < setup.n_blocks; ++k) {
    CVector diag(dims.n_ris);
    for (int i = 0; i < dims.n_ris; ++i) diag(i) = random_phase(rng);
    for (int i : cfg.active_sets[k]) diag(i) = 0.0;
    cfg.phase_schedule.emplace_back(std::move(diag));
  }
  cfg.validate();
  return cfg;
}

CMatrix assemble_u(const CMatrix& h_mr, const TrainingConfig& cfg) {
  if (h_mr.rows() != cfg.n_ris || h_mr.cols() != cfg.pilot.rows()) {
    throw DomainError("channel dimensions differ from training configuration");
  }
  const CMatrix hx = h_mr * cfg.pilot;
  const Eigen::Index t = cfg.n_beams;
  CMatrix u(cfg.n_ris, t * cfg.n_blocks);
  for (int k = 0; k < cfg.n_blocks; ++k) {
    u.middleCols(k * t, t) = cfg.phase_schedule[k].diagonal().asDiagonal() * hx;
  }
  return u;
}

RisObservation receive_at_ris(const ChannelRealization& real, const TrainingConfig& cfg,
                              double beta1, double sigma2, Rng& rng) {
  if (real.h_mr.rows() != cfg.n_ris || real.h_mr.cols() != cfg.pilot.rows()) {
    throw DomainError("channel dimensions differ from training configuration");
  }
  const int m = cfg.n_active();
  const Eigen::Index t = cfg.n_beams;
  const CMatrix hx = beta1 * real.h_mr * cfg.pilot;
  RisObservation obs;
  obs.y_h.resize(static_cast<Eigen::Index>(m) * cfg.n_blocks, t);
  for (int k = 0; k < cfg.n_blocks; ++k) {
    const auto& set = cfg.active_sets[k];
    for (int i = 0; i < m; ++i) obs.y_h.row(static_cast<Eigen::Index>(k) * m + i) = hx.row(set[i]);
    // Selected rows of i.i.d. noise are themselves i.i.d.
    obs.y_h.middleRows(static_cast<Eigen::Index>(k) * m, m) += complex_normal_matrix(rng, m, t, sigma2);
  }
  obs.selection = cfg.stacked_selection();
  return obs;
}

BsObservation receive_at_bs(const ChannelRealization& real, const TrainingConfig& cfg,
                            double beta2, double sigma2, Rng& rng) {
  if (real.h_rb.cols() != cfg.n_ris || real.h_rb.rows() != cfg.bs_combiner.rows()) {
    throw DomainError("channel dimensions differ from training configuration");
  }
  BsObservation obs;
  obs.u_true = assemble_u(real.h_mr, cfg);
  const CMatrix wh = cfg.bs_combiner.adjoint();
  obs.y = beta2 * wh * real.h_rb * obs.u_true;
  const Eigen::Index t = cfg.n_beams;
  for (int k = 0; k < cfg.n_blocks; ++k) {
    const CMatrix z = complex_normal_matrix(rng, real.h_rb.rows(), t, sigma2);
    obs.y.middleCols(k * t, t) += wh * z;
  }
  return obs;
}

std::vector<CMatrix> receive_passive(const ChannelRealization& real,
                                     std::span<const PassiveBlock> blocks, double beta2,
                                     double sigma2, Rng& rng) {
  std::vector<CMatrix> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) {
    if (b.pilot.rows() != real.h_mr.cols() || b.combiner.rows() != real.h_rb.rows() ||
        b.omega.size() != real.ris.n_elements) {
      throw DomainError("passive block dimensions differ from channel");
    }
    const CMatrix wh = b.combiner.adjoint();
    CMatrix y = beta2 * wh * cascaded_channel(real, b.omega) * b.pilot;
    y += wh * complex_normal_matrix(rng, real.h_rb.rows(), b.pilot.cols(), sigma2);
    out.push_back(std::move(y));
  }
  return out;
}

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

int training_overhead(const TrainingConfig& cfg) {
  return cfg.n_blocks * cfg.n_beams * ceil_div(cfg.n_bs_combiners(), cfg.n_rf_bs) *
         ceil_div(cfg.n_active(), cfg.n_rf_ris);
}

int training_overhead(const SetupSpec& s) {
  return s.n_blocks * s.n_beams * ceil_div(s.n_bs_combiners, s.n_rf_bs) *
         ceil_div(s.n_active, s.n_rf_ris);
}

// ---------------------------------------------------------------------------
// JSON: complex numbers are [re, im] pairs, matrices are arrays of rows.

namespace {

nlohmann::json matrix_json(const CMatrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

CMatrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j.at(0).size());
  CMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols) throw ConfigError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& z = j.at(r).at(c);
      m(r, c) = Complex(z.at(0).get<double>(), z.at(1).get<double>());
    }
  }
  return m;
}

}  // namespace

void to_json(nlohmann::json& j, const TrainingConfig& cfg) {
  j = nlohmann::json::object();
  j["n_blocks"] = cfg.n_blocks;
  j["n_beams"] = cfg.n_beams;
  j["n_rf_ris"] = cfg.n_rf_ris;
  j["n_rf_bs"] = cfg.n_rf_bs;
  j["n_ris"] = cfg.n_ris;
  j["pilot_power"] = cfg.pilot_power;
  j["pilot"] = matrix_json(cfg.pilot);
  j["bs_combiner"] = matrix_json(cfg.bs_combiner);
  j["active_sets"] = cfg.active_sets;
  auto phases = nlohmann::json::array();
  for (const auto& omega : cfg.phase_schedule) {
    auto diag = nlohmann::json::array();
    for (Eigen::Index i = 0; i < omega.diagonal().size(); ++i) {
      diag.push_back({omega.diagonal()(i).real(), omega.diagonal()(i).imag()});
    }
    phases.push_back(std::move(diag));
  }
  j["phase_schedule"] = std::move(phases);
}

void from_json(const nlohmann::json& j, TrainingConfig& cfg) {
  cfg.n_blocks = j.at("n_blocks").get<int>();
  cfg.n_beams = j.at("n_beams").get<int>();
  cfg.n_rf_ris = j.at("n_rf_ris").get<int>();
  cfg.n_rf_bs = j.at("n_rf_bs").get<int>();
  cfg.n_ris = j.at("n_ris").get<int>();
  cfg.pilot_power = j.at("pilot_power").get<double>();
  cfg.pilot = matrix_from_json(j.at("pilot"));
  cfg.bs_combiner = matrix_from_json(j.at("bs_combiner"));
  cfg.active_sets = j.at("active_sets").get<std::vector<std::vector<int>>>();
  cfg.phase_schedule.clear();
  for (const auto& diag : j.at("phase_schedule")) {
    CVector d(static_cast<Eigen::Index>(diag.size()));
    for (std::size_t i = 0; i < diag.size(); ++i) {
      d(static_cast<Eigen::Index>(i)) = Complex(diag[i].at(0).get<double>(), diag[i].at(1).get<double>());
    }
    cfg.phase_schedule.emplace_back(std::move(d));
  }
  cfg.validate();
}

}  // namespace hris
