#include "hris/channel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hris {

namespace {

void check_open_angle(double angle) {
  if (!(angle > -kPi / 2 && angle < kPi / 2)) {
    throw DomainError("angle " + std::to_string(angle) + " outside (-pi/2, pi/2)");
  }
}

bool separated(const std::vector<double>& freqs, double min_sep) {
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    for (std::size_t j = i + 1; j < freqs.size(); ++j) {
      if (circular_distance(freqs[i], freqs[j]) < min_sep) return false;
    }
  }
  return true;
}

// Draws n frequencies on [0,1) with pairwise circular gap >= min_sep.
std::vector<double> draw_separated(Rng& rng, int n, double min_sep) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  constexpr int kMaxRestarts = 10000;
  constexpr int kMaxTriesPerPoint = 1000;
  for (int restart = 0; restart < kMaxRestarts; ++restart) {
    std::vector<double> freqs;
    freqs.reserve(n);
    bool stuck = false;
    while (static_cast<int>(freqs.size()) < n && !stuck) {
      stuck = true;
      for (int t = 0; t < kMaxTriesPerPoint; ++t) {
        const double nu = uniform(rng);
        if (nu == 0.5) continue;  // endfire
        const bool ok = std::all_of(freqs.begin(), freqs.end(), [&](double f) {
          return circular_distance(f, nu) >= min_sep;
        });
        if (ok) {
          freqs.push_back(nu);
          stuck = false;
          break;
        }
      }
    }
    if (!stuck) return freqs;
  }
  throw ConfigError("could not place frequencies with the requested separation");
}

void check_feasible(int n_paths, double min_sep) {
  if (n_paths >= 2 && !(n_paths * min_sep < 1.0)) {
    throw ConfigError("infeasible frequency packing: " + std::to_string(n_paths) +
                      " paths with separation " + std::to_string(min_sep));
  }
}

}  // namespace

void ArrayGeometry::validate() const {
  if (n_elements < 2) throw ConfigError("array needs at least 2 elements");
  if (spacing != 0.5) throw ConfigError("only half-wavelength spacing is supported");
}

double wrap_unit(double x) {
  double w = x - std::floor(x);
  if (w >= 1.0) w = 0.0;
  return w;
}

double spatial_frequency(double angle) { return wrap_unit(std::sin(angle) / 2.0); }

double angle_from_frequency(double nu) {
  const double w = wrap_unit(nu);
  const double s = w < 0.5 ? 2.0 * w : 2.0 * w - 2.0;
  if (s <= -1.0 || s >= 1.0) throw DomainError("frequency maps to endfire");
  return std::asin(s);
}

double circular_distance(double a, double b) {
  const double d = wrap_unit(a - b);
  return std::min(d, 1.0 - d);
}

CVector array_response(const ArrayGeometry& geometry, double angle) {
  geometry.validate();
  check_open_angle(angle);
  return sine_response(geometry.n_elements, std::sin(angle));
}

CVector frequency_response(int n_elements, double nu) {
  CVector a(n_elements);
  for (int n = 0; n < n_elements; ++n) a(n) = std::polar(1.0, 2.0 * kPi * n * nu);
  return a;
}

CVector sine_response(int n_elements, double s) {
  CVector a(n_elements);
  for (int n = 0; n < n_elements; ++n) a(n) = std::polar(1.0, kPi * n * s);
  return a;
}

CMatrix steering_matrix(const ArrayGeometry& geometry, std::span<const double> angles) {
  CMatrix a(geometry.n_elements, static_cast<Eigen::Index>(angles.size()));
  for (std::size_t l = 0; l < angles.size(); ++l) {
    a.col(static_cast<Eigen::Index>(l)) = array_response(geometry, angles[l]);
  }
  return a;
}

void PathParams::validate() const {
  if (gains.empty()) throw DomainError("path set is empty");
  if (aod.size() != gains.size() || aoa.size() != gains.size()) {
    throw DomainError("path parameter lists differ in length");
  }
  for (double a : aod) check_open_angle(a);
  for (double a : aoa) check_open_angle(a);
}

void PathParams::validate_separation(double min_sep_rx, double min_sep_tx) const {
  validate();
  std::vector<double> rx, tx;
  for (double a : aoa) rx.push_back(spatial_frequency(a));
  for (double a : aod) tx.push_back(spatial_frequency(a));
  if (!separated(rx, min_sep_rx) || !separated(tx, min_sep_tx)) {
    throw DomainError("path frequencies violate the separation condition");
  }
}

PathParams sample_path_params(Rng& rng, const ArrayGeometry& rx, const ArrayGeometry& tx,
                              int n_paths, double min_sep_rx, double min_sep_tx) {
  rx.validate();
  tx.validate();
  if (n_paths < 1) throw ConfigError("need at least one path");
  check_feasible(n_paths, min_sep_rx);
  check_feasible(n_paths, min_sep_tx);

  PathParams p;
  const auto rx_freqs = draw_separated(rng, n_paths, min_sep_rx);
  const auto tx_freqs = draw_separated(rng, n_paths, min_sep_tx);
  for (int l = 0; l < n_paths; ++l) {
    p.aoa.push_back(angle_from_frequency(rx_freqs[l]));
    p.aod.push_back(angle_from_frequency(tx_freqs[l]));
    p.gains.push_back(complex_normal(rng));
  }
  return p;
}

PathParams sample_path_params(Rng& rng, const ArrayGeometry& rx, const ArrayGeometry& tx,
                              int n_paths, double min_sep) {
  return sample_path_params(rng, rx, tx, n_paths, min_sep, min_sep);
}

CMatrix build_channel(const PathParams& params, const ArrayGeometry& rx,
                      const ArrayGeometry& tx) {
  params.validate();
  const CMatrix a_rx = steering_matrix(rx, params.aoa);
  const CMatrix a_tx = steering_matrix(tx, params.aod);
  const CVector rho = Eigen::Map<const CVector>(params.gains.data(),
                                                static_cast<Eigen::Index>(params.gains.size()));
  return a_rx * rho.asDiagonal() * a_tx.adjoint();
}

DiagonalPhase DiagonalPhase::from_matrix(const CMatrix& m) {
  if (m.rows() != m.cols()) throw DomainError("phase matrix must be square");
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (r != c && m(r, c) != Complex(0.0)) {
        throw DomainError("phase matrix has off-diagonal entries");
      }
    }
  }
  return DiagonalPhase(m.diagonal());
}

bool DiagonalPhase::is_hybrid_pattern(double tol) const {
  for (Eigen::Index i = 0; i < diag_.size(); ++i) {
    const double m = std::abs(diag_(i));
    if (m != 0.0 && std::abs(m - 1.0) > tol) return false;
  }
  return true;
}

bool DiagonalPhase::is_unit_modulus(double tol) const {
  for (Eigen::Index i = 0; i < diag_.size(); ++i) {
    if (std::abs(std::abs(diag_(i)) - 1.0) > tol) return false;
  }
  return true;
}

ChannelRealization ChannelRealization::from_params(const ArrayGeometry& ms,
                                                   const ArrayGeometry& ris,
                                                   const ArrayGeometry& bs, PathParams mr,
                                                   PathParams rb) {
  ChannelRealization real;
  real.ms = ms;
  real.ris = ris;
  real.bs = bs;
  real.h_mr = build_channel(mr, ris, ms);
  real.h_rb = build_channel(rb, bs, ris);
  real.params_mr = std::move(mr);
  real.params_rb = std::move(rb);
  return real;
}

namespace {

void check_phase(const ChannelRealization& real, const DiagonalPhase& omega) {
  if (omega.size() != real.ris.n_elements) throw DomainError("phase matrix size mismatch");
  if (!omega.is_hybrid_pattern()) {
    throw DomainError("phase entries must be unit-modulus or zero");
  }
}

}  // namespace

CMatrix cascaded_channel(const ChannelRealization& real, const DiagonalPhase& omega) {
  check_phase(real, omega);
  return real.h_rb * omega.diagonal().asDiagonal() * real.h_mr;
}

CMatrix effective_channel(const ChannelRealization& real, const DiagonalPhase& omega) {
  check_phase(real, omega);
  const auto& mr = real.params_mr;
  const auto& rb = real.params_rb;
  const CMatrix a_theta_rb = steering_matrix(real.ris, rb.aod);
  const CMatrix a_phi_mr = steering_matrix(real.ris, mr.aoa);
  const CVector rho_rb = Eigen::Map<const CVector>(rb.gains.data(), rb.gains.size());
  const CVector rho_mr = Eigen::Map<const CVector>(mr.gains.data(), mr.gains.size());
  return rho_rb.asDiagonal() * a_theta_rb.adjoint() * omega.diagonal().asDiagonal() *
         a_phi_mr * rho_mr.asDiagonal();
}

CMatrix effective_channel_by_differences(const ChannelRealization& real,
                                         const DiagonalPhase& omega) {
  check_phase(real, omega);
  const auto& mr = real.params_mr;
  const auto& rb = real.params_rb;
  const int n_r = real.ris.n_elements;
  CMatrix g(rb.n_paths(), mr.n_paths());
  for (std::size_t p = 0; p < rb.n_paths(); ++p) {
    for (std::size_t l = 0; l < mr.n_paths(); ++l) {
      const double s = std::sin(mr.aoa[l]) - std::sin(rb.aod[p]);
      const CVector a = sine_response(n_r, s);
      g(p, l) = rb.gains[p] * mr.gains[l] * (omega.diagonal().transpose() * a)(0, 0);
    }
  }
  return g;
}

double PathLossModel::beta0() const {
  const double r = wavelength() / (4.0 * kPi * d0);
  return r * r;
}

void PathLossModel::validate() const {
  if (!(d0 > 0.0)) throw ConfigError("reference distance must be positive");
  if (!(gamma > 0.0)) throw ConfigError("path-loss exponent must be positive");
  if (!(fc > 0.0)) throw ConfigError("carrier frequency must be positive");
}

double path_loss(const PathLossModel& model, double d1) {
  if (!(d1 > 0.0)) throw DomainError("distance must be positive");
  return model.beta0() * std::pow(model.d0 / d1, model.gamma);
}

double path_loss(const PathLossModel& model, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw DomainError("distance must be positive");
  return model.beta0() * std::pow(model.d0 / (d1 * d2), model.gamma);
}

double amplitude_factor(double beta, AmplitudeConvention convention) {
  if (!(beta > 0.0)) throw DomainError("path loss must be positive");
  return convention == AmplitudeConvention::kAttenuation ? std::sqrt(beta)
                                                         : std::sqrt(1.0 / beta);
}

double distance(Point2D a, Point2D b) { return std::hypot(a.x - b.x, a.y - b.y); }

Geometry2D Geometry2D::from_offsets(double d_total, double d_x, double d_y) {
  Geometry2D g;
  g.bs = {0.0, 0.0};
  g.ris = {d_total - d_x, d_y};
  g.ms = {d_total, 0.0};
  return g;
}

void Geometry2D::validate() const {
  if (!(d1() > 0.0) || !(d2() > 0.0)) {
    throw ConfigError("MS, RIS and BS must be at distinct positions");
  }
}

LinkBudget link_budget(const PathLossModel& model, const Geometry2D& geometry,
                       AmplitudeConvention convention) {
  model.validate();
  geometry.validate();
  LinkBudget b;
  b.beta_ris = path_loss(model, geometry.d1());
  b.beta_cascade = path_loss(model, geometry.d1(), geometry.d2());
  b.amp_ris = amplitude_factor(b.beta_ris, convention);
  b.amp_bs = amplitude_factor(b.beta_cascade, convention);
  return b;
}

}  // namespace hris
