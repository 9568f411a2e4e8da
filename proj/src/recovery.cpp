#include "hris/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hris/channel.hpp"
#include "hris/kernels.hpp"

namespace hris {

namespace {

// Horner evaluation of the first and second derivatives of sum_k p_k z^k.
void derivatives(const CVector& p, Complex z, Complex& d1, Complex& d2) {
  d1 = 0.0;
  d2 = 0.0;
  for (Eigen::Index k = p.size() - 1; k >= 2; --k) {
    d1 = d1 * z + static_cast<double>(k) * p(k);
    d2 = d2 * z + static_cast<double>(k * (k - 1)) * p(k);
  }
  if (p.size() >= 2) d1 = d1 * z + p(1);
}

double polish_root(const CVector& poly, double freq, double max_move) {
  Complex z = std::polar(1.0, 2.0 * kPi * freq);
  const Complex start = z;
  for (int it = 0; it < 20; ++it) {
    Complex d1, d2;
    derivatives(poly, z, d1, d2);
    if (std::abs(d2) == 0.0) break;
    const Complex step = d1 / d2;
    z -= step;
    if (std::abs(step) <= 1e-15 * std::abs(z)) break;
  }
  const double polished = wrap_unit(std::arg(z) / (2.0 * kPi));
  if (!std::isfinite(polished) || circular_distance(polished, freq) > max_move ||
      std::abs(std::abs(z) - 1.0) > std::abs(std::abs(start) - 1.0) + 1e-3) {
    return freq;
  }
  return polished;
}

}  // namespace

FrequencyEstimate root_music(const CMatrix& toeplitz, int n_sources) {
  const Eigen::Index n = toeplitz.rows();
  if (toeplitz.cols() != n) throw DomainError("root-MUSIC needs a square matrix");
  if (n_sources < 1 || n_sources >= n) {
    throw DomainError("root-MUSIC needs 1 <= sources < matrix size");
  }

  Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (toeplitz + toeplitz.adjoint()));
  const RVector& lam = eig.eigenvalues();  // ascending
  const double lam_max = lam(n - 1);
  if (!(lam_max > 0.0)) throw EstimationError("root-MUSIC input has no positive eigenvalue");
  if (lam(0) < -1e-8 * std::max(1.0, lam_max)) throw DomainError("root-MUSIC input is not PSD");
  const Eigen::Index n_noise = n - n_sources;
  if (lam(n_noise) - lam(n_noise - 1) <= 1e-9 * lam_max) {
    throw EstimationError("no separation between signal and noise subspaces");
  }

  const CMatrix noise = eig.eigenvectors().leftCols(n_noise);
  const CMatrix proj = noise * noise.adjoint();

  // D(z) = sum_k c_k z^k with c_k = sum_{col-row=k} P(row, col); the
  // coefficient of z^(k + n - 1) in z^(n-1) D(z) is c_k.
  const Eigen::Index degree = 2 * n - 2;
  CVector coeff = CVector::Zero(degree + 1);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) coeff(c - r + n - 1) += proj(r, c);
  }
  const double cmax = coeff.cwiseAbs().maxCoeff();
  Eigen::Index hi = degree;
  while (hi > 0 && std::abs(coeff(hi)) <= 1e-14 * cmax) --hi;
  Eigen::Index lo = 0;
  while (lo < hi && std::abs(coeff(lo)) <= 1e-14 * cmax) ++lo;
  const Eigen::Index deg = hi - lo;
  if (deg < 1) throw EstimationError("degenerate root-MUSIC polynomial");

  // Companion matrix of the monic polynomial.
  CMatrix companion = CMatrix::Zero(deg, deg);
  for (Eigen::Index i = 0; i < deg; ++i) companion(0, i) = -coeff(hi - 1 - i) / coeff(hi);
  for (Eigen::Index i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  Eigen::ComplexEigenSolver<CMatrix> roots(companion, false);

  struct Candidate {
    double dist;
    double mag;
    double freq;
  };
  std::vector<Candidate> cands;
  for (Eigen::Index i = 0; i < deg; ++i) {
    const Complex z = roots.eigenvalues()(i);
    const double mag = std::abs(z);
    if (mag <= 1.0 + 1e-9 && mag > 0.0) {
      cands.push_back({std::abs(1.0 - mag), mag, wrap_unit(std::arg(z) / (2.0 * kPi))});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.mag > b.mag;
  });

  // A double root on the circle splits into two nearby roots under rounding;
  // keep only one per source.
  const double min_gap = 0.25 / static_cast<double>(n);
  FrequencyEstimate est;
  est.source_dim = static_cast<int>(n);
  for (const auto& c : cands) {
    if (static_cast<int>(est.freqs.size()) == n_sources) break;
    const bool dup = std::any_of(est.freqs.begin(), est.freqs.end(), [&](double f) {
      return circular_distance(f, c.freq) < min_gap;
    });
    if (!dup) est.freqs.push_back(c.freq);
  }
  // On-circle roots are (near) double roots of D, so the companion solver only
  // resolves them to about sqrt(eps). They are simple roots of D'; polish there.
  const CVector poly = coeff.segment(lo, deg + 1);
  for (double& f : est.freqs) f = polish_root(poly, f, min_gap);
  if (static_cast<int>(est.freqs.size()) < n_sources) {
    throw EstimationError("fewer root-MUSIC candidates than sources");
  }
  std::sort(est.freqs.begin(), est.freqs.end());
  return est;
}

CMatrix gain_regressor(const CMatrix& left_op, const CMatrix& right_op,
                       std::span<const double> tx_freqs, std::span<const double> rx_freqs,
                       double scale) {
  return kernels::structured_regressor(left_op, right_op, tx_freqs, rx_freqs, scale);
}

GainEstimate ls_gains(const CMatrix& observed, const CMatrix& left_op, const CMatrix& right_op,
                      std::span<const double> tx_freqs, std::span<const double> rx_freqs,
                      double scale) {
  if (tx_freqs.empty() || tx_freqs.size() != rx_freqs.size()) {
    throw DomainError("gain estimation needs equal, nonempty frequency lists");
  }
  if (left_op.rows() != observed.rows() || right_op.cols() != observed.cols()) {
    throw DomainError("operator dimensions differ from observation");
  }
  const CMatrix g = gain_regressor(left_op, right_op, tx_freqs, rx_freqs, scale);
  const CVector y = Eigen::Map<const CVector>(observed.data(), observed.size());

  GainEstimate est;
  Eigen::JacobiSVD<CMatrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
  if (!(smax > 0.0)) {
    est.gains = CVector::Zero(static_cast<Eigen::Index>(tx_freqs.size()));
    est.residual = y.norm();
    est.regularized = true;
    return est;
  }
  if (smin <= 1e-10 * smax) {
    const double ridge = 1e-10 * smax * smax;
    const CMatrix normal = g.adjoint() * g + ridge * CMatrix::Identity(g.cols(), g.cols());
    est.gains = normal.ldlt().solve(g.adjoint() * y);
    est.regularized = true;
  } else {
    const CVector uty = svd.matrixU().adjoint() * y;
    est.gains = svd.matrixV() * (uty.array() / sv.array().cast<Complex>()).matrix();
  }
  est.residual = (y - g * est.gains).norm();
  return est;
}

std::vector<int> optimal_assignment(const RMatrix& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw DomainError("assignment needs a square cost matrix");
  if (n == 0) return {};
  // Potentials formulation, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> result(n);
  for (int j = 1; j <= n; ++j) result[match[j] - 1] = j - 1;
  return result;
}

std::vector<int> pair_and_order(const FrequencyEstimate& est, const FrequencyEstimate& reference) {
  const auto n = reference.freqs.size();
  if (est.freqs.size() != n) throw DomainError("estimate and reference differ in length");
  RMatrix cost(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      cost(i, j) = circular_distance(reference.freqs[i], est.freqs[j]);
    }
  }
  return optimal_assignment(cost);
}

namespace {

void check_open(std::span<const double> angles) {
  for (double a : angles) {
    if (!(a > -kPi / 2 && a < kPi / 2)) throw DomainError("angle outside (-pi/2, pi/2)");
  }
}

double wrap_sine(double s) { return s - 2.0 * std::floor((s + 1.0) / 2.0); }

}  // namespace

RMatrix angle_differences(std::span<const double> phi_mr, std::span<const double> theta_rb,
                          SineWrap wrap) {
  check_open(phi_mr);
  check_open(theta_rb);
  RMatrix delta(phi_mr.size(), theta_rb.size());
  for (std::size_t l = 0; l < phi_mr.size(); ++l) {
    for (std::size_t p = 0; p < theta_rb.size(); ++p) {
      double s = std::sin(phi_mr[l]) - std::sin(theta_rb[p]);
      if (wrap == SineWrap::kPeriodic) {
        s = wrap_sine(s);
      } else if (std::abs(s) > 1.0 + 1e-12) {
        throw DomainError("sine difference outside [-1, 1]");
      }
      delta(l, p) = std::asin(std::clamp(s, -1.0, 1.0));
    }
  }
  return delta;
}

CVector gain_products(const CVector& rho_rb, const CVector& rho_mr) {
  if (rho_rb.size() == 0 || rho_mr.size() == 0) throw DomainError("gain lists must be nonempty");
  CVector out(rho_rb.size() * rho_mr.size());
  for (Eigen::Index p = 0; p < rho_rb.size(); ++p) {
    for (Eigen::Index l = 0; l < rho_mr.size(); ++l) out(p * rho_mr.size() + l) = rho_rb(p) * rho_mr(l);
  }
  return out;
}

CascadedParams cascaded_params(std::span<const double> phi_mr, std::span<const double> theta_rb,
                               const CVector& rho_mr, const CVector& rho_rb) {
  CascadedParams c;
  c.delta = angle_differences(phi_mr, theta_rb, SineWrap::kPeriodic);
  c.delta_vec = Eigen::Map<const RVector>(c.delta.data(), c.delta.size());
  c.sine_diff.resize(c.delta.size());
  for (std::size_t p = 0; p < theta_rb.size(); ++p) {
    for (std::size_t l = 0; l < phi_mr.size(); ++l) {
      c.sine_diff(static_cast<Eigen::Index>(p * phi_mr.size() + l)) =
          std::sin(phi_mr[l]) - std::sin(theta_rb[p]);
    }
  }
  c.rho_prod = gain_products(rho_rb, rho_mr);
  return c;
}

}  // namespace hris
