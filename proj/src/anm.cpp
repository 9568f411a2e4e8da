#include "hris/anm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hris {

void AnmProblem::validate() const {
  if (left_op.rows() != observed.rows()) throw DomainError("left operator rows differ from observation rows");
  if (right_op.cols() != observed.cols()) throw DomainError("right operator columns differ from observation columns");
  if (rows() < 1 || cols() < 1) throw DomainError("unknown matrix is empty");
  if (!(reg >= 0.0) || !std::isfinite(reg)) throw DomainError("regularization weight must be finite and nonnegative");
}

void SolverConfig::validate() const {
  if (max_iters < 1) throw ConfigError("max_iters must be positive");
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw ConfigError("tolerances must be positive");
  if (!(reg_relative_tol >= 0.0)) throw ConfigError("reg_relative_tol must be nonnegative");
  if (!(penalty >= 0.0)) throw ConfigError("penalty must be nonnegative");
  if (adapt_every < 1) throw ConfigError("adapt_every must be positive");
  if (anderson_memory < 0) throw ConfigError("anderson_memory must be nonnegative");
}

double regularizer(double sigma, int n_a, int n_b, double scale, double op_gain) {
  if (!(sigma >= 0.0)) throw DomainError("noise level must be nonnegative");
  const double n = static_cast<double>(n_a) * static_cast<double>(n_b);
  if (n_a < 1 || n_b < 1 || n < 2.0) throw DomainError("regularizer needs n_a * n_b >= 2");
  return scale * sigma * op_gain * std::sqrt(n * std::log(n));
}

CMatrix AnmSolution::block_matrix() const {
  const Eigen::Index na = rx_toeplitz.rows();
  const Eigen::Index nb = tx_toeplitz.rows();
  CMatrix b(na + nb, na + nb);
  b.topLeftCorner(na, na) = rx_toeplitz;
  b.topRightCorner(na, nb) = h_hat;
  b.bottomLeftCorner(nb, na) = h_hat.adjoint();
  b.bottomRightCorner(nb, nb) = tx_toeplitz;
  return b;
}

double anm_objective(const AnmProblem& p, const CMatrix& h, const CMatrix& rx_toeplitz,
                     const CMatrix& tx_toeplitz) {
  const double na = static_cast<double>(p.rows());
  const double nb = static_cast<double>(p.cols());
  const double trace_term = rx_toeplitz.trace().real() / (2.0 * na) +
                            tx_toeplitz.trace().real() / (2.0 * nb);
  const double fit = (p.left_op * h * p.right_op - p.observed).squaredNorm();
  return p.reg * trace_term + 0.5 * fit;
}

namespace {

CVector toeplitz_generator(const CMatrix& a) {
  const Eigen::Index n = a.rows();
  CVector t(n);
  t(0) = a.diagonal().real().mean();
  for (Eigen::Index k = 1; k < n; ++k) {
    Complex acc = 0.0;
    for (Eigen::Index i = 0; i + k < n; ++i) acc += a(i + k, i) + std::conj(a(i, i + k));
    t(k) = acc / (2.0 * static_cast<double>(n - k));
  }
  return t;
}

}  // namespace

CMatrix hermitian_toeplitz(const CVector& g) {
  const Eigen::Index n = g.size();
  CMatrix t(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) t(r, c) = r >= c ? g(r - c) : std::conj(g(c - r));
  }
  t.diagonal() = t.diagonal().real().cast<Complex>();
  return t;
}

CMatrix toeplitz_average(const CMatrix& square) {
  if (square.rows() != square.cols()) throw DomainError("Toeplitz projection needs a square matrix");
  if (square.rows() == 0) return square;
  return hermitian_toeplitz(toeplitz_generator(square));
}

namespace {

CMatrix clip_eigenvalues(const CMatrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian);
  const RVector clipped = eig.eigenvalues().cwiseMax(0.0);
  CMatrix out = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().adjoint();
  return 0.5 * (out + out.adjoint());
}

double min_eigenvalue(const CMatrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

// Type-II Anderson acceleration of a fixed-point map w -> f(w).
class Anderson {
 public:
  explicit Anderson(int memory) : memory_(memory) {}

  void reset() {
    df_.clear();
    dg_.clear();
    has_prev_ = false;
  }

  // Returns the next iterate given w and f = f(w).
  CVector step(const CVector& w, const CVector& f) {
    const CVector g = f - w;
    if (has_prev_) {
      df_.push_back(f - f_prev_);
      dg_.push_back(g - g_prev_);
      if (static_cast<int>(df_.size()) > memory_) {
        df_.erase(df_.begin());
        dg_.erase(dg_.begin());
      }
    }
    f_prev_ = f;
    g_prev_ = g;
    has_prev_ = true;
    const auto m = static_cast<Eigen::Index>(dg_.size());
    if (m == 0) return f;

    CMatrix gram(m, m);
    CVector rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      rhs(i) = dg_[i].dot(g);
      for (Eigen::Index j = 0; j <= i; ++j) {
        gram(i, j) = dg_[i].dot(dg_[j]);
        gram(j, i) = std::conj(gram(i, j));
      }
    }
    gram.diagonal().array() += 1e-12 * gram.trace().real() + std::numeric_limits<double>::min();
    const CVector gamma = gram.ldlt().solve(rhs);
    if (!gamma.allFinite()) return f;
    CVector next = f;
    for (Eigen::Index i = 0; i < m; ++i) next -= gamma(i) * df_[i];
    return next;
  }

 private:
  int memory_;
  std::vector<CVector> df_, dg_;
  CVector f_prev_, g_prev_;
  bool has_prev_ = false;
};

CVector stack(const CMatrix& a, const CMatrix& b) {
  CVector v(a.size() + b.size());
  v.head(a.size()) = Eigen::Map<const CVector>(a.data(), a.size());
  v.tail(b.size()) = Eigen::Map<const CVector>(b.data(), b.size());
  return v;
}

void unstack(const CVector& v, CMatrix& a, CMatrix& b) {
  a = Eigen::Map<const CMatrix>(v.data(), a.rows(), a.cols());
  b = Eigen::Map<const CMatrix>(v.data() + a.size(), b.rows(), b.cols());
  // Extrapolation keeps Hermitian symmetry only up to rounding.
  a = 0.5 * (a + a.adjoint()).eval();
  b = 0.5 * (b + b.adjoint()).eval();
}

AnmSolution zero_solution(const AnmProblem& p) {
  AnmSolution s;
  s.h_hat = CMatrix::Zero(p.rows(), p.cols());
  s.rx_toeplitz = CMatrix::Zero(p.rows(), p.rows());
  s.tx_toeplitz = CMatrix::Zero(p.cols(), p.cols());
  s.diagnostics.converged = true;
  s.diagnostics.objective = anm_objective(p, s.h_hat, s.rx_toeplitz, s.tx_toeplitz);
  return s;
}

}  // namespace

CMatrix psd_project(const CMatrix& hermitian) {
  if (hermitian.rows() != hermitian.cols()) throw DomainError("PSD projection needs a square matrix");
  const double scale = std::max(1.0, hermitian.norm());
  if ((hermitian - hermitian.adjoint()).norm() > 1e-10 * scale) {
    throw DomainError("PSD projection input is not Hermitian");
  }
  return clip_eigenvalues(0.5 * (hermitian + hermitian.adjoint()));
}

AnmSolution solve_anm(const AnmProblem& problem, const SolverConfig& cfg) {
  problem.validate();
  cfg.validate();
  const Eigen::Index na = problem.rows();
  const Eigen::Index nb = problem.cols();
  const Eigen::Index n = na + nb;

  // Spectral structure of the sensing operator: L^H L = U1 diag(d1) U1^H,
  // R R^H = U2 diag(d2) U2^H. The H-update is diagonal in these bases.
  Eigen::SelfAdjointEigenSolver<CMatrix> eig_left(problem.left_op.adjoint() * problem.left_op);
  Eigen::SelfAdjointEigenSolver<CMatrix> eig_right(problem.right_op * problem.right_op.adjoint());
  const RVector d1_raw = eig_left.eigenvalues().cwiseMax(0.0);
  const RVector d2_raw = eig_right.eigenvalues().cwiseMax(0.0);
  const double left_gain2 = d1_raw.maxCoeff();
  const double right_gain2 = d2_raw.maxCoeff();

  if (problem.reg == 0.0) {
    const double smallest = d1_raw.minCoeff() * d2_raw.minCoeff();
    if (!(smallest > 1e-12 * left_gain2 * right_gain2)) {
      throw IllPosedError("sensing operator is rank deficient and no regularization is set");
    }
  }
  const double y_scale = problem.observed.norm();
  if (y_scale == 0.0 || left_gain2 == 0.0 || right_gain2 == 0.0) return zero_solution(problem);

  // Work in normalized units: ||L'|| = ||R'|| = ||Y'||_F = 1.
  const double op_gain = std::sqrt(left_gain2 * right_gain2);
  const double h_scale = y_scale / op_gain;
  const double reg = problem.reg / (y_scale * op_gain);
  const RVector d1 = d1_raw / left_gain2;
  const RVector d2 = d2_raw / right_gain2;
  const CMatrix& u1 = eig_left.eigenvectors();
  const CMatrix& u2 = eig_right.eigenvectors();
  const CMatrix rhs0 = u1.adjoint() *
                       (problem.left_op.adjoint() * problem.observed * problem.right_op.adjoint()) *
                       u2 / (y_scale * op_gain);
  const RMatrix d_outer = d1 * d2.transpose();

  const double trace_rx = reg / (2.0 * static_cast<double>(na));
  const double trace_tx = reg / (2.0 * static_cast<double>(nb));

  // Scaled form: u = Lambda / rho.
  CMatrix z = CMatrix::Zero(n, n);
  CMatrix u = CMatrix::Zero(n, n);
  CMatrix block = CMatrix::Zero(n, n);
  CMatrix h(na, nb), t_rx(na, na), t_tx(nb, nb);
  // Empirically the fastest fixed penalty grows like sqrt(reg) in these units.
  const double rel_tol = cfg.reg_relative_tol > 0.0 && reg > 0.0 ? std::min(cfg.rel_tol, cfg.reg_relative_tol * reg) : cfg.rel_tol;
  double rho = cfg.penalty > 0.0 ? cfg.penalty : 0.02 * std::sqrt(std::max(reg, 1e-12));

  const bool accelerate = cfg.anderson_memory > 0;
  Anderson anderson(cfg.anderson_memory);
  CVector fallback;  // plain ADMM image of the last accepted iterate
  double accepted_res = std::numeric_limits<double>::infinity();
  bool extrapolated = false;

  SolverDiagnostics diag;
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    const CMatrix p = z - u;

    const CMatrix m = 0.5 * (p.topRightCorner(na, nb) + p.bottomLeftCorner(nb, na).adjoint());
    const CMatrix rhs = rhs0 + 2.0 * rho * (u1.adjoint() * m * u2);
    const CMatrix h_rot = rhs.array() / (d_outer.array() + 2.0 * rho).cast<Complex>();
    h = u1 * h_rot * u2.adjoint();

    t_rx = toeplitz_average(p.topLeftCorner(na, na));
    t_rx.diagonal().array() -= trace_rx / rho;
    t_tx = toeplitz_average(p.bottomRightCorner(nb, nb));
    t_tx.diagonal().array() -= trace_tx / rho;

    block.topLeftCorner(na, na) = t_rx;
    block.topRightCorner(na, nb) = h;
    block.bottomLeftCorner(nb, na) = h.adjoint();
    block.bottomRightCorner(nb, nb) = t_tx;

    const CMatrix z_next = clip_eigenvalues(block + u);
    const CMatrix gap = block - z_next;
    const CMatrix u_next = u + gap;

    const double r_norm = gap.norm();
    const double dz = (z_next - z).norm();
    const double s_norm = rho * dz;
    diag.primal_residual = r_norm;
    diag.dual_residual = s_norm;
    if (cfg.record_trajectory) {
      // dLambda = rho * gap, so ||dLambda||^2 / rho = rho ||gap||^2.
      diag.trajectory.push_back(
          {it + 1, r_norm, s_norm, rho, rho * dz * dz + rho * r_norm * r_norm});
    }

    const double eps_pri = static_cast<double>(n) * cfg.abs_tol + rel_tol * std::max(block.norm(), z_next.norm());
    const double eps_dual = static_cast<double>(n) * cfg.abs_tol + rel_tol * rho * u_next.norm();
    if (it > 0 && r_norm <= eps_pri && s_norm <= eps_dual) {
      z = z_next;
      u = u_next;
      diag.converged = true;
      ++it;
      break;
    }

    if (!accelerate) {
      z = z_next;
      u = u_next;
    } else {
      // Fixed-point residual of the (z, u) map; an extrapolated point that
      // increases it is discarded in favour of the plain step.
      const double res = std::sqrt(dz * dz + r_norm * r_norm);
      if (extrapolated && res > accepted_res) {
        unstack(fallback, z, u);
        anderson.reset();
        extrapolated = false;
        continue;
      }
      accepted_res = res;
      fallback = stack(z_next, u_next);
      const CVector next = anderson.step(stack(z, u), fallback);
      unstack(next, z, u);
      extrapolated = true;
    }

    if (cfg.adaptive_penalty && (it + 1) % cfg.adapt_every == 0) {
      double factor = 1.0;
      if (r_norm > 10.0 * s_norm) {
        factor = 2.0;
      } else if (s_norm > 10.0 * r_norm) {
        factor = 0.5;
      }
      if (factor != 1.0) {
        rho *= factor;
        if (accelerate) {
          // A new penalty changes the fixed-point map; restart from the plain step.
          unstack(fallback, z, u);
          anderson.reset();
          extrapolated = false;
          accepted_res = std::numeric_limits<double>::infinity();
        }
        u /= factor;
      }
    }
  }
  diag.iterations = it;

  // The structured iterate is Toeplitz by construction but only PSD up to the
  // primal residual; shifting both diagonal blocks restores feasibility.
  const double lam_min = min_eigenvalue(block);
  if (lam_min < 0.0) {
    const double shift = -lam_min + 1e-14 * block.norm();
    t_rx.diagonal().array() += shift;
    t_tx.diagonal().array() += shift;
    diag.feasibility_shift = shift * h_scale;
  }

  AnmSolution sol;
  sol.h_hat = h * h_scale;
  sol.rx_toeplitz = t_rx * h_scale;
  sol.tx_toeplitz = t_tx * h_scale;
  diag.objective = anm_objective(problem, sol.h_hat, sol.rx_toeplitz, sol.tx_toeplitz);
  diag.min_eigenvalue = min_eigenvalue(sol.block_matrix());
  sol.diagnostics = std::move(diag);
  return sol;
}

nlohmann::json diagnostics_to_json(const SolverDiagnostics& d) {
  nlohmann::json j;
  j["iterations"] = d.iterations;
  j["converged"] = d.converged;
  j["primal_residual"] = d.primal_residual;
  j["dual_residual"] = d.dual_residual;
  j["objective"] = d.objective;
  j["min_eigenvalue"] = d.min_eigenvalue;
  j["feasibility_shift"] = d.feasibility_shift;
  auto traj = nlohmann::json::array();
  for (const auto& r : d.trajectory) {
    traj.push_back({{"iteration", r.iteration},
                    {"primal_residual", r.primal_residual},
                    {"dual_residual", r.dual_residual},
                    {"penalty", r.penalty},
                    {"merit", r.merit}});
  }
  j["trajectory"] = std::move(traj);
  return j;
}

}  // namespace hris
