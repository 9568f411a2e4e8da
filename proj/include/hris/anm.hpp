#pragma once

// Regularized atomic-norm denoising through its Toeplitz SDP form:
//
//   min  reg/(2 N_a) tr(T_rx) + reg/(2 N_b) tr(T_tx) + 1/2 ||L H R - Y||_F^2
//   s.t. [[T_rx, H], [H^H, T_tx]] >= 0,  T_rx, T_tx Hermitian Toeplitz,
//
// with H of size N_a x N_b. T_rx carries the column-space (receive side)
// frequencies of H, T_tx the row-space (transmit side) ones. Solved by ADMM
// on the splitting {objective + Toeplitz structure} / {PSD cone}.

#include <vector>

#include "json.hpp"

#include "hris/types.hpp"

namespace hris {

struct AnmProblem {
  CMatrix observed;  // Y
  CMatrix left_op;   // L, columns = N_a
  CMatrix right_op;  // R, rows = N_b
  double reg = 0.0;

  Eigen::Index rows() const { return left_op.cols(); }
  Eigen::Index cols() const { return right_op.rows(); }
  void validate() const;
};

struct SolverConfig {
  int max_iters = 20000;
  double abs_tol = 1e-10;
  double rel_tol = 1e-7;
  // If positive, rel_tol is capped at this times the normalized reg, so that
  // high-SNR problems are solved to matching precision.
  double reg_relative_tol = 0.0;
  double penalty = 0.0;  // initial ADMM penalty, normalized units; 0 picks it from reg
  bool adaptive_penalty = false;  // residual balancing; restarts the Anderson history
  int adapt_every = 10;
  int anderson_memory = 5;  // 0 runs plain ADMM
  bool record_trajectory = false;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double penalty = 0.0;
  double merit = 0.0;  // rho ||dZ||^2 + ||dLambda||^2 / rho, normalized units
};

struct SolverDiagnostics {
  int iterations = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  double min_eigenvalue = 0.0;  // of the returned block matrix
  double feasibility_shift = 0.0;
  std::vector<IterationRecord> trajectory;
};

struct AnmSolution {
  CMatrix h_hat;        // N_a x N_b
  CMatrix rx_toeplitz;  // N_a x N_a
  CMatrix tx_toeplitz;  // N_b x N_b
  SolverDiagnostics diagnostics;

  /// [[T_rx, H], [H^H, T_tx]].
  CMatrix block_matrix() const;
};

/// scale * sigma * op_gain * sqrt(n_a n_b log(n_a n_b)). op_gain carries the
/// sensing-operator gain when the observation is not a direct sample of H.
double regularizer(double sigma, int n_a, int n_b, double scale = 1.0, double op_gain = 1.0);

double anm_objective(const AnmProblem& problem, const CMatrix& h, const CMatrix& rx_toeplitz,
                     const CMatrix& tx_toeplitz);

AnmSolution solve_anm(const AnmProblem& problem, const SolverConfig& cfg = {});

/// Nearest PSD matrix in Frobenius norm (eigenvalue clipping). Throws
/// DomainError if the input is not Hermitian to 1e-10 relative.
CMatrix psd_project(const CMatrix& hermitian);

/// Orthogonal projection onto Hermitian Toeplitz matrices: diagonal k is
/// replaced by the mean of diagonal k and the conjugated diagonal -k.
CMatrix toeplitz_average(const CMatrix& square);

/// Hermitian Toeplitz matrix with first column `generator`.
CMatrix hermitian_toeplitz(const CVector& generator);

nlohmann::json diagnostics_to_json(const SolverDiagnostics& diag);

}  // namespace hris
