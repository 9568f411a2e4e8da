#pragma once

// Data-parallel kernels (OpenMP) with serial reference implementations.
// The serial versions follow the textbook formula and are kept for tests
// and for the benchmark in bench/.

#include <span>
#include <vector>

#include "hris/types.hpp"

namespace hris::kernels {

/// Columns scale * vec((L a_rx) (a_tx^H R)), one per path.
CMatrix structured_regressor(const CMatrix& left_op, const CMatrix& right_op,
                             std::span<const double> tx_freqs, std::span<const double> rx_freqs,
                             double scale);

struct PhaseSearchResult {
  double power = 0.0;       // sum_i |rho_i|^2 |omega^T a(s_i)|^2
  std::vector<int> levels;  // per element, levels[0] == 0
};

/// Exhaustive search over omega_n = exp(j 2 pi q_n / n_levels) maximizing
/// ||G||_F^2 for cascaded paths with sine differences `sine_diff` and gain
/// products `rho_prod`. The first element is pinned to level 0 (the
/// objective is invariant to a common phase). Enumerates n_levels^(n_r - 2)
/// configurations in reflected Gray-code order, updating incrementally, and
/// maximizes the last element in closed form for each.
PhaseSearchResult exhaustive_phase_search(const CVector& rho_prod, const RVector& sine_diff,
                                          int n_r, int n_levels);

/// ||G||_F^2 = sum_i |rho_i|^2 |omega^T a(s_i)|^2 for a given phase vector.
double cascaded_power(const CVector& rho_prod, const RVector& sine_diff, const CVector& omega);

CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Column-wise Kronecker product.
CMatrix khatri_rao(const CMatrix& a, const CMatrix& b);

namespace serial {

/// scale * (R^T kron L) (conj(A_tx) khatri-rao A_rx).
CMatrix structured_regressor(const CMatrix& left_op, const CMatrix& right_op,
                             std::span<const double> tx_freqs, std::span<const double> rx_freqs,
                             double scale);

/// Odometer enumeration recomputing the objective from scratch each step.
PhaseSearchResult exhaustive_phase_search(const CVector& rho_prod, const RVector& sine_diff,
                                          int n_r, int n_levels);

}  // namespace serial

}  // namespace hris::kernels
