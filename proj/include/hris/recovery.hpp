#pragma once

// Parameter extraction from the denoised channel: root-MUSIC on the
// Toeplitz blocks, least-squares path gains, assignment, and the cascaded
// quantities (angle differences, gain products).

#include <span>
#include <vector>

#include "hris/types.hpp"

namespace hris {

struct FrequencyEstimate {
  std::vector<double> freqs;  // normalized, in [0, 1)
  int source_dim = 0;

  std::size_t n_sources() const { return freqs.size(); }
};

/// Root-MUSIC on a Hermitian (Toeplitz) matrix whose signal subspace has
/// dimension n_sources. Frequencies follow the exp(j 2 pi n nu) convention.
FrequencyEstimate root_music(const CMatrix& toeplitz, int n_sources);

struct GainEstimate {
  CVector gains;
  double residual = 0.0;
  bool regularized = false;  // ridge fallback was used
};

/// Columns scale * vec(L a_rx(nu_rx,l) a_tx(nu_tx,l)^H R), i.e. the
/// structured regressor scale * (R^T kron L) (conj(A_tx) khatri-rao A_rx).
CMatrix gain_regressor(const CMatrix& left_op, const CMatrix& right_op,
                       std::span<const double> tx_freqs, std::span<const double> rx_freqs,
                       double scale);

/// Least-squares gains for observed = scale * L A_rx diag(rho) A_tx^H R + noise.
/// Duplicate frequencies make the regressor rank deficient; a 1e-10 ridge is
/// then applied and `regularized` is set.
GainEstimate ls_gains(const CMatrix& observed, const CMatrix& left_op, const CMatrix& right_op,
                      std::span<const double> tx_freqs, std::span<const double> rx_freqs,
                      double scale);

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
/// result[row] = assigned column.
std::vector<int> optimal_assignment(const RMatrix& cost);

/// perm[i] is the index of the estimate assigned to reference[i], minimizing
/// the total circular frequency distance.
std::vector<int> pair_and_order(const FrequencyEstimate& est, const FrequencyEstimate& reference);

enum class SineWrap {
  kStrict,    // |sin(phi) - sin(theta)| > 1 is a DomainError
  kPeriodic,  // wrap the sine difference into [-1, 1); the array response is 2-periodic in it
};

/// [Delta]_{lp} = asin(sin(phi_l) - sin(theta_p)), size L_MR x L_RB.
RMatrix angle_differences(std::span<const double> phi_mr, std::span<const double> theta_rb,
                          SineWrap wrap = SineWrap::kStrict);

/// rho_RB kron rho_MR; entry p*L_MR + l pairs with vec(Delta) entry (l, p).
CVector gain_products(const CVector& rho_rb, const CVector& rho_mr);

struct CascadedParams {
  RMatrix delta;       // L_MR x L_RB, radians
  RVector delta_vec;   // column-major vec(delta)
  RVector sine_diff;   // sin(phi_l) - sin(theta_p), same ordering as delta_vec
  CVector rho_prod;    // gain_products ordering
};

CascadedParams cascaded_params(std::span<const double> phi_mr, std::span<const double> theta_rb,
                               const CVector& rho_mr, const CVector& rho_rb);

}  // namespace hris
