#pragma once

// Two-stage hybrid-RIS channel estimator and the downstream link design.
//
// Stage 1 (at the RIS): ANM on Y_H = beta1 W_H H_MR X + noise recovers the
// MS-RIS channel. Stage 2 (at the BS): with U_hat = [Omega_k H_MR_hat X]_k,
// ANM on Y = beta2 W_B^H H_RB U_hat + noise recovers the RIS-BS channel.

#include <string>

#include "hris/anm.hpp"
#include "hris/channel.hpp"
#include "hris/recovery.hpp"
#include "hris/signal.hpp"

namespace hris {

/// Looser than the solver defaults: the frequency estimates settle long
/// before the residuals reach 1e-7 unless the noise is small.
inline SolverConfig estimation_solver_defaults() {
  SolverConfig c;
  c.max_iters = 10000;
  c.abs_tol = 1e-7;
  c.rel_tol = 3e-3;
  c.reg_relative_tol = 1e-2;
  return c;
}

struct EstimatorConfig {
  SolverConfig solver = estimation_solver_defaults();
  // Multiplies sigma * ||L||_F ||R||_F / sqrt(n) * sqrt(n log n), n = N_a N_b. Calibrated with
  // `hris calibrate` (setup 1, 10 dBm) and frozen here.
  double reg_scale = 0.5;
  // Lower bound on the weight relative to ||L^H Y R^H||_2, so that noiseless
  // observations still give a well-posed problem.
  double reg_floor = 1e-4;
  int n_paths_mr = 2;
  int n_paths_rb = 2;

  void validate() const;
};

struct StageOneResult {
  PathParams params_hat_mr;
  CMatrix h_hat_mr;  // N_R x N_M
  SolverDiagnostics anm_diag;
  GainEstimate gain_fit;
  bool degenerate = false;
  std::string failure;
};

struct StageTwoResult {
  PathParams params_hat_rb;
  CMatrix h_hat_rb;  // N_B x N_R
  CMatrix u_hat;     // N_R x TK
  CascadedParams cascaded;
  SolverDiagnostics anm_diag;
  GainEstimate gain_fit;
  bool degenerate = false;
  std::string failure;
};

StageOneResult estimate_stage1(const RisObservation& obs, const TrainingConfig& cfg,
                               double sigma2, double beta1, const EstimatorConfig& est);

StageTwoResult estimate_stage2(const BsObservation& obs, const StageOneResult& stage1,
                               const TrainingConfig& cfg, double sigma2, double beta2,
                               const EstimatorConfig& est);

struct PhaseDesignOptions {
  int quantization_bits = 0;  // 0 = continuous phases
  bool local_refinement = false;
  int max_sweeps = 50;
};

/// omega = conj(a(delta_i*)) for the cascaded path with the largest |rho|.
DiagonalPhase design_phase_matrix(const CascadedParams& cascaded, int n_r,
                                  const PhaseDesignOptions& options = {});

struct Beamformers {
  CVector w_bs;
  CVector f_ms;
  bool degenerate = false;
};

/// Leading left/right singular vectors of H_RB Omega H_MR.
Beamformers design_beamformers(const CMatrix& h_rb, const DiagonalPhase& omega,
                               const CMatrix& h_mr);

struct LinkDesign {
  DiagonalPhase omega;
  CVector f_ms;
  CVector w_bs;
};

/// log2(1 + p_t beta2^2 / sigma2 * |w^H H_RB Omega H_MR f|^2) on the given
/// (true) channels.
double spectral_efficiency(const CMatrix& h_rb, const CMatrix& h_mr, const LinkDesign& design,
                           double p_t, double sigma2, double beta2);

}  // namespace hris
