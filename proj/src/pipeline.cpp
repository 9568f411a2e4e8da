#include "hris/pipeline.hpp"

#include "hris/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hris {

void EstimatorConfig::validate() const {
  solver.validate();
  if (!(reg_scale > 0.0)) throw ConfigError("reg_scale must be positive");
  if (!(reg_floor >= 0.0)) throw ConfigError("reg_floor must be nonnegative");
  if (n_paths_mr < 1 || n_paths_rb < 1) throw ConfigError("path counts must be positive");
}

namespace {

double spectral_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

double choose_reg(const CMatrix& y, const CMatrix& left, const CMatrix& right, double sigma2,
                  const EstimatorConfig& est) {
  // RMS gain of the sensing operators on unit-modulus atoms; equals 1 when
  // H is observed directly.
  const double op_gain = left.norm() * right.norm() /
                         std::sqrt(static_cast<double>(left.cols() * right.rows()));
  const double noise_reg = regularizer(std::sqrt(sigma2), static_cast<int>(left.cols()),
                                       static_cast<int>(right.rows()), est.reg_scale, op_gain);
  const double floor_reg = est.reg_floor * spectral_norm(left.adjoint() * y * right.adjoint());
  return std::max(noise_reg, floor_reg);
}

struct HopEstimate {
  PathParams params;
  GainEstimate gains;
};

// Frequencies on each side come out of root-MUSIC unordered; the pairing of
// transmit and receive frequencies into paths is the one with the smallest
// LS residual.
HopEstimate fit_hop(const AnmSolution& sol, int n_paths, const CMatrix& observed,
                    const CMatrix& left, const CMatrix& right, double scale) {
  const auto tx = root_music(sol.tx_toeplitz, n_paths);
  const auto rx = root_music(sol.rx_toeplitz, n_paths);
  std::vector<int> perm(n_paths);
  std::iota(perm.begin(), perm.end(), 0);
  HopEstimate best;
  bool first = true;
  std::vector<double> rx_perm(n_paths);
  do {
    for (int l = 0; l < n_paths; ++l) rx_perm[l] = rx.freqs[perm[l]];
    auto g = ls_gains(observed, left, right, tx.freqs, rx_perm, scale);
    if (first || g.residual < best.gains.residual) {
      first = false;
      best.gains = std::move(g);
      best.params.aod.clear();
      best.params.aoa.clear();
      for (int l = 0; l < n_paths; ++l) {
        best.params.aod.push_back(angle_from_frequency(tx.freqs[l]));
        best.params.aoa.push_back(angle_from_frequency(rx_perm[l]));
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.params.gains.assign(best.gains.gains.data(), best.gains.gains.data() + n_paths);
  return best;
}

PathParams zero_params(int n_paths) {
  PathParams p;
  p.aod.assign(n_paths, 0.0);
  p.aoa.assign(n_paths, 0.0);
  p.gains.assign(n_paths, Complex(0.0));
  return p;
}

}  // namespace

StageOneResult estimate_stage1(const RisObservation& obs, const TrainingConfig& cfg,
                               double sigma2, double beta1, const EstimatorConfig& est) {
  est.validate();
  const auto ris = ArrayGeometry::ula(cfg.n_ris);
  const auto ms = ArrayGeometry::ula(static_cast<int>(cfg.pilot.rows()));

  AnmProblem problem;
  problem.observed = obs.y_h;
  problem.left_op = beta1 * obs.selection;
  problem.right_op = cfg.pilot;
  problem.reg = choose_reg(problem.observed, problem.left_op, problem.right_op, sigma2, est);

  StageOneResult out;
  try {
    const AnmSolution sol = solve_anm(problem, est.solver);
    out.anm_diag = sol.diagnostics;
    auto hop = fit_hop(sol, est.n_paths_mr, obs.y_h, obs.selection, cfg.pilot, beta1);
    out.params_hat_mr = std::move(hop.params);
    out.gain_fit = std::move(hop.gains);
    out.h_hat_mr = build_channel(out.params_hat_mr, ris, ms);
  } catch (const std::exception& e) {
    out.degenerate = true;
    out.failure = e.what();
    out.params_hat_mr = zero_params(est.n_paths_mr);
    out.gain_fit.gains = CVector::Zero(est.n_paths_mr);
    out.h_hat_mr = CMatrix::Zero(ris.n_elements, ms.n_elements);
  }
  return out;
}

StageTwoResult estimate_stage2(const BsObservation& obs, const StageOneResult& stage1,
                               const TrainingConfig& cfg, double sigma2, double beta2,
                               const EstimatorConfig& est) {
  est.validate();
  const auto ris = ArrayGeometry::ula(cfg.n_ris);
  const auto bs = ArrayGeometry::ula(static_cast<int>(cfg.bs_combiner.rows()));
  const CMatrix wh = cfg.bs_combiner.adjoint();

  StageTwoResult out;
  out.u_hat = assemble_u(stage1.h_hat_mr, cfg);

  AnmProblem problem;
  problem.observed = obs.y;
  problem.left_op = beta2 * wh;
  problem.right_op = out.u_hat;
  problem.reg = choose_reg(problem.observed, problem.left_op, problem.right_op, sigma2, est);

  const CVector rho_mr = Eigen::Map<const CVector>(stage1.params_hat_mr.gains.data(),
                                                   stage1.params_hat_mr.gains.size());
  try {
    if (stage1.degenerate) throw EstimationError("stage 1 failed");
    const AnmSolution sol = solve_anm(problem, est.solver);
    out.anm_diag = sol.diagnostics;
    auto hop = fit_hop(sol, est.n_paths_rb, obs.y, wh, out.u_hat, beta2);
    out.params_hat_rb = std::move(hop.params);
    out.gain_fit = std::move(hop.gains);
    out.h_hat_rb = build_channel(out.params_hat_rb, bs, ris);
  } catch (const std::exception& e) {
    out.degenerate = true;
    out.failure = e.what();
    out.params_hat_rb = zero_params(est.n_paths_rb);
    out.gain_fit.gains = CVector::Zero(est.n_paths_rb);
    out.h_hat_rb = CMatrix::Zero(bs.n_elements, ris.n_elements);
  }
  out.cascaded = cascaded_params(stage1.params_hat_mr.aoa, out.params_hat_rb.aod, rho_mr,
                                 out.gain_fit.gains);
  return out;
}

DiagonalPhase design_phase_matrix(const CascadedParams& cascaded, int n_r,
                                  const PhaseDesignOptions& options) {
  const Eigen::Index n_paths = cascaded.rho_prod.size();
  if (n_paths == 0 || cascaded.delta_vec.size() != n_paths) {
    throw DomainError("phase design needs nonempty cascaded parameters");
  }
  if (n_r < 1) throw DomainError("RIS size must be positive");
  Eigen::Index best = 0;
  cascaded.rho_prod.cwiseAbs().maxCoeff(&best);
  CVector omega = sine_response(n_r, std::sin(cascaded.delta_vec(best))).conjugate();

  if (options.local_refinement) {
    // Coordinate ascent: with the other elements fixed, ||G||^2 is affine in
    // Re(omega_n b_n), so the best unit-modulus omega_n is conj(b_n)/|b_n|.
    CMatrix a(n_r, n_paths);
    for (Eigen::Index i = 0; i < n_paths; ++i) a.col(i) = sine_response(n_r, std::sin(cascaded.delta_vec(i)));
    const RVector w = cascaded.rho_prod.cwiseAbs2();
    double power = kernels::cascaded_power(cascaded.rho_prod, cascaded.sine_diff, omega);
    for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
      for (int n = 0; n < n_r; ++n) {
        const CVector g = a.transpose() * omega;
        Complex b = 0.0;
        for (Eigen::Index i = 0; i < n_paths; ++i) {
          b += w(i) * std::conj(g(i) - omega(n) * a(n, i)) * a(n, i);
        }
        if (std::abs(b) > 0.0) omega(n) = std::conj(b) / std::abs(b);
      }
      const double next = kernels::cascaded_power(cascaded.rho_prod, cascaded.sine_diff, omega);
      if (next <= power * (1.0 + 1e-12)) break;
      power = next;
    }
  }

  if (options.quantization_bits > 0) {
    const double levels = std::ldexp(1.0, options.quantization_bits);
    for (int n = 0; n < n_r; ++n) {
      const double q = std::round(std::arg(omega(n)) / (2.0 * kPi) * levels);
      omega(n) = std::polar(1.0, 2.0 * kPi * q / levels);
    }
  }
  return DiagonalPhase(std::move(omega));
}

Beamformers design_beamformers(const CMatrix& h_rb, const DiagonalPhase& omega,
                               const CMatrix& h_mr) {
  if (h_rb.cols() != omega.size() || h_mr.rows() != omega.size()) {
    throw DomainError("beamformer design dimensions differ");
  }
  const CMatrix h = h_rb * omega.diagonal().asDiagonal() * h_mr;
  Beamformers bf;
  Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues().size() == 0 || !(svd.singularValues()(0) > 0.0)) {
    bf.degenerate = true;
    bf.w_bs = CVector::Unit(h.rows(), 0);
    bf.f_ms = CVector::Unit(h.cols(), 0);
    return bf;
  }
  bf.w_bs = svd.matrixU().col(0);
  bf.f_ms = svd.matrixV().col(0);
  return bf;
}

double spectral_efficiency(const CMatrix& h_rb, const CMatrix& h_mr, const LinkDesign& design,
                           double p_t, double sigma2, double beta2) {
  if (!(p_t > 0.0)) throw DomainError("transmit power must be positive");
  if (!(sigma2 > 0.0)) throw DomainError("noise power must be positive");
  const Complex gain = design.w_bs.adjoint() *
                       (h_rb * design.omega.diagonal().asDiagonal() * h_mr) * design.f_ms;
  return std::log2(1.0 + p_t * beta2 * beta2 / sigma2 * std::norm(gain));
}

}  // namespace hris
