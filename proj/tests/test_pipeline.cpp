#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "hris/kernels.hpp"
#include "hris/pipeline.hpp"
#include "hris/signal.hpp"
#include "test_helpers.hpp"

using namespace hris;
using test::max_abs;

namespace {

struct Scenario {
  ChannelRealization real;
  TrainingConfig training;
  LinkBudget budget;
  RisObservation ris_obs;
  BsObservation bs_obs;
};

Scenario make_scenario(std::uint64_t seed, const SystemDims& dims, const SetupSpec& setup, double sigma2,
                       int l_mr = 2, int l_rb = 2, double sep = 4.0) {
  Rng rng(seed);
  const auto ms = ArrayGeometry::ula(dims.n_ms), ris = ArrayGeometry::ula(dims.n_ris),
             bs = ArrayGeometry::ula(dims.n_bs);
  auto mr = sample_path_params(rng, ris, ms, l_mr, sep / dims.n_ris, sep / dims.n_ms);
  auto rb = sample_path_params(rng, bs, ris, l_rb, sep / dims.n_bs, sep / dims.n_ris);
  Scenario s{ChannelRealization::from_params(ms, ris, bs, mr, rb), {}, {}, {}, {}};
  TrainingOptions opt;
  opt.pilot_power = dbm_to_watts(20.0);
  s.training = make_training_config(dims, setup, opt, seed + 1);
  s.budget = link_budget(PathLossModel{}, Geometry2D::from_offsets(25.0, 10.0, 2.0),
                         AmplitudeConvention::kAttenuation);
  s.ris_obs = receive_at_ris(s.real, s.training, s.budget.amp_ris, sigma2, rng);
  s.bs_obs = receive_at_bs(s.real, s.training, s.budget.amp_bs, sigma2, rng);
  return s;
}

EstimatorConfig tight(int l_mr = 2, int l_rb = 2, double reg_floor = 1e-4) {
  EstimatorConfig e;
  e.solver = SolverConfig{};
  e.solver.max_iters = 50000;
  e.reg_floor = reg_floor;
  e.n_paths_mr = l_mr;
  e.n_paths_rb = l_rb;
  return e;
}

// Largest circular frequency error after optimal matching; gains permuted alike.
struct HopError {
  double freq = 0.0;
  double gain_rel = 0.0;
};

HopError hop_error(const PathParams& est, const PathParams& truth) {
  FrequencyEstimate e, t;
  for (std::size_t l = 0; l < truth.n_paths(); ++l) {
    t.freqs.push_back(spatial_frequency(truth.aoa[l]));
    e.freqs.push_back(spatial_frequency(est.aoa[l]));
  }
  const auto perm = pair_and_order(e, t);
  HopError h;
  for (std::size_t l = 0; l < truth.n_paths(); ++l) {
    const auto k = static_cast<std::size_t>(perm[l]);
    h.freq = std::max({h.freq, circular_distance(e.freqs[k], t.freqs[l]),
                       circular_distance(spatial_frequency(est.aod[k]), spatial_frequency(truth.aod[l]))});
    h.gain_rel = std::max(h.gain_rel, std::abs(est.gains[k] - truth.gains[l]) / std::abs(truth.gains[l]));
  }
  return h;
}

CVector gains_of(const PathParams& p) {
  return Eigen::Map<const CVector>(p.gains.data(), static_cast<Eigen::Index>(p.gains.size()));
}

StageOneResult oracle_stage1(const ChannelRealization& real) {
  StageOneResult s;
  s.params_hat_mr = real.params_mr;
  s.h_hat_mr = real.h_mr;
  s.anm_diag.converged = true;
  return s;
}

CVector random_unit(Rng& rng, int n) {
  CVector v = complex_normal_matrix(rng, n, 1);
  return v / v.norm();
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("noiseless stage 1 with a fully active surface") {
    SystemDims dims;
    const SetupSpec full{32, 32, 1, 16, 8, 8};
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      const auto s = make_scenario(seed, dims, full, 0.0);
      // The default floor biases the gains by a few 1e-6.
      const auto r = estimate_stage1(s.ris_obs, s.training, 0.0, s.budget.amp_ris, tight(2, 2, 1e-6));
      REQUIRE_FALSE(r.degenerate);
      const auto e = hop_error(r.params_hat_mr, s.real.params_mr);
      CHECK(e.freq <= 1e-3);
      CHECK(e.gain_rel <= 1e-6);
      CHECK(max_abs(r.h_hat_mr - build_channel(r.params_hat_mr, s.real.ris, s.real.ms)) <= 1e-10);
    }
  }

  TEST_CASE("single-path gain equals the matched filter") {
    const auto s = make_scenario(21, SystemDims{}, SetupSpec::table(1), 5.01e-13, 1, 1);
    EstimatorConfig est;
    est.n_paths_mr = 1;
    const auto r = estimate_stage1(s.ris_obs, s.training, 5.01e-13, s.budget.amp_ris, est);
    REQUIRE_FALSE(r.degenerate);
    const std::vector<double> tx{spatial_frequency(r.params_hat_mr.aod[0])};
    const std::vector<double> rx{spatial_frequency(r.params_hat_mr.aoa[0])};
    const CMatrix g = gain_regressor(s.ris_obs.selection, s.training.pilot, tx, rx, s.budget.amp_ris);
    const CVector y = Eigen::Map<const CVector>(s.ris_obs.y_h.data(), s.ris_obs.y_h.size());
    const Complex mf = g.col(0).dot(y) / g.col(0).squaredNorm();
    CHECK(std::abs(r.params_hat_mr.gains[0] - mf) <= 1e-10 * std::abs(mf));
  }

  TEST_CASE("stage 2 with an oracle stage 1 and no noise") {
    for (std::uint64_t seed : {31u, 32u, 33u}) {
      const auto s = make_scenario(seed, SystemDims{}, SetupSpec::table(1), 0.0);
      const auto r = estimate_stage2(s.bs_obs, oracle_stage1(s.real), s.training, 0.0, s.budget.amp_bs, tight());
      REQUIRE_FALSE(r.degenerate);
      CHECK(hop_error(r.params_hat_rb, s.real.params_rb).freq <= 1e-3);
      // Block k of U_hat is Omega_k H_MR X.
      const int t = s.training.n_beams;
      for (int k = 0; k < s.training.n_blocks; ++k) {
        const CMatrix hx = s.real.h_mr * s.training.pilot;
        const CMatrix blk = s.training.phase_schedule[k].diagonal().asDiagonal() * hx;
        CHECK(max_abs(r.u_hat.middleCols(k * t, t) - blk) == 0.0);
      }
      CHECK(r.cascaded.rho_prod.size() == 4);
    }
  }

  TEST_CASE("zero observation at the BS is degenerate") {
    auto s = make_scenario(41, SystemDims{}, SetupSpec::table(1), 0.0);
    s.bs_obs.y.setZero();
    const auto r = estimate_stage2(s.bs_obs, oracle_stage1(s.real), s.training, 0.0, s.budget.amp_bs, EstimatorConfig{});
    CHECK(r.degenerate);
    for (const auto& g : r.params_hat_rb.gains) CHECK(g == Complex(0.0));
    CHECK(max_abs(r.h_hat_rb) == 0.0);

    auto s1 = oracle_stage1(s.real);
    s1.degenerate = true;
    CHECK(estimate_stage2(s.bs_obs, s1, s.training, 0.0, s.budget.amp_bs, EstimatorConfig{}).degenerate);
  }

  TEST_CASE("phase design aligns with the strongest cascaded path") {
    const std::vector<double> phi{0.3}, theta{-0.2};
    CVector r1(1), r2(1);
    r1 << Complex(0.6, -0.8);
    r2 << Complex(2.0, 0.5);
    const auto single = cascaded_params(phi, theta, r1, r2);
    const auto omega = design_phase_matrix(single, 32);
    CHECK(omega.is_unit_modulus());
    const double norm_g = std::sqrt(kernels::cascaded_power(single.rho_prod, single.sine_diff, omega.diagonal()));
    CHECK(std::abs(norm_g - 32.0 * std::abs(single.rho_prod(0))) <= 1e-10 * norm_g);

    Rng rng(5);
    const std::vector<double> phi2{0.4, -0.5}, theta2{0.1, 0.9};
    CVector mr(2), rb(2);
    mr << Complex(3.0, 1.0), Complex(0.05, 0.0);
    rb << Complex(2.0, 0.0), Complex(0.0, 0.04);
    const auto two = cascaded_params(phi2, theta2, mr, rb);
    const auto w = design_phase_matrix(two, 8);
    const CVector a0 = sine_response(8, two.sine_diff(0));
    CHECK(std::abs(std::abs((w.diagonal().transpose() * a0)(0, 0)) - 8.0) <= 1e-12);
    const double closed = kernels::cascaded_power(two.rho_prod, two.sine_diff, w.diagonal());
    const auto best = kernels::exhaustive_phase_search(two.rho_prod, two.sine_diff, 8, 16);
    CHECK(std::sqrt(closed) >= 0.99 * std::sqrt(best.power));

    auto scaled = two;
    scaled.rho_prod *= 123.0;
    CHECK(max_abs(design_phase_matrix(scaled, 8).diagonal() - w.diagonal()) == 0.0);

    CHECK_THROWS_AS(design_phase_matrix(CascadedParams{}, 8), DomainError);
  }

  TEST_CASE("phase design options") {
    Rng rng(6);
    const std::vector<double> phi{0.4, -0.5}, theta{0.1, -0.9};
    const CVector mr = complex_normal_matrix(rng, 2, 1), rb = complex_normal_matrix(rng, 2, 1);
    const auto c = cascaded_params(phi, theta, mr, rb);
    const auto base = design_phase_matrix(c, 16);

    PhaseDesignOptions q;
    q.quantization_bits = 2;
    const auto quant = design_phase_matrix(c, 16, q);
    CHECK(quant.is_unit_modulus());
    for (Eigen::Index n = 0; n < 16; ++n) {
      const double k = std::arg(quant.diagonal()(n)) / (kPi / 2.0);
      CHECK(std::abs(k - std::round(k)) <= 1e-12);
    }

    PhaseDesignOptions ref;
    ref.local_refinement = true;
    const auto refined = design_phase_matrix(c, 16, ref);
    CHECK(refined.is_unit_modulus());
    CHECK(kernels::cascaded_power(c.rho_prod, c.sine_diff, refined.diagonal()) >=
          kernels::cascaded_power(c.rho_prod, c.sine_diff, base.diagonal()));
  }

  TEST_CASE("beamformers") {
    Rng rng(7);
    const CVector u = random_unit(rng, 16), v = random_unit(rng, 16);
    const CMatrix h_rb = 3.0 * u * random_unit(rng, 32).adjoint();
    const CMatrix h_mr = random_unit(rng, 32) * v.adjoint();
    const auto id = DiagonalPhase::identity(32);
    const auto bf = design_beamformers(h_rb, id, h_mr);
    CHECK_FALSE(bf.degenerate);
    CHECK(std::abs(std::abs(bf.w_bs.dot(u)) - 1.0) <= 1e-12);
    CHECK(std::abs(std::abs(bf.f_ms.dot(v)) - 1.0) <= 1e-12);

    for (int rep = 0; rep < 5; ++rep) {
      const CMatrix a = complex_normal_matrix(rng, 16, 32), b = complex_normal_matrix(rng, 32, 16);
      CVector w(32);
      for (int i = 0; i < 32; ++i) w(i) = random_phase(rng);
      const DiagonalPhase omega(w);
      const CMatrix h = a * omega.dense() * b;
      const auto opt = design_beamformers(a, omega, b);
      CHECK(std::abs(opt.w_bs.norm() - 1.0) <= 1e-12);
      CHECK(std::abs(opt.f_ms.norm() - 1.0) <= 1e-12);
      const double best = std::abs((opt.w_bs.adjoint() * h * opt.f_ms)(0, 0));
      const double smax = Eigen::JacobiSVD<CMatrix>(h).singularValues()(0);
      CHECK(std::abs(best - smax) <= 1e-10 * smax);
      int violations = 0;
      for (int k = 0; k < 1000; ++k) {
        const CVector x = random_unit(rng, 16), y = random_unit(rng, 16);
        violations += std::abs((x.adjoint() * h * y)(0, 0)) > best * (1.0 + 1e-12);
      }
      CHECK(violations == 0);
    }

    const auto zero = design_beamformers(CMatrix::Zero(16, 32), id, CMatrix::Zero(32, 16));
    CHECK(zero.degenerate);
    CHECK(std::abs(zero.w_bs.norm() - 1.0) <= 1e-15);
    CHECK(std::abs(zero.f_ms.norm() - 1.0) <= 1e-15);
  }

  TEST_CASE("spectral efficiency") {
    const auto ms = ArrayGeometry::ula(16), ris = ArrayGeometry::ula(32), bs = ArrayGeometry::ula(16);
    const Complex rho_mr(0.8, -0.3), rho_rb(-0.2, 1.1);
    const auto real = ChannelRealization::from_params(ms, ris, bs, {{0.2}, {-0.4}, {rho_mr}},
                                                      {{0.5}, {0.1}, {rho_rb}});
    const auto c = cascaded_params(real.params_mr.aoa, real.params_rb.aod, gains_of(real.params_mr),
                                   gains_of(real.params_rb));
    LinkDesign d;
    d.omega = design_phase_matrix(c, 32);
    const auto bf = design_beamformers(real.h_rb, d.omega, real.h_mr);
    d.w_bs = bf.w_bs;
    d.f_ms = bf.f_ms;
    const double p_t = 0.1, sigma2 = 5e-13, beta2 = 4.4e-7;
    const double want = std::log2(1.0 + p_t * beta2 * beta2 / sigma2 * 16.0 * 32.0 * 32.0 * 16.0 *
                                            std::norm(rho_rb * rho_mr));
    const double got = spectral_efficiency(real.h_rb, real.h_mr, d, p_t, sigma2, beta2);
    CHECK(std::abs(got - want) <= 1e-10 * want);

    CHECK(spectral_efficiency(CMatrix::Zero(16, 32), CMatrix::Zero(32, 16), d, p_t, sigma2, beta2) == 0.0);
    CHECK_THROWS_AS(spectral_efficiency(real.h_rb, real.h_mr, d, 0.0, sigma2, beta2), DomainError);
  }

  TEST_CASE("end-to-end noiseless reconstruction") {
    for (std::uint64_t seed : {51u, 52u}) {
      const auto s = make_scenario(seed, SystemDims{}, SetupSpec::table(1), 0.0);
      const auto est = tight();
      const auto r1 = estimate_stage1(s.ris_obs, s.training, 0.0, s.budget.amp_ris, est);
      const auto r2 = estimate_stage2(s.bs_obs, r1, s.training, 0.0, s.budget.amp_bs, est);
      REQUIRE_FALSE(r2.degenerate);
      const auto omega = design_phase_matrix(r2.cascaded, 32);
      const CMatrix h = cascaded_channel(s.real, omega);
      const CMatrix h_hat = r2.h_hat_rb * omega.dense() * r1.h_hat_mr;
      CHECK((h_hat - h).norm() <= 1e-3 * h.norm());
    }
  }

  TEST_CASE("stage 2 degrades as stage-1 angles are perturbed") {
    SystemDims dims{8, 16, 8};
    const SetupSpec setup{4, 4, 4, 8, 8, 8};
    const std::vector<double> levels{0.0, 0.003, 0.01};
    std::vector<std::vector<double>> err(levels.size());
    Rng perturb(99);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      const auto s = make_scenario(1000 + trial, dims, setup, 0.0, 2, 2, 2.0);
      const std::vector<double> z{normal(perturb), normal(perturb), normal(perturb), normal(perturb)};
      for (std::size_t k = 0; k < levels.size(); ++k) {
        auto s1 = oracle_stage1(s.real);
        for (int l = 0; l < 2; ++l) {
          s1.params_hat_mr.aoa[l] = angle_from_frequency(
              wrap_unit(spatial_frequency(s.real.params_mr.aoa[l]) + levels[k] * z[l]));
          s1.params_hat_mr.aod[l] = angle_from_frequency(
              wrap_unit(spatial_frequency(s.real.params_mr.aod[l]) + levels[k] * z[l + 2]));
        }
        s1.h_hat_mr = build_channel(s1.params_hat_mr, s.real.ris, s.real.ms);
        const auto r = estimate_stage2(s.bs_obs, s1, s.training, 0.0, s.budget.amp_bs, EstimatorConfig{});
        const double e = r.degenerate ? 0.25 : hop_error(r.params_hat_rb, s.real.params_rb).freq;
        err[k].push_back(e * e);
      }
    }
    for (std::size_t k = 1; k < levels.size(); ++k) {
      const auto t = test::paired_greater(err[k], err[k - 1]);
      CAPTURE(k);
      CAPTURE(t.mean_diff);
      CHECK(t.p_one_sided < 0.05);
    }
  }
}
