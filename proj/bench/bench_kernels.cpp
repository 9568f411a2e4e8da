// Serial reference vs OpenMP kernels, plus the Monte Carlo trial loop. The
// references are the direct formulations (Kronecker regressor, brute-force
// search), so the ratio includes algorithmic gains as well as threads.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>

#include "CLI11.hpp"

#include "hris/harness.hpp"
#include "hris/kernels.hpp"

using namespace hris;

namespace {

// Best of `reps` wall-clock runs, in milliseconds.
double time_ms(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-28s reference %10.2f ms   kernel %10.2f ms   ratio %7.2fx\n", name, serial, parallel,
              serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel benchmark"};
  int reps = 3, trials = 16, n_r = 8;
  app.add_option("--reps", reps, "Repetitions per kernel (best is reported)");
  app.add_option("--trials", trials, "Trials for the Monte Carlo loop");
  app.add_option("--n-r", n_r, "RIS elements for the phase search");
  CLI11_PARSE(app, argc, argv);

  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
  Rng rng(7);

  {
    const CMatrix left = complex_normal_matrix(rng, 8, 32);
    const CMatrix right = complex_normal_matrix(rng, 16, 40);
    const std::vector<double> tx{0.1, 0.4, 0.7, 0.9}, rx{0.05, 0.3, 0.55, 0.8};
    CMatrix a, b;
    const double s = time_ms(reps * 10, [&] { a = kernels::serial::structured_regressor(left, right, tx, rx, 1.0); });
    const double p = time_ms(reps * 10, [&] { b = kernels::structured_regressor(left, right, tx, rx, 1.0); });
    report("structured_regressor", s, p);
    std::printf("  max |diff| %.2e\n", (a - b).cwiseAbs().maxCoeff());
  }

  {
    CVector rho = complex_normal_matrix(rng, 4, 1);
    RVector sd(4);
    sd << 0.3, -0.7, 1.1, -0.2;
    kernels::PhaseSearchResult a, b;
    const double s = time_ms(1, [&] { a = kernels::serial::exhaustive_phase_search(rho, sd, n_r, 8); });
    const double p = time_ms(1, [&] { b = kernels::exhaustive_phase_search(rho, sd, n_r, 8); });
    report("exhaustive_phase_search", s, p);
    std::printf("  power %.12g vs %.12g\n", a.power, b.power);
  }

  {
    ExperimentConfig cfg;
    cfg.n_trials = trials;
    const double s = time_ms(1, [&] { run_cell(cfg, 1, 10.0, Execution::kSerial); });
    const double p = time_ms(1, [&] { run_cell(cfg, 1, 10.0, Execution::kParallel); });
    report("run_cell (setup 1, 10 dBm)", s, p);
  }
  return 0;
}
