#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "hris/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw hris::ConfigError("bad number '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage hybrid-RIS channel estimation simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> setup;
  std::string sweep;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool serial = false;

  auto* run = app.add_subcommand("run", "Run a Monte Carlo experiment and write outputs");
  run->add_option("--config", config_path, "JSON experiment config")->required();
  run->add_option("--setup", setup, "Table-I setup (1, 2 or 3)")->check(CLI::Range(1, 3));
  run->add_option("--pt-sweep", sweep, "Transmit power sweep in dBm, start:step:stop");
  run->add_option("--trials", trials, "Trials per (setup, power) point");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--serial", serial, "Run trials on one thread");

  auto* validate = app.add_subcommand("validate", "Check a config and print it resolved");
  validate->add_option("--config", config_path, "JSON experiment config")->required();

  std::string scales_text = "0.25,0.5,1,2";
  double calib_pt = 10.0;
  auto* calibrate = app.add_subcommand("calibrate", "Sweep the regularizer scale");
  calibrate->add_option("--config", config_path, "JSON experiment config")->required();
  calibrate->add_option("--scales", scales_text, "Comma-separated candidate scales");
  calibrate->add_option("--pt", calib_pt, "Transmit power in dBm");
  calibrate->add_option("--trials", trials, "Trials per scale");
  calibrate->add_option("--seed", seed, "Master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    hris::ExperimentConfig cfg = hris::load_config(config_path);
    if (setup) cfg.setups = {*setup};
    if (!sweep.empty()) cfg.p_t_sweep_dbm = hris::parse_sweep(sweep);
    if (trials) cfg.n_trials = *trials;
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    cfg.validate();

    if (*validate) {
      std::cout << nlohmann::json(cfg).dump(2) << "\n";
      return 0;
    }

    const auto exec = serial ? hris::Execution::kSerial : hris::Execution::kParallel;
    if (*calibrate) {
      cfg.setups.resize(1);
      const auto points = hris::calibrate_reg_scale(cfg, parse_list(scales_text), calib_pt, exec);
      const hris::CalibrationPoint* best = nullptr;
      std::printf("scale,angle_mse,n_converged\n");
      for (const auto& p : points) {
        std::printf("%.17g,%.17g,%d\n", p.scale, p.angle_mse, p.n_converged);
        if (p.n_converged > 0 && (!best || p.angle_mse < best->angle_mse)) best = &p;
      }
      if (best) std::fprintf(stderr, "best reg_scale: %g\n", best->scale);
      return 0;
    }

    hris::ensure_writable_dir(cfg.output_dir);
    const auto report = hris::run_experiment(cfg, exec, [](const hris::CellReport& c) {
      std::fprintf(stderr, "setup %d, P_t %g dBm: %d trials, %d not converged, %.1f s\n", c.setup,
                   c.p_t_dbm, c.n_trials, c.n_nonconverged, c.wall_seconds);
    });
    for (const auto& f : hris::emit_outputs(report, cfg.output_dir)) std::fprintf(stderr, "wrote %s\n", f.c_str());
    return 0;
  } catch (const hris::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const hris::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
