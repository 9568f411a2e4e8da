#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "hris/harness.hpp"

namespace hris {

namespace fs = std::filesystem;

namespace {

std::string setup_label(int setup) { return setup == 0 ? "custom" : std::to_string(setup); }

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_short(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<MetricRow> report_rows(const AggregateReport& report) {
  std::vector<MetricRow> rows;
  const auto& fields = metric_fields();
  for (const auto& cell : report.cells) {
    const std::string label = setup_label(cell.setup);
    for (std::size_t f = 0; f < fields.size(); ++f) {
      const auto& s = cell.stats[f];
      rows.push_back({label, cell.p_t_dbm, fields[f].name, s.mean(), s.standard_error(), s.count()});
    }
    const double n = static_cast<double>(cell.n_trials);
    const double fail = cell.n_failed / n;
    const double nonconv = cell.n_nonconverged / n;
    rows.push_back({label, cell.p_t_dbm, "failure_rate", fail, std::sqrt(fail * (1 - fail) / n),
                    cell.n_trials});
    rows.push_back({label, cell.p_t_dbm, "nonconverged_rate", nonconv,
                    std::sqrt(nonconv * (1 - nonconv) / n), cell.n_trials});
  }
  return rows;
}

std::string format_metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "setup,p_t_dbm,metric,mean,stderr,n\n";
  for (const auto& r : rows) {
    out += r.setup + "," + fmt(r.p_t_dbm) + "," + r.metric + "," + fmt(r.mean) + "," +
           fmt(r.stderr_) + "," + std::to_string(r.n) + "\n";
  }
  return out;
}

std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty metrics CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "setup,p_t_dbm,metric,mean,stderr,n") throw ConfigError("unexpected CSV header");
  std::vector<MetricRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 6) throw ConfigError("CSV line " + std::to_string(line_no) + ": expected 6 columns");
    try {
      rows.push_back({cols[0], std::stod(cols[1]), cols[2], std::stod(cols[3]), std::stod(cols[4]),
                      std::stol(cols[5])});
    } catch (const std::exception&) {
      throw ConfigError("CSV line " + std::to_string(line_no) + ": bad number");
    }
  }
  return rows;
}

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_metrics_csv(ss.str());
}

void ensure_writable_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
  const fs::path probe = fs::path(dir) / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out || !(out << "x") || !out.flush()) {
      fs::remove(probe, ec);
      throw IoError("output directory '" + dir + "' is not writable");
    }
  }
  fs::remove(probe, ec);
}

std::string render_line_plot(const std::string& title, const std::string& x_label,
                             const std::string& y_label, const std::vector<PlotSeries>& series,
                             bool log_y) {
  constexpr double kW = 640, kH = 420, kL = 80, kR = 160, kT = 40, kB = 60;
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  auto usable = [&](double y) { return std::isfinite(y) && (!log_y || y > 0.0); };

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.y[i]) || !std::isfinite(s.x[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 1, x1 += 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  if (log_y) {
    y0 = std::floor(y0);
    y1 = std::ceil(y1);
  } else {
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
  }
  auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kT + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                 "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" viewBox=\"0 0 " << kW << " " << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kL + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
    << xml_escape(title) << "</text>\n"
    << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  // Ticks: five on x, one per decade (log) or five (linear) on y.
  for (int i = 0; i <= 4; ++i) {
    const double x = x0 + (x1 - x0) * i / 4.0;
    o << "<line x1=\"" << px(x) << "\" y1=\"" << kT + ph << "\" x2=\"" << px(x) << "\" y2=\""
      << kT + ph + 5 << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << px(x) << "\" y=\"" << kT + ph + 18 << "\" text-anchor=\"middle\">"
      << fmt_short(x) << "</text>\n";
  }
  const int ny = log_y ? static_cast<int>(y1 - y0) : 4;
  for (int i = 0; i <= ny; ++i) {
    const double v = y0 + (y1 - y0) * i / ny;
    const double ypix = kT + (1.0 - (v - y0) / (y1 - y0)) * ph;
    const std::string label = log_y ? "1e" + std::to_string(static_cast<int>(std::lround(v))) : fmt_short(v);
    o << "<line x1=\"" << kL - 5 << "\" y1=\"" << ypix << "\" x2=\"" << kL << "\" y2=\"" << ypix
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kL << "\" y1=\"" << ypix << "\" x2=\"" << kL + pw << "\" y2=\"" << ypix
      << "\" stroke=\"#dddddd\"/>\n"
      << "<text x=\"" << kL - 8 << "\" y=\"" << ypix + 4 << "\" text-anchor=\"end\">" << label
      << "</text>\n";
  }
  o << "<text x=\"" << kL + pw / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">"
    << xml_escape(x_label) << "</text>\n"
    << "<text x=\"18\" y=\"" << kT + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << kT + ph / 2 << ")\">" << xml_escape(y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % 8];
    std::string points;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.y[i])) continue;
      points += fmt_short(px(s.x[i])) + "," + fmt_short(py(s.y[i])) + " ";
      o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\""
        << color << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
      << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"" << points << "\"/>\n";
    const double ly = kT + 14 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << kL + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << kL + pw + 36
      << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"1.5\""
      << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n"
      << "<text x=\"" << kL + pw + 42 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

namespace {

struct PlotSpec {
  const char* file;
  const char* title;
  const char* y_label;
  std::vector<const char*> metrics;
  bool log_y;
};

const std::vector<PlotSpec>& plot_specs() {
  static const std::vector<PlotSpec> specs = {
      {"mse_theta_mr.svg", "MS-RIS angle of departure", "MSE (rad^2)", {"mse_theta_mr"}, true},
      {"mse_phi_mr.svg", "MS-RIS angle of arrival", "MSE (rad^2)", {"mse_phi_mr"}, true},
      {"mse_theta_rb.svg", "RIS-BS angle of departure", "MSE (rad^2)", {"mse_theta_rb"}, true},
      {"mse_phi_rb.svg", "RIS-BS angle of arrival", "MSE (rad^2)", {"mse_phi_rb"}, true},
      {"mse_delta.svg", "Cascaded angle differences", "MSE (rad^2)", {"mse_delta"}, true},
      {"mse_rho_prod.svg", "Cascaded gain products", "MSE", {"mse_rho_prod"}, true},
      {"se.svg", "Spectral efficiency", "SE (bits/s/Hz)", {"se_est", "se_perfect"}, false},
  };
  return specs;
}

std::vector<PlotSeries> series_for(const std::vector<MetricRow>& rows, const char* metric,
                                   const std::string& prefix, bool dashed) {
  std::map<std::string, PlotSeries> by_setup;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (r.metric != metric) continue;
    if (!by_setup.count(r.setup)) {
      order.push_back(r.setup);
      by_setup[r.setup].name = prefix + r.setup;
      by_setup[r.setup].dashed = dashed;
    }
    by_setup[r.setup].x.push_back(r.p_t_dbm);
    by_setup[r.setup].y.push_back(r.n > 0 ? r.mean : NAN);
  }
  std::vector<PlotSeries> out;
  for (const auto& s : order) out.push_back(by_setup[s]);
  return out;
}

}  // namespace

std::vector<std::string> emit_outputs(const AggregateReport& report, const std::string& dir) {
  if (report.cells.empty()) throw DomainError("report has no cells");
  ensure_writable_dir(dir);
  const auto rows = report_rows(report);
  std::vector<MetricRow> baseline;
  if (!report.config.baseline_csv.empty()) baseline = read_metrics_csv(report.config.baseline_csv);

  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("metrics.csv", format_metrics_csv(rows));
  files.emplace_back("config.json", nlohmann::json(report.config).dump(2) + "\n");
  for (const auto& spec : plot_specs()) {
    std::vector<PlotSeries> series;
    for (const char* metric : spec.metrics) {
      const bool dashed = std::string(metric) == "se_perfect";
      const std::string prefix =
          spec.metrics.size() > 1 ? std::string(metric) + ", setup " : std::string("setup ");
      for (auto& s : series_for(rows, metric, prefix, dashed)) series.push_back(std::move(s));
      for (auto& s : series_for(baseline, metric, "baseline ", true)) series.push_back(std::move(s));
    }
    files.emplace_back(spec.file, render_line_plot(spec.title, "P_t (dBm)", spec.y_label, series,
                                                   spec.log_y));
  }

  std::vector<fs::path> staged;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& p : staged) fs::remove(p, ec);
  };
  for (const auto& [name, content] : files) {
    const fs::path tmp = fs::path(dir) / (name + ".tmp");
    staged.push_back(tmp);
    std::ofstream out(tmp, std::ios::binary);
    if (!out || !(out << content) || !out.flush()) {
      cleanup();
      throw IoError("failed to write '" + tmp.string() + "'");
    }
  }
  std::vector<std::string> written;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const fs::path final_path = fs::path(dir) / files[i].first;
    std::error_code ec;
    fs::rename(staged[i], final_path, ec);
    if (ec) {
      cleanup();
      for (const auto& w : written) fs::remove(w, ec);
      throw IoError("failed to move '" + final_path.string() + "' into place");
    }
    written.push_back(final_path.string());
  }
  return written;
}

}  // namespace hris
