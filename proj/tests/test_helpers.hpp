#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "hris/types.hpp"

namespace test {

inline double max_abs(const hris::CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline hris::CMatrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  hris::CMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = {j[r][c][0].get<double>(), j[r][c][1].get<double>()};
  return m;
}

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing test data " + path);
  return nlohmann::json::parse(in);
}

inline std::string data_path(const std::string& name) { return std::string(HRIS_TEST_DATA_DIR) + "/" + name; }

struct PairedTest {
  double mean_diff = 0.0;
  double z = 0.0;
  double p_one_sided = 1.0;  // H1: mean(a - b) > 0
};

// Paired one-sided test on a - b. Trials are many (>= 50), so the normal
// approximation to the t distribution is used.
inline PairedTest paired_greater(const std::vector<double>& a, const std::vector<double>& b) {
  PairedTest t;
  const auto n = static_cast<double>(a.size());
  if (a.size() != b.size() || a.size() < 2) return t;
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += (a[i] - b[i]) / n;
  double var = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) var += (a[i] - b[i] - mean) * (a[i] - b[i] - mean) / (n - 1.0);
  t.mean_diff = mean;
  if (var <= 0.0) {
    t.z = mean > 0.0 ? 1e300 : (mean < 0.0 ? -1e300 : 0.0);
  } else {
    t.z = mean / std::sqrt(var / n);
  }
  t.p_one_sided = 0.5 * std::erfc(t.z / std::sqrt(2.0));
  return t;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

struct RankCorrelation {
  double rho = 0.0;
  double p_negative = 1.0;  // exact permutation p-value for H1: rho < 0
};

// Spearman correlation with the exact permutation distribution; n <= 9.
inline RankCorrelation spearman_negative(const std::vector<double>& x, const std::vector<double>& y) {
  RankCorrelation out;
  const auto rx = ranks(x), ry = ranks(y);
  out.rho = pearson(rx, ry);
  std::vector<double> perm = ry;
  std::sort(perm.begin(), perm.end());
  long total = 0, hits = 0;
  do {
    ++total;
    hits += pearson(rx, perm) <= out.rho + 1e-12;
  } while (std::next_permutation(perm.begin(), perm.end()));
  out.p_negative = static_cast<double>(hits) / static_cast<double>(total);
  return out;
}

}  // namespace test
