#include "hris/types.hpp"

#include <cmath>

namespace hris {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Complex complex_normal(Rng& rng, double variance) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  const double re = normal(rng);
  const double im = normal(rng);
  return {re, im};
}

CMatrix complex_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                              double variance) {
  CMatrix out(rows, cols);
  // Column-major fill keeps the draw order stable across Eigen versions.
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      out(r, c) = complex_normal(rng, variance);
    }
  }
  return out;
}

Complex random_phase(Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * kPi);
  return std::polar(1.0, uniform(rng));
}

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t w : words) {
    h = splitmix64(h ^ splitmix64(w));
  }
  return h;
}

}  // namespace hris
