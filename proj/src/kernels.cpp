#include "hris/kernels.hpp"

#include <cmath>
#include <limits>

#include <omp.h>

#include "hris/channel.hpp"

namespace hris::kernels {

namespace {

void check_freqs(std::span<const double> tx, std::span<const double> rx) {
  if (tx.size() != rx.size()) throw DomainError("frequency lists differ in length");
}

void check_search(const CVector& rho, const RVector& s, int n_r, int n_levels) {
  if (rho.size() != s.size() || rho.size() == 0) throw DomainError("cascaded path lists differ in length");
  if (n_r < 1 || n_levels < 1) throw DomainError("search needs positive sizes");
  if (std::pow(static_cast<double>(n_levels), n_r - 1) > 1e11) {
    throw DomainError("exhaustive phase search too large");
  }
}

CMatrix response_table(const RVector& sine_diff, int n_r) {
  CMatrix a(n_r, sine_diff.size());
  for (Eigen::Index i = 0; i < sine_diff.size(); ++i) a.col(i) = sine_response(n_r, sine_diff(i));
  return a;
}

}  // namespace

CMatrix structured_regressor(const CMatrix& left_op, const CMatrix& right_op,
                             std::span<const double> tx_freqs, std::span<const double> rx_freqs,
                             double scale) {
  check_freqs(tx_freqs, rx_freqs);
  const auto n_paths = static_cast<Eigen::Index>(tx_freqs.size());
  CMatrix g(left_op.rows() * right_op.cols(), n_paths);
#pragma omp parallel for schedule(static)
  for (Eigen::Index l = 0; l < n_paths; ++l) {
    const CVector la = left_op * frequency_response(static_cast<int>(left_op.cols()), rx_freqs[l]);
    const CVector ar = right_op.adjoint() * frequency_response(static_cast<int>(right_op.rows()), tx_freqs[l]);
    const CMatrix outer = scale * la * ar.adjoint();
    g.col(l) = Eigen::Map<const CVector>(outer.data(), outer.size());
  }
  return g;
}

double cascaded_power(const CVector& rho_prod, const RVector& sine_diff, const CVector& omega) {
  double power = 0.0;
  for (Eigen::Index i = 0; i < rho_prod.size(); ++i) {
    const Complex g = omega.transpose() * sine_response(static_cast<int>(omega.size()), sine_diff(i));
    power += std::norm(rho_prod(i)) * std::norm(g);
  }
  return power;
}

PhaseSearchResult exhaustive_phase_search(const CVector& rho_prod, const RVector& sine_diff,
                                          int n_r, int n_levels) {
  check_search(rho_prod, sine_diff, n_r, n_levels);
  const CMatrix a = response_table(sine_diff, n_r);
  const Eigen::Index n_paths = rho_prod.size();
  const RVector weight = rho_prod.cwiseAbs2();
  std::vector<Complex> phasor(n_levels);
  for (int q = 0; q < n_levels; ++q) phasor[q] = std::polar(1.0, 2.0 * kPi * q / n_levels);

  PhaseSearchResult best;
  best.power = -1.0;
  if (n_r == 1) {
    best.power = weight.dot(a.row(0).cwiseAbs2().transpose());
    best.levels = {0};
    return best;
  }

  // Element 1 is split across threads, elements 2..n_r-2 run a reflected Gray
  // code and the last element is maximized in closed form: with the others
  // fixed the objective is c + 2 Re(omega b), so the best level is the one
  // nearest -arg(b). Inner loops use split real/imaginary arrays to stay out of
  // the library complex multiply.
  const bool analytic_last = n_r >= 3;
  const int last = n_r - 1;
  const int n_free = analytic_last ? n_r - 3 : 0;
  std::vector<double> a_re(static_cast<std::size_t>(n_r * n_paths)), a_im(a_re.size());
  for (int e = 0; e < n_r; ++e) {
    for (Eigen::Index i = 0; i < n_paths; ++i) {
      a_re[e * n_paths + i] = a(e, i).real();
      a_im[e * n_paths + i] = a(e, i).imag();
    }
  }
  double last_energy = 0.0;
  if (analytic_last) {
    for (Eigen::Index i = 0; i < n_paths; ++i) last_energy += weight(i) * std::norm(a(last, i));
  }
#pragma omp parallel
  {
    PhaseSearchResult local;
    local.power = -1.0;
    std::vector<int> digit(n_free), dir(n_free);
    std::vector<double> g_re(n_paths), g_im(n_paths);
#pragma omp for schedule(dynamic)
    for (int q1 = 0; q1 < n_levels; ++q1) {
      std::fill(digit.begin(), digit.end(), 0);
      std::fill(dir.begin(), dir.end(), 1);
      for (Eigen::Index i = 0; i < n_paths; ++i) {
        Complex g = a(0, i) + phasor[q1] * a(1, i);
        for (int e = 2; e < (analytic_last ? last : n_r); ++e) g += a(e, i);
        g_re[i] = g.real();
        g_im[i] = g.imag();
      }
      const double* l_re = a_re.data() + last * n_paths;
      const double* l_im = a_im.data() + last * n_paths;
      while (true) {
        double power = 0.0;
        int q_last = 0;
        if (analytic_last) {
          // b = sum_i w_i a_i conj(g_i)
          double b_re = 0.0, b_im = 0.0;
          for (Eigen::Index i = 0; i < n_paths; ++i) {
            power += weight(i) * (g_re[i] * g_re[i] + g_im[i] * g_im[i]);
            b_re += weight(i) * (l_re[i] * g_re[i] + l_im[i] * g_im[i]);
            b_im += weight(i) * (l_im[i] * g_re[i] - l_re[i] * g_im[i]);
          }
          const double pos = -std::atan2(b_im, b_re) * n_levels / (2.0 * kPi);
          q_last = static_cast<int>(std::lround(pos)) % n_levels;
          if (q_last < 0) q_last += n_levels;
          power += last_energy +
                   2.0 * (phasor[q_last].real() * b_re - phasor[q_last].imag() * b_im);
        } else {
          for (Eigen::Index i = 0; i < n_paths; ++i) {
            power += weight(i) * (g_re[i] * g_re[i] + g_im[i] * g_im[i]);
          }
        }
        if (power > local.power) {
          local.power = power;
          local.levels.assign(n_r, 0);
          local.levels[1] = q1;
          for (int e = 0; e < n_free; ++e) local.levels[e + 2] = digit[e];
          if (analytic_last) local.levels[last] = q_last;
        }
        int j = 0;
        while (j < n_free && (digit[j] + dir[j] < 0 || digit[j] + dir[j] >= n_levels)) {
          dir[j] = -dir[j];
          ++j;
        }
        if (j == n_free) break;
        const int old = digit[j];
        digit[j] += dir[j];
        const double s_re = phasor[digit[j]].real() - phasor[old].real();
        const double s_im = phasor[digit[j]].imag() - phasor[old].imag();
        const double* are = a_re.data() + (j + 2) * n_paths;
        const double* aim = a_im.data() + (j + 2) * n_paths;
        for (Eigen::Index i = 0; i < n_paths; ++i) {
          g_re[i] += s_re * are[i] - s_im * aim[i];
          g_im[i] += s_re * aim[i] + s_im * are[i];
        }
      }
    }
#pragma omp critical
    {
      // Ties resolved toward the lexicographically smaller level vector so the
      // result does not depend on thread scheduling.
      if (local.power > best.power ||
          (local.power == best.power && local.levels < best.levels)) {
        best = local;
      }
    }
  }
  return best;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

CMatrix khatri_rao(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.cols()) throw DomainError("Khatri-Rao operands differ in column count");
  CMatrix out(a.rows() * b.rows(), a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out.col(c).segment(i * b.rows(), b.rows()) = a(i, c) * b.col(c);
    }
  }
  return out;
}

namespace serial {

CMatrix structured_regressor(const CMatrix& left_op, const CMatrix& right_op,
                             std::span<const double> tx_freqs, std::span<const double> rx_freqs,
                             double scale) {
  check_freqs(tx_freqs, rx_freqs);
  const auto n_paths = static_cast<Eigen::Index>(tx_freqs.size());
  CMatrix a_tx(right_op.rows(), n_paths), a_rx(left_op.cols(), n_paths);
  for (Eigen::Index l = 0; l < n_paths; ++l) {
    a_tx.col(l) = frequency_response(static_cast<int>(right_op.rows()), tx_freqs[l]);
    a_rx.col(l) = frequency_response(static_cast<int>(left_op.cols()), rx_freqs[l]);
  }
  return scale * kron(right_op.transpose(), left_op) * khatri_rao(a_tx.conjugate(), a_rx);
}

PhaseSearchResult exhaustive_phase_search(const CVector& rho_prod, const RVector& sine_diff,
                                          int n_r, int n_levels) {
  check_search(rho_prod, sine_diff, n_r, n_levels);
  PhaseSearchResult best;
  best.power = -1.0;
  std::vector<int> q(n_r, 0);
  CVector omega(n_r);
  while (true) {
    for (int e = 0; e < n_r; ++e) omega(e) = std::polar(1.0, 2.0 * kPi * q[e] / n_levels);
    const double power = cascaded_power(rho_prod, sine_diff, omega);
    if (power > best.power) {
      best.power = power;
      best.levels = q;
    }
    int e = n_r - 1;
    while (e >= 1 && ++q[e] == n_levels) q[e--] = 0;
    if (e < 1) break;
  }
  return best;
}

}  // namespace serial

}  // namespace hris::kernels
