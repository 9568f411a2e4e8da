#pragma once

// Geometric ULA channels for the MS-RIS-BS link.
//
// Angles are radians in (-pi/2, pi/2). The array response of an N-element
// half-wavelength ULA is [a(angle)]_n = exp(j*pi*n*sin(angle)), n = 0..N-1.
// Subspace and atomic-norm processing work on the normalized spatial
// frequency nu = sin(angle)/2 wrapped to [0, 1), for which the same vector
// reads exp(j*2*pi*n*nu) and is 1-periodic in nu.

#include <span>
#include <vector>

#include "hris/types.hpp"

namespace hris {

struct ArrayGeometry {
  int n_elements = 2;
  double spacing = 0.5;  // wavelengths

  static ArrayGeometry ula(int n) { return ArrayGeometry{n, 0.5}; }
  void validate() const;
};

/// sin(angle)/2 wrapped into [0, 1).
double spatial_frequency(double angle);

/// Inverse of spatial_frequency. Throws DomainError for nu == 0.5, which maps
/// to the excluded endfire direction.
double angle_from_frequency(double nu);

/// Distance on the unit circle R/Z; result in [0, 0.5].
double circular_distance(double a, double b);

/// Wraps x into [0, 1).
double wrap_unit(double x);

CVector array_response(const ArrayGeometry& geometry, double angle);

/// exp(j*2*pi*n*nu) for n = 0..n_elements-1.
CVector frequency_response(int n_elements, double nu);

/// exp(j*pi*n*s) for an arbitrary sine-domain argument s (not limited to [-1,1]).
CVector sine_response(int n_elements, double s);

/// Columns are array responses of the given angles.
CMatrix steering_matrix(const ArrayGeometry& geometry, std::span<const double> angles);

/// One geometric channel: aod on the transmit array, aoa on the receive array.
struct PathParams {
  std::vector<double> aod;
  std::vector<double> aoa;
  std::vector<Complex> gains;

  std::size_t n_paths() const { return gains.size(); }

  /// Lengths agree and all angles lie in the open interval.
  void validate() const;

  /// Additionally checks circular frequency separation on both arrays.
  void validate_separation(double min_sep_rx, double min_sep_tx) const;
};

/// Gains i.i.d. CN(0,1); frequencies uniform on [0,1) and redrawn until every
/// pair is at least min_sep apart (circularly) on the respective array.
PathParams sample_path_params(Rng& rng, const ArrayGeometry& rx, const ArrayGeometry& tx,
                              int n_paths, double min_sep_rx, double min_sep_tx);

PathParams sample_path_params(Rng& rng, const ArrayGeometry& rx, const ArrayGeometry& tx,
                              int n_paths, double min_sep);

/// sum_l rho_l a_rx(aoa_l) a_tx(aod_l)^H, size rx x tx.
CMatrix build_channel(const PathParams& params, const ArrayGeometry& rx,
                      const ArrayGeometry& tx);

/// Diagonal RIS phase control matrix, stored by its diagonal.
class DiagonalPhase {
 public:
  DiagonalPhase() = default;
  explicit DiagonalPhase(CVector diagonal) : diag_(std::move(diagonal)) {}

  static DiagonalPhase identity(int n) { return DiagonalPhase(CVector::Ones(n)); }
  static DiagonalPhase zeros(int n) { return DiagonalPhase(CVector::Zero(n)); }

  /// Throws DomainError if any off-diagonal entry is nonzero.
  static DiagonalPhase from_matrix(const CMatrix& m);

  const CVector& diagonal() const { return diag_; }
  int size() const { return static_cast<int>(diag_.size()); }
  CMatrix dense() const { return diag_.asDiagonal(); }

  /// Every entry is unit-modulus or exactly zero (hybrid training pattern).
  bool is_hybrid_pattern(double tol = 1e-9) const;
  bool is_unit_modulus(double tol = 1e-9) const;

 private:
  CVector diag_;
};

struct ChannelRealization {
  ArrayGeometry ms;
  ArrayGeometry ris;
  ArrayGeometry bs;
  PathParams params_mr;  // aod at MS, aoa at RIS
  PathParams params_rb;  // aod at RIS, aoa at BS
  CMatrix h_mr;          // N_R x N_M
  CMatrix h_rb;          // N_B x N_R

  static ChannelRealization from_params(const ArrayGeometry& ms, const ArrayGeometry& ris,
                                        const ArrayGeometry& bs, PathParams mr, PathParams rb);
};

/// H_RB * Omega * H_MR.
CMatrix cascaded_channel(const ChannelRealization& real, const DiagonalPhase& omega);

/// diag(rho_RB) A^H(theta_RB) Omega A(phi_MR) diag(rho_MR), size L_RB x L_MR.
CMatrix effective_channel(const ChannelRealization& real, const DiagonalPhase& omega);

/// Same quantity assembled entrywise as rho_RB,p rho_MR,l omega^T a(delta_lp),
/// where sin(delta_lp) = sin(phi_MR,l) - sin(theta_RB,p).
CMatrix effective_channel_by_differences(const ChannelRealization& real,
                                         const DiagonalPhase& omega);

// ---------------------------------------------------------------------------
// Path loss

struct PathLossModel {
  double d0 = 1.0;       // m
  double gamma = 3.0;
  double fc = 28e9;      // Hz
  static constexpr double kSpeedOfLight = 3e8;

  double wavelength() const { return kSpeedOfLight / fc; }
  double beta0() const;
  void validate() const;
};

/// beta0 (d0/d1)^gamma.
double path_loss(const PathLossModel& model, double d1);

/// beta0 (d0/(d1 d2))^gamma.
double path_loss(const PathLossModel& model, double d1, double d2);

// How a path-loss value becomes the amplitude multiplying the signal term.
enum class AmplitudeConvention {
  kAttenuation,  // sqrt(beta)
  kInverse,      // sqrt(1/beta)
};

double amplitude_factor(double beta, AmplitudeConvention convention);

struct Point2D {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point2D a, Point2D b);

struct Geometry2D {
  Point2D bs{0.0, 0.0};
  Point2D ris{15.0, 2.0};
  Point2D ms{25.0, 0.0};

  /// BS at origin, RIS at (d_T - d_x, d_y), MS at (d_T, 0).
  static Geometry2D from_offsets(double d_total, double d_x, double d_y);

  double d1() const { return distance(ms, ris); }
  double d2() const { return distance(ris, bs); }
  void validate() const;
};

struct LinkBudget {
  double beta_ris = 1.0;      // beta(d1), MS-RIS
  double beta_cascade = 1.0;  // beta(d1, d2), MS-RIS-BS
  double amp_ris = 1.0;       // beta_1
  double amp_bs = 1.0;        // beta_2
};

LinkBudget link_budget(const PathLossModel& model, const Geometry2D& geometry,
                       AmplitudeConvention convention);

}  // namespace hris
