#pragma once

// Uplink training schedule and received-signal synthesis for hybrid and
// passive RIS.

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "hris/channel.hpp"

namespace hris {

struct NoiseModel {
  double density_dbm_per_hz = -173.0;
  double bandwidth_hz = 1e8;

  /// Noise power in watts.
  double sigma2() const;
};

double dbm_to_watts(double dbm);

struct SystemDims {
  int n_bs = 16;
  int n_ris = 32;
  int n_ms = 16;
};

/// One row of the hybrid-RIS parameter table.
struct SetupSpec {
  int n_active = 8;      // M
  int n_rf_ris = 8;      // N_RF,R
  int n_blocks = 5;      // K
  int n_beams = 8;       // T
  int n_bs_combiners = 8;  // N_C,B
  int n_rf_bs = 8;       // N_RF,B

  /// Table rows 1..3; throws ConfigError otherwise.
  static SetupSpec table(int index);
};

enum class PilotKind {
  kRandomUnitModulus,
  kTruncatedDft,
};

enum class ActivePlacement {
  kCyclic,        // block k uses a contiguous run of M elements starting at k*M mod N_R
  kFixedUniform,  // the same M uniformly spaced elements in every block
  kFixedRandom,   // the same M random elements in every block
  kRandomPerBlock,
};

struct TrainingOptions {
  PilotKind pilot = PilotKind::kRandomUnitModulus;
  PilotKind combiner = PilotKind::kRandomUnitModulus;
  ActivePlacement placement = ActivePlacement::kCyclic;
  double pilot_power = 1e-3;  // W per channel use (column norm^2 of X)
};

struct TrainingConfig {
  int n_blocks = 0;
  int n_beams = 0;
  int n_rf_ris = 0;
  int n_rf_bs = 0;
  int n_ris = 0;
  double pilot_power = 0.0;
  CMatrix pilot;        // N_M x T
  CMatrix bs_combiner;  // N_B x N_C,B
  std::vector<std::vector<int>> active_sets;  // per block, 0-based, ascending
  std::vector<DiagonalPhase> phase_schedule;  // per block

  int n_active() const;
  int n_bs_combiners() const { return static_cast<int>(bs_combiner.cols()); }

  /// Row-selection matrix W_H,k (M x N_R).
  CMatrix selection(int block) const;

  /// Blocks of W_H stacked row-wise (MK x N_R).
  CMatrix stacked_selection() const;

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

/// Pilot X and combiner W_B stay fixed; block k zeroes the active elements
/// of Omega_k and draws i.i.d. uniform phases elsewhere.
TrainingConfig make_training_config(const SystemDims& dims, const SetupSpec& setup,
                                    const TrainingOptions& options, std::uint64_t seed);

struct RisObservation {
  CMatrix y_h;        // MK x T
  CMatrix selection;  // MK x N_R
};

struct BsObservation {
  CMatrix y;       // N_C,B x TK
  CMatrix u_true;  // N_R x TK, noiseless U for diagnostics
};

/// U = [Omega_1 H X, ..., Omega_K H X].
CMatrix assemble_u(const CMatrix& h_mr, const TrainingConfig& cfg);

RisObservation receive_at_ris(const ChannelRealization& real, const TrainingConfig& cfg,
                              double beta1, double sigma2, Rng& rng);

BsObservation receive_at_bs(const ChannelRealization& real, const TrainingConfig& cfg,
                            double beta2, double sigma2, Rng& rng);

struct PassiveBlock {
  CMatrix pilot;     // X_k
  CMatrix combiner;  // W_k
  DiagonalPhase omega;
};

/// Y_P,k = beta2 W_k^H H_RB Omega_k H_MR X_k + W_k^H Z_k.
std::vector<CMatrix> receive_passive(const ChannelRealization& real,
                                     std::span<const PassiveBlock> blocks, double beta2,
                                     double sigma2, Rng& rng);

/// K T ceil(N_C,B / N_RF,B) ceil(M / N_RF,R).
int training_overhead(const TrainingConfig& cfg);
int training_overhead(const SetupSpec& setup);

void to_json(nlohmann::json& j, const TrainingConfig& cfg);
void from_json(const nlohmann::json& j, TrainingConfig& cfg);

}  // namespace hris
