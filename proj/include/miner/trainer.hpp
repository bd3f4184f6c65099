#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "miner/blocks.hpp"
#include "miner/codec.hpp"
#include "miner/grid_signal.hpp"
#include "miner/optim.hpp"
#include "miner/pyramid.hpp"
#include "miner/tinynet.hpp"

namespace miner {

struct TrainConfig {
  std::size_t num_scales = 3;
  std::size_t block_size = 32;
  NetArch arch;
  double base_lr = 5e-4;
  double gamma = 0.999;
  std::size_t max_epochs = 500;
  /// A scale stops once the mean per-block loss change stays below this
  /// for `stall_epochs` consecutive epochs.
  double loss_delta_stop = 2e-7;
  std::size_t stall_epochs = 2;
  /// Per-block MSE threshold for both pruning tests. One entry applies to
  /// every scale; otherwise one entry per scale (index = scale).
  std::vector<double> tau = {1e-4};
  PyramidKind pyramid = PyramidKind::Laplacian;
  bool weight_share = true;
  /// Laplacian mode: also seed scale J-2 children from the low-pass nets
  /// of scale J-1.
  bool share_from_lowpass = false;
  std::uint64_t seed = 0;
  AdamConfig adam;

  /// 32x32 RGB blocks, 4 linear layers of 20 features, lr 5e-4,
  /// gamma 0.999, 500 epochs per scale.
  static TrainConfig image_defaults(std::size_t channels = 3);
  /// 22 features, 2 hidden sine layers, lr 1e-3, 2000 iterations, 4 scales.
  static TrainConfig volume_defaults();

  double tau_at(std::size_t scale) const;
  /// Throws InvalidConfig / NonDivisibleDims.
  void validate(const GridSignal& signal) const;
};

struct EpochRecord {
  double wall_ms = 0.0;
  std::size_t scale = 0;
  std::size_t epoch = 0;       // parameter updates applied so far at this scale
  double mean_loss = 0.0;      // mean per-block MSE over blocks active at this epoch
  double psnr_db = 0.0;        // current estimate vs the scale's target image
  std::size_t active_blocks = 0;
  std::size_t cum_params = 0;
};

struct TrainLog {
  std::vector<EpochRecord> records;

  static std::string csv_header();
  static std::string csv_row(const EpochRecord& r);
  void write_csv(std::ostream& out) const;
};

struct ScaleSummary {
  std::size_t scale = 0;
  std::size_t total_blocks = 0;
  std::size_t nets = 0;             // blocks that received an MLP
  std::size_t epochs_run = 0;       // updates applied
  std::size_t converged = 0;        // nets pruned at convergence
  bool all_converged = true;
  std::vector<std::size_t> prune_epoch;  // per net; epochs_run for unconverged nets
  std::vector<bool> net_converged;        // per net
};

struct FitResult {
  MinerModel model;
  TrainLog log;
  std::vector<ScaleSummary> scales;  // indexed by scale
};

using RecordCallback = std::function<void(const EpochRecord&)>;

/// Sub-seed for one block so that pruning never shifts other blocks'
/// initialisations.
std::uint64_t block_seed(std::uint64_t seed, std::size_t scale, std::size_t block);

/// target - upsample(coarser_estimate, 1). Throws DimMismatch.
GridSignal compute_residue(const GridSignal& target_at_scale, const GridSignal& coarser_estimate);

/// Removes blocks whose mean squared residue is <= tau from the active set.
void prune_before(const GridSignal& residue, BlockGrid& grid, double tau);

/// Nets for the active blocks of `fine_grid` (ascending block order). With
/// weight sharing, each child whose parent was trained starts from the
/// parent's parameters divided by 2 (images) or sqrt(8) (volumes); all
/// other children get a fresh SIREN init from block_seed.
NetBatch<float> init_child_nets(const ScaleModel* parents, const BlockGrid& fine_grid, DomainKind domain,
                                const NetArch& arch, std::uint64_t seed, bool weight_share);

struct ScaleTrainResult {
  std::size_t epochs_run = 0;
  std::vector<bool> converged;          // per net
  std::vector<std::size_t> prune_epoch;  // per net
  std::vector<double> final_mse;        // per net
};

/// Telemetry context threaded through train_scale.
struct ScaleLogContext {
  std::size_t scale = 0;
  double fixed_sse = 0.0;        // squared target energy of blocks without a net
  std::size_t cum_params = 0;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  TrainLog* log = nullptr;
  RecordCallback on_record;
};

/// Fits nets (net k <-> k-th active block of `grid`) to their blocks of
/// `target` with per-block MSE, removing blocks from `grid`'s active set
/// as they reach tau. Converged nets keep the parameters they had when
/// they were measured below tau.
ScaleTrainResult train_scale(const GridSignal& target, BlockGrid& grid, NetBatch<float>& nets,
                             const TrainConfig& cfg, ScaleLogContext& ctx);

/// Coarse-to-fine fit of `signal`. arch.in_dim/out_dim are taken from the
/// signal.
FitResult fit(const GridSignal& signal, const TrainConfig& cfg, const RecordCallback& on_record = {});

}  // namespace miner
