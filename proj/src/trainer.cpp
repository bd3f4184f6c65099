#include "miner/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "miner/error.hpp"
#include "miner/metrics.hpp"
#include "miner/parallel.hpp"

namespace miner {

TrainConfig TrainConfig::image_defaults(std::size_t channels) {
  TrainConfig c;
  c.arch = NetArch{2, static_cast<std::uint16_t>(channels), 20, 4, 30.0f};
  return c;
}

TrainConfig TrainConfig::volume_defaults() {
  TrainConfig c;
  c.num_scales = 4;
  c.block_size = 16;
  c.arch = NetArch{3, 1, 22, 3, 30.0f};
  c.base_lr = 1e-3;
  c.max_epochs = 2000;
  return c;
}

double TrainConfig::tau_at(std::size_t scale) const {
  if (tau.empty()) throw Error(ErrorCode::InvalidConfig, "tau is empty");
  if (tau.size() == 1) return tau.front();
  return tau.at(scale);
}

void TrainConfig::validate(const GridSignal& signal) const {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (num_scales < 1) bad("num_scales must be >= 1");
  if (num_scales > 32) bad("num_scales must be <= 32");
  if (block_size < 1) bad("block_size must be >= 1");
  if (tau.empty() || (tau.size() != 1 && tau.size() != num_scales)) bad("tau needs 1 or num_scales entries");
  for (double t : tau) {
    if (!(t > 0.0) || !std::isfinite(t)) bad("tau must be > 0");
  }
  if (!(base_lr > 0.0)) bad("learning rate must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) bad("gamma must be in (0, 1]");
  if (!(loss_delta_stop >= 0.0)) bad("loss_delta_stop must be >= 0");
  if (stall_epochs < 1) bad("stall_epochs must be >= 1");
  NetArch a = arch;
  a.in_dim = static_cast<std::uint16_t>(signal.rank());
  a.out_dim = static_cast<std::uint16_t>(signal.channels());
  a.validate();
  require_divisible(signal, block_size << (num_scales - 1));
}

// ---------------------------------------------------------------------------

std::string TrainLog::csv_header() { return "wall_ms,scale,epoch,mean_loss,psnr_db,active_blocks,cum_params"; }

std::string TrainLog::csv_row(const EpochRecord& r) {
  char psnr[32];
  if (std::isinf(r.psnr_db)) {
    std::snprintf(psnr, sizeof psnr, "inf");
  } else {
    std::snprintf(psnr, sizeof psnr, "%.6f", r.psnr_db);
  }
  char buf[192];
  std::snprintf(buf, sizeof buf, "%.3f,%zu,%zu,%.9g,%s,%zu,%zu", r.wall_ms, r.scale, r.epoch, r.mean_loss, psnr,
                r.active_blocks, r.cum_params);
  return buf;
}

void TrainLog::write_csv(std::ostream& out) const {
  out << csv_header() << '\n';
  for (const auto& r : records) out << csv_row(r) << '\n';
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t block_seed(std::uint64_t seed, std::size_t scale, std::size_t block) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(scale));
  return splitmix64(h ^ static_cast<std::uint64_t>(block));
}

GridSignal compute_residue(const GridSignal& target_at_scale, const GridSignal& coarser_estimate) {
  if (coarser_estimate.rank() != target_at_scale.rank() || coarser_estimate.channels() != target_at_scale.channels()) {
    throw Error(ErrorCode::DimMismatch, "coarse estimate does not match target");
  }
  for (std::size_t a = 0; a < target_at_scale.rank(); ++a) {
    if (coarser_estimate.dim(a) * 2 != target_at_scale.dim(a)) {
      throw Error(ErrorCode::DimMismatch, "coarse estimate is not half the target size");
    }
  }
  return subtract(target_at_scale, upsample(coarser_estimate, 1));
}

void prune_before(const GridSignal& residue, BlockGrid& grid, double tau) {
  std::vector<std::size_t> quiet;
  for (std::size_t idx : grid.active_indices()) {
    if (block_mean_square(residue, grid, idx) <= tau) quiet.push_back(idx);
  }
  grid.deactivate(quiet);
}

NetBatch<float> init_child_nets(const ScaleModel* parents, const BlockGrid& fine_grid, DomainKind domain,
                                const NetArch& arch, std::uint64_t seed, bool weight_share) {
  const auto& active = fine_grid.active_indices();
  NetBatch<float> batch(arch, active.size());

  std::vector<std::size_t> parent_ordinal;
  if (weight_share && parents != nullptr) {
    const auto& pg = parents->grid;
    parent_ordinal.assign(pg.total_blocks(), SIZE_MAX);
    const auto& pact = pg.active_indices();
    for (std::size_t o = 0; o < pact.size(); ++o) parent_ordinal[pact[o]] = o;
  }
  const float divisor = domain == DomainKind::Image2D ? 2.0f : static_cast<float>(std::sqrt(8.0));
  const std::size_t per_net = arch.num_params();

  for (std::size_t k = 0; k < active.size(); ++k) {
    const std::size_t block = active[k];
    std::size_t ordinal = SIZE_MAX;
    if (!parent_ordinal.empty()) {
      const std::size_t parent = parent_index(fine_grid, block);
      if (parent < parent_ordinal.size()) ordinal = parent_ordinal[parent];
    }
    if (ordinal != SIZE_MAX) {
      auto dst = batch.mutable_params(k);
      const float* src = parents->params.data() + ordinal * per_net;
      for (std::size_t i = 0; i < per_net; ++i) dst[i] = src[i] / divisor;
    } else {
      batch.set_net(k, init_siren<float>(arch, block_seed(seed, fine_grid.scale(), block)));
    }
  }
  return batch;
}

ScaleTrainResult train_scale(const GridSignal& target, BlockGrid& grid, NetBatch<float>& nets,
                             const TrainConfig& cfg, ScaleLogContext& ctx) {
  const std::size_t K = nets.size();
  if (K != grid.num_active()) throw Error(ErrorCode::ShapeMismatch, "one net per active block required");
  const NetArch& arch = nets.arch();
  if (arch.in_dim != target.rank() || arch.out_dim != target.channels()) {
    throw Error(ErrorCode::ShapeMismatch, "net shape does not match the target signal");
  }
  const double tau = cfg.tau_at(grid.scale());
  const LocalCoords lc = local_coord_grid(grid.block_size(), target.rank());
  const std::span<const float> coords(lc.values);
  const std::size_t per_block = grid.block_points() * target.channels();
  const double inv_count = 1.0 / static_cast<double>(per_block);
  const double total_samples = static_cast<double>(target.size());

  const std::vector<std::size_t> blocks = grid.active_indices();
  std::vector<float> targets(K * per_block);
  for (std::size_t k = 0; k < K; ++k) {
    gather_block(target, grid, blocks[k], std::span<float>(targets).subspan(k * per_block, per_block));
  }

  ScaleTrainResult result;
  result.converged.assign(K, false);
  result.prune_epoch.assign(K, 0);
  result.final_mse.assign(K, 0.0);

  std::vector<AdamState> adam(K, AdamState(nets.params_per_net()));
  std::vector<float> out_grad(K * per_block);
  std::vector<std::span<const float>> outputs(K);
  std::vector<double> sse(K, 0.0);
  std::vector<double> loss(K, 0.0);
  std::vector<double> prev_loss(K, 0.0);
  std::vector<std::size_t> live(K);
  for (std::size_t k = 0; k < K; ++k) live[k] = k;
  double frozen_sse = 0.0;
  std::size_t stalled = 0;

  for (std::size_t epoch = 0;; ++epoch) {
    parallel_for(live.size(), [&](std::size_t i) {
      const std::size_t k = live[i];
      const auto y = nets.forward_net(k, coords);
      outputs[k] = y;
      const float* t = targets.data() + k * per_block;
      double acc = 0.0;
      for (std::size_t s = 0; s < per_block; ++s) {
        const double d = static_cast<double>(y[s]) - static_cast<double>(t[s]);
        acc += d * d;
      }
      sse[k] = acc;
      loss[k] = acc * inv_count;
    });

    double live_sse = 0.0;
    double loss_sum = 0.0;
    for (std::size_t k : live) {
      live_sse += sse[k];
      loss_sum += loss[k];
    }
    EpochRecord rec;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - ctx.start).count();
    rec.scale = grid.scale();
    rec.epoch = epoch;
    rec.mean_loss = live.empty() ? 0.0 : loss_sum / static_cast<double>(live.size());
    rec.psnr_db = psnr_from_mse((ctx.fixed_sse + frozen_sse + live_sse) / total_samples);
    rec.active_blocks = live.size();
    rec.cum_params = ctx.cum_params;
    if (ctx.log != nullptr) ctx.log->records.push_back(rec);
    if (ctx.on_record) ctx.on_record(rec);

    if (epoch > 0 && !live.empty()) {
      double delta = 0.0;
      for (std::size_t k : live) delta += prev_loss[k] - loss[k];
      delta /= static_cast<double>(live.size());
      stalled = std::abs(delta) < cfg.loss_delta_stop ? stalled + 1 : 0;
    }
    for (std::size_t k : live) {
      prev_loss[k] = loss[k];
      result.final_mse[k] = loss[k];
      result.prune_epoch[k] = epoch;
    }

    // Prune at convergence: freeze before this epoch's update.
    std::vector<std::size_t> done_blocks;
    std::vector<std::size_t> still;
    for (std::size_t k : live) {
      if (loss[k] <= tau) {
        result.converged[k] = true;
        frozen_sse += sse[k];
        done_blocks.push_back(blocks[k]);
        adam[k].release();
        nets.release_cache(k);
      } else {
        still.push_back(k);
      }
    }
    grid.deactivate(done_blocks);
    live = std::move(still);

    result.epochs_run = epoch;
    if (live.empty() || epoch >= cfg.max_epochs || stalled >= cfg.stall_epochs) break;

    const double lr = decayed_lr(cfg.base_lr, cfg.gamma, epoch);
    const auto grad_scale = static_cast<float>(2.0 * inv_count);
    parallel_for(live.size(), [&](std::size_t i) {
      const std::size_t k = live[i];
      const auto y = outputs[k];
      const float* t = targets.data() + k * per_block;
      float* g = out_grad.data() + k * per_block;
      for (std::size_t s = 0; s < per_block; ++s) g[s] = grad_scale * (y[s] - t[s]);
      nets.zero_grads(k);
      nets.backward_net(k, coords, std::span<const float>(g, per_block));
      adam_step(nets.mutable_params(k), nets.grads(k), adam[k], lr, cfg.adam);
    });
  }
  return result;
}

FitResult fit(const GridSignal& signal, const TrainConfig& cfg_in, const RecordCallback& on_record) {
  cfg_in.validate(signal);
  signal.check_finite();
  TrainConfig cfg = cfg_in;
  cfg.arch.in_dim = static_cast<std::uint16_t>(signal.rank());
  cfg.arch.out_dim = static_cast<std::uint16_t>(signal.channels());

  const std::size_t J = cfg.num_scales;
  const Pyramid gauss = build_pyramid(signal, J, PyramidKind::Gaussian);

  FitResult res;
  MinerModel& model = res.model;
  model.domain = signal.kind();
  model.pyramid = cfg.pyramid;
  model.block_size = cfg.block_size;
  model.dims = signal.dims();
  model.channels = signal.channels();
  model.arch = cfg.arch;
  model.scales.resize(J);
  res.scales.resize(J);

  ScaleLogContext ctx;
  ctx.start = std::chrono::steady_clock::now();
  ctx.log = &res.log;
  ctx.on_record = on_record;

  GridSignal estimate;
  for (std::size_t j = J; j-- > 0;) {
    const GridSignal& level = gauss.level(j);
    const GridSignal target =
        (cfg.pyramid == PyramidKind::Laplacian && j + 1 < J) ? compute_residue(level, estimate) : level;

    BlockGrid grid = make_block_grid(level.dims(), cfg.block_size, j);
    const std::size_t total_blocks = grid.total_blocks();
    prune_before(target, grid, cfg.tau_at(j));

    double fixed_sse = 0.0;
    const double per_block = static_cast<double>(grid.block_points() * target.channels());
    for (std::size_t b = 0; b < total_blocks; ++b) {
      if (!grid.is_active(b)) fixed_sse += block_mean_square(target, grid, b) * per_block;
    }

    // In Laplacian mode the coarsest nets fit the low-pass signal, which has
    // little in common with a residue block, so by default only residue
    // nets are shared downwards.
    const bool same_kind_parent = j + 2 < J || cfg.pyramid == PyramidKind::Gaussian || cfg.share_from_lowpass;
    const ScaleModel* parents = j + 1 < J && same_kind_parent ? &model.scales[j + 1] : nullptr;
    NetBatch<float> nets = init_child_nets(parents, grid, signal.kind(), cfg.arch, cfg.seed, cfg.weight_share);
    const BlockGrid with_nets = grid;

    ctx.scale = j;
    ctx.fixed_sse = fixed_sse;
    ctx.cum_params += nets.size() * nets.params_per_net();
    const ScaleTrainResult tr = train_scale(target, grid, nets, cfg, ctx);

    ScaleModel& sm = model.scales[j];
    sm.grid = with_nets;
    sm.params.assign(nets.all_params().begin(), nets.all_params().end());

    ScaleSummary& summary = res.scales[j];
    summary.scale = j;
    summary.total_blocks = total_blocks;
    summary.nets = nets.size();
    summary.epochs_run = tr.epochs_run;
    summary.prune_epoch = tr.prune_epoch;
    summary.net_converged = tr.converged;
    for (bool c : tr.converged) summary.converged += c ? 1 : 0;
    summary.all_converged = summary.converged == summary.nets;

    // The next residue is taken against the decoded estimate, computed
    // exactly as decode() does.
    const GridSignal field = residue_field(model, j);
    if (cfg.pyramid == PyramidKind::Laplacian && j + 1 < J) {
      estimate = add(upsample(estimate, 1), field);
    } else {
      estimate = field;
    }
  }
  return res;
}

}  // namespace miner
