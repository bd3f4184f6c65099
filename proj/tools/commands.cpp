#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "image_io.hpp"
#include "miner/codec.hpp"
#include "miner/error.hpp"
#include "miner/metrics.hpp"
#include "miner/parallel.hpp"
#include "miner/trainer.hpp"
#include "raw_io.hpp"

namespace miner::cli {

namespace fs = std::filesystem;

namespace {

struct FitFlags {
  std::optional<std::size_t> num_scales;
  std::optional<std::size_t> block_size;
  std::optional<std::size_t> features;
  std::optional<std::size_t> layers;
  std::optional<double> lr;
  std::optional<double> gamma;
  std::vector<double> tau;
  std::optional<std::size_t> epochs;
  std::optional<double> loss_delta;
  std::optional<double> omega0;
  std::string pyramid = "laplacian";
  bool no_weight_share = false;
  bool share_from_lowpass = false;
  std::uint64_t seed = 0;
  bool crop = false;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("-J,--scales-count", f.num_scales, "Number of pyramid scales")->check(CLI::Range(1, 32));
  cmd->add_option("-b,--block-size", f.block_size, "Block side length at every scale")->check(CLI::PositiveNumber);
  cmd->add_option("--features", f.features, "Hidden width of each MLP")->check(CLI::PositiveNumber);
  cmd->add_option("--layers", f.layers, "Linear layers per MLP")->check(CLI::Range(2, 64));
  cmd->add_option("--lr", f.lr, "Base learning rate");
  cmd->add_option("--gamma", f.gamma, "Per-epoch learning-rate decay");
  cmd->add_option("--tau", f.tau, "Pruning threshold (one value, or one per scale finest first)")->delimiter(',');
  cmd->add_option("--epochs", f.epochs, "Maximum epochs per scale");
  cmd->add_option("--loss-delta", f.loss_delta, "Stop a scale when the mean loss change stays below this (0 disables)");
  cmd->add_option("--omega0", f.omega0, "Sine frequency factor");
  cmd->add_option("--pyramid", f.pyramid, "Pyramid mode")->check(CLI::IsMember({"laplacian", "gaussian"}));
  cmd->add_flag("--no-weight-share", f.no_weight_share, "Fresh init for every block");
  cmd->add_flag("--share-from-lowpass", f.share_from_lowpass, "Also share from the coarsest (low-pass) nets");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_flag("--crop-divisible", f.crop, "Centre-crop the input to divisible dims");
}

TrainConfig make_config(const GridSignal& signal, const FitFlags& f) {
  TrainConfig cfg = signal.kind() == DomainKind::Volume3D ? TrainConfig::volume_defaults()
                                                           : TrainConfig::image_defaults(signal.channels());
  if (f.num_scales) cfg.num_scales = *f.num_scales;
  if (f.block_size) cfg.block_size = *f.block_size;
  if (f.features) cfg.arch.hidden_features = static_cast<std::uint16_t>(*f.features);
  if (f.layers) cfg.arch.num_layers = static_cast<std::uint16_t>(*f.layers);
  if (f.lr) cfg.base_lr = *f.lr;
  if (f.gamma) cfg.gamma = *f.gamma;
  if (!f.tau.empty()) cfg.tau = f.tau;
  if (f.epochs) cfg.max_epochs = *f.epochs;
  if (f.loss_delta) cfg.loss_delta_stop = *f.loss_delta;
  if (f.omega0) cfg.arch.omega0 = static_cast<float>(*f.omega0);
  cfg.pyramid = f.pyramid == "gaussian" ? PyramidKind::Gaussian : PyramidKind::Laplacian;
  cfg.weight_share = !f.no_weight_share;
  cfg.share_from_lowpass = f.share_from_lowpass;
  cfg.seed = f.seed;
  return cfg;
}

GridSignal prepare_input(const fs::path& path, const FitFlags& f) {
  GridSignal signal = load_signal(path);
  if (f.crop) {
    const TrainConfig cfg = make_config(signal, f);
    if (cfg.num_scales < 1 || cfg.num_scales > 32) throw Error(ErrorCode::InvalidConfig, "bad scale count");
    signal = crop_divisible(signal, cfg.block_size << (cfg.num_scales - 1));
  }
  return signal;
}

std::string json_number(double v) {
  if (std::isinf(v)) return "\"inf\"";
  if (std::isnan(v)) return "\"nan\"";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string report_json(const MetricReport& r) {
  std::string s = "{\"psnr_db\":" + json_number(r.psnr_db) + ",\"mse\":" + json_number(r.mse);
  if (r.iou) s += ",\"iou\":" + json_number(*r.iou);
  return s + "}";
}

void write_signal(const GridSignal& signal, const fs::path& path, VoxelType voxel) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (signal.kind() == DomainKind::Volume3D || ext == ".raw") {
    write_raw(signal, path, voxel);
  } else if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
    write_pnm(signal, path);
  } else {
    write_png16(signal, path);
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, path.string() + ": cannot open for writing");
  return out;
}

// --- fit --------------------------------------------------------------------

struct FitArgs {
  std::string input;
  std::string out_dir = "miner_out";
  FitFlags flags;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const GridSignal signal = prepare_input(a.input, a.flags);
  const TrainConfig cfg = make_config(signal, a.flags);
  cfg.validate(signal);

  const fs::path dir = a.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, dir.string() + ": " + ec.message());

  std::ofstream csv = open_out(dir / "train_log.csv");
  csv << TrainLog::csv_header() << '\n' << std::flush;
  FitResult res = fit(signal, cfg, [&](const EpochRecord& r) {
    csv << TrainLog::csv_row(r) << '\n' << std::flush;
    if (!csv) throw Error(ErrorCode::Io, "train_log.csv: write failed");
  });

  save_file(res.model, dir / "model.minr");
  const bool volume = signal.kind() == DomainKind::Volume3D;
  for (std::size_t j = 0; j < res.model.num_scales(); ++j) {
    const fs::path snap = dir / ("scale_" + std::to_string(j) + (volume ? ".raw" : ".png"));
    write_signal(decode(res.model, j), snap, VoxelType::F32);
  }

  const MetricReport rep = evaluate(decode(res.model, 0), signal);
  std::string line = report_json(rep);
  line.pop_back();
  line += ",\"params\":" + std::to_string(res.model.total_params());
  line += ",\"wall_ms\":" + json_number(res.log.records.empty() ? 0.0 : res.log.records.back().wall_ms);
  out << line << "}\n";
  return kExitOk;
}

// --- decode -----------------------------------------------------------------

struct DecodeArgs {
  std::string model;
  std::size_t scale = 0;
  std::string output;
  std::string format = "f32";
};

int cmd_decode(const DecodeArgs& a) {
  const MinerModel model = load_file(a.model);
  if (a.scale >= model.num_scales()) {
    throw Error(ErrorCode::ScaleOutOfRange, "scale " + std::to_string(a.scale) + " but the model has " +
                                                std::to_string(model.num_scales()) + " scales");
  }
  write_signal(decode(model, a.scale), a.output, a.format == "u8" ? VoxelType::U8 : VoxelType::F32);
  return kExitOk;
}

// --- eval -------------------------------------------------------------------

int cmd_eval(const std::string& a, const std::string& b, std::ostream& out) {
  const GridSignal sa = load_signal(a);
  const GridSignal sb = load_signal(b);
  if (sa.kind() != sb.kind()) throw Error(ErrorCode::DimMismatch, "cannot compare an image with a volume");
  out << report_json(evaluate(sa, sb)) << '\n';
  return kExitOk;
}

// --- sweep ------------------------------------------------------------------

struct SweepArgs {
  std::string input;
  double target_psnr = 0.0;
  std::vector<std::size_t> block_sizes;
  std::vector<std::size_t> scales;
  std::string output;
  FitFlags flags;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  if (a.block_sizes.empty() == a.scales.empty()) {
    throw Error(ErrorCode::InvalidConfig, "give exactly one of --block-sizes or --scales");
  }
  const bool by_block = !a.block_sizes.empty();
  const auto& values = by_block ? a.block_sizes : a.scales;

  std::ofstream file;
  std::ostream* sink = &out;
  if (!a.output.empty()) {
    file = open_out(a.output);
    sink = &file;
  }
  *sink << "param,value,time_to_target_ms,final_psnr_db,final_params\n" << std::flush;

  const GridSignal original = load_signal(a.input);
  for (std::size_t v : values) {
    FitFlags f = a.flags;
    (by_block ? f.block_size : f.num_scales) = v;
    GridSignal signal = original;
    TrainConfig cfg = make_config(signal, f);
    if (f.crop) signal = crop_divisible(signal, cfg.block_size << (cfg.num_scales - 1));
    cfg.validate(signal);

    std::optional<double> hit;
    const FitResult res = fit(signal, cfg, [&](const EpochRecord& r) {
      if (!hit && r.scale == 0 && r.psnr_db >= a.target_psnr) hit = r.wall_ms;
    });
    const double final_psnr = res.log.records.empty() ? 0.0 : res.log.records.back().psnr_db;
    char time[32] = "";
    if (hit) std::snprintf(time, sizeof time, "%.3f", *hit);
    char psnr[32];
    if (std::isinf(final_psnr)) {
      std::snprintf(psnr, sizeof psnr, "inf");
    } else {
      std::snprintf(psnr, sizeof psnr, "%.6f", final_psnr);
    }
    *sink << (by_block ? "block_size" : "num_scales") << ',' << v << ',' << time << ',' << psnr << ','
          << res.model.total_params() << '\n'
          << std::flush;
  }
  if (!*sink) throw Error(ErrorCode::Io, "sweep output: write failed");
  return kExitOk;
}

// --- gen-volume -------------------------------------------------------------

struct GenArgs {
  std::string shape = "sphere";
  std::size_t size = 64;
  double radius = 12.0;
  double major = 16.0;
  double minor = 6.0;
  double half = 20.0;
  std::string output;
};

int cmd_gen(const GenArgs& a) {
  GridSignal vol;
  if (a.shape == "sphere") {
    vol = make_sphere(a.size, a.radius);
  } else if (a.shape == "torus") {
    vol = make_torus(a.size, a.major, a.minor);
  } else {
    vol = make_csg(a.size, a.half, a.radius);
  }
  write_raw(vol, a.output, VoxelType::U8);
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
    case ErrorCode::BadMagic:
    case ErrorCode::UnsupportedVersion:
    case ErrorCode::TruncatedFile:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::CorruptFile:
      return kExitIo;
    default:
      return kExitConfig;
  }
}

}  // namespace

GridSignal load_signal(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::Io, path.string() + ": no such file");
  if (path.extension() == ".minr") return decode(load_file(path), 0);
  if (is_image_path(path)) return read_image(path);
  return read_raw(path);
}

GridSignal crop_divisible(const GridSignal& signal, std::size_t factor) {
  if (factor == 0) throw Error(ErrorCode::InvalidConfig, "crop factor must be positive");
  std::vector<std::size_t> dims = signal.dims();
  std::vector<std::size_t> lo(dims.size());
  for (std::size_t a = 0; a < dims.size(); ++a) {
    const std::size_t keep = dims[a] / factor * factor;
    if (keep == 0) {
      throw Error(ErrorCode::NonDivisibleDims,
                  "axis " + std::to_string(a) + " is shorter than the required multiple " + std::to_string(factor));
    }
    lo[a] = (dims[a] - keep) / 2;
    dims[a] = keep;
  }
  GridSignal out(signal.kind(), dims, signal.channels());
  const std::size_t c = signal.channels();
  std::vector<std::size_t> idx(dims.size(), 0);
  std::vector<std::size_t> src(dims.size());
  for (std::size_t p = 0; p < out.num_points(); ++p) {
    for (std::size_t a = 0; a < dims.size(); ++a) src[a] = idx[a] + lo[a];
    const std::size_t from = signal.offset(src);
    for (std::size_t k = 0; k < c; ++k) out[p * c + k] = signal[from + k];
    for (std::size_t a = dims.size(); a-- > 0;) {
      if (++idx[a] < dims[a]) break;
      idx[a] = 0;
    }
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiscale implicit neural representation fitting"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit an image or volume and write model, log and snapshots");
  fit_cmd->add_option("input", fit_args.input, "PNG/PPM image or raw volume")->required();
  fit_cmd->add_option("-o,--out", fit_args.out_dir, "Output directory");
  add_fit_flags(fit_cmd, fit_args.flags);

  DecodeArgs dec_args;
  auto* dec_cmd = app.add_subcommand("decode", "Decode a model at one scale");
  dec_cmd->add_option("model", dec_args.model, "Model file")->required();
  dec_cmd->add_option("--scale", dec_args.scale, "Scale to decode (0 = finest)");
  dec_cmd->add_option("-o,--out", dec_args.output, "Output PNG/PPM, or .raw (f32 with JSON sidecar) for unclamped values")->required();
  dec_cmd->add_option("--format", dec_args.format, "Sample type for .raw output")->check(CLI::IsMember({"u8", "f32"}));

  std::string eval_a;
  std::string eval_b;
  auto* eval_cmd = app.add_subcommand("eval", "Print MSE/PSNR (and IoU for volumes) as a JSON line");
  eval_cmd->add_option("a", eval_a, "First signal or model")->required();
  eval_cmd->add_option("b", eval_b, "Second signal or model")->required();

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Fit once per block size or scale count");
  sweep_cmd->add_option("input", sweep_args.input, "Input signal")->required();
  sweep_cmd->add_option("--target-psnr", sweep_args.target_psnr, "Target PSNR in dB")->required();
  auto* bs = sweep_cmd->add_option("--block-sizes", sweep_args.block_sizes, "Comma-separated block sizes")
                 ->delimiter(',');
  auto* sc = sweep_cmd->add_option("--scales", sweep_args.scales, "Comma-separated scale counts")->delimiter(',');
  bs->excludes(sc);
  sweep_cmd->add_option("-o,--out", sweep_args.output, "CSV path (default stdout)");
  add_fit_flags(sweep_cmd, sweep_args.flags);

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen-volume", "Write an analytic occupancy fixture");
  gen_cmd->add_option("--shape", gen_args.shape)->check(CLI::IsMember({"sphere", "torus", "csg"}));
  gen_cmd->add_option("--size", gen_args.size, "Grid side length")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--radius", gen_args.radius, "Sphere radius (csg: carved sphere)");
  gen_cmd->add_option("--major", gen_args.major, "Torus ring radius");
  gen_cmd->add_option("--minor", gen_args.minor, "Torus tube radius");
  gen_cmd->add_option("--half", gen_args.half, "csg cube half size");
  gen_cmd->add_option("-o,--out", gen_args.output, "Raw output path")->required();

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("miner");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  set_num_threads(threads);
  try {
    if (*fit_cmd) return cmd_fit(fit_args, out);
    if (*dec_cmd) return cmd_decode(dec_args);
    if (*eval_cmd) return cmd_eval(eval_a, eval_b, out);
    if (*sweep_cmd) return cmd_sweep(sweep_args, out);
    if (*gen_cmd) return cmd_gen(gen_args);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace miner::cli
