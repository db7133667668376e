// frae command-line interface: train, encode, decode, eval, baseline,
// probe-color, flow-viz.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "frae/codec.hpp"
#include "frae/error.hpp"
#include "frae/evaluation.hpp"
#include "frae/fast_coder.hpp"
#include "frae/frames_io.hpp"
#include "frae/model.hpp"
#include "frae/motion.hpp"
#include "frae/training.hpp"

namespace fs = std::filesystem;
using namespace frae;

namespace {

constexpr int kExitUsage = 2;

int exit_code(ErrorFamily f) {
  switch (f) {
    case ErrorFamily::kInvalidArgument: return kExitUsage;
    case ErrorFamily::kIo: return 3;
    case ErrorFamily::kBitstream: return 4;
    case ErrorFamily::kModel: return 5;
    case ErrorFamily::kNumeric: return 6;
  }
  return 1;
}

const char* family_name(ErrorFamily f) {
  switch (f) {
    case ErrorFamily::kInvalidArgument: return "invalid argument";
    case ErrorFamily::kIo: return "io";
    case ErrorFamily::kBitstream: return "bitstream";
    case ErrorFamily::kModel: return "model";
    case ErrorFamily::kNumeric: return "numeric";
  }
  return "error";
}

struct RawVideoOptions {
  std::vector<std::string> inputs;
  int width = 0;
  int height = 0;
  double fps = 30;
  std::size_t max_frames = 0;

  void add(CLI::App* app, bool multiple) {
    if (multiple) {
      app->add_option("--input", inputs, "Raw I420 video file(s)")->required();
    } else {
      app->add_option("--input", inputs, "Raw I420 video file")->required()->expected(1);
    }
    app->add_option("--width", width, "Frame width of raw input")->required();
    app->add_option("--height", height, "Frame height of raw input")->required();
    app->add_option("--fps", fps, "Frame rate of raw input")->capture_default_str();
    app->add_option("--max-frames", max_frames, "Read at most this many frames (0 = all)")
        ->capture_default_str();
  }

  std::vector<Frame> load(const std::string& path) const {
    std::vector<Frame> out;
    for (const YuvFrame& f : read_yuv420_file(path, width, height, max_frames)) {
      out.push_back(yuv_to_rgb(f));
    }
    if (out.empty()) throw IoError("'" + path + "' contains no frames");
    return out;
  }
};

void add_codec_options(CLI::App* app, CodecConfig& c, std::string& ablation) {
  app->add_option("--c1", c.c1, "Trunk channels")->capture_default_str();
  app->add_option("--c2", c.c2, "Latent channels")->capture_default_str();
  app->add_option("--c3", c.c3, "Recurrent state channels")->capture_default_str();
  app->add_option("--downsample-factor", c.downsample_factor, "Latent downsampling")
      ->capture_default_str();
  app->add_option("--codebook-size", c.codebook_size, "Quantizer levels")->capture_default_str();
  app->add_option("--gru-kernel", c.gru_kernel, "Conv-GRU kernel size")->capture_default_str();
  app->add_option("--residual-blocks", c.residual_blocks, "Residual blocks per trunk")
      ->capture_default_str();
  app->add_option("--softmax-sigma", c.softmax_sigma, "Quantizer softmax temperature")
      ->capture_default_str();
  app->add_option("--batchnorm", c.batchnorm, "Use batch normalisation")->capture_default_str();
  app->add_option("--menet-width", c.menet_width, "Flow estimator base width")
      ->capture_default_str();
  app->add_option("--menet-levels", c.menet_levels, "Flow estimator levels")
      ->capture_default_str();
  app->add_option("--prior-width", c.prior_width, "Prior feature channels")->capture_default_str();
  app->add_option("--prior-layers", c.prior_layers, "Prior gated layers")->capture_default_str();
  app->add_option("--prior-kernel", c.prior_kernel, "Prior kernel size")->capture_default_str();
  app->add_option("--prior-head-hidden", c.prior_head_hidden, "Prior head units per channel")
      ->capture_default_str();
  app->add_option("--ablation", ablation, "none, no_feedback, no_recurrence or no_menet")
      ->capture_default_str();
}

MsSsimConfig metric_for(int scales, const std::string& padding, int height, int width) {
  MsSsimConfig base;
  base.padding = parse_padding(padding);
  const int feasible = base.max_feasible_scales(height, width);
  const int n = scales > 0 ? scales : std::min(base.scale_count(), feasible);
  if (n < 1) throw InvalidArgument("frames too small for MS-SSIM");
  if (n == base.scale_count()) return base;
  return MsSsimConfig::truncated(n, base.padding);
}

void write_yuv_frames(const fs::path& path, const std::vector<Frame>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create '" + path.string() + "'");
  for (const Frame& f : frames) write_yuv420(out, rgb_to_yuv(f));
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::vector<std::string> data;
  std::vector<std::string> val_data;
  int width = 0;
  int height = 0;
  std::size_t max_frames = 0;
  int synthetic = 0;
  std::string padding = "replicate";
  int ms_ssim_scales = 0;
  std::string out_dir;
  std::string init;
  std::string ablation = "none";
  CodecConfig codec;
  TrainingConfig train;
};

std::vector<TrainingGop> clips_from(const std::vector<std::string>& files, const TrainArgs& a,
                                    std::mt19937_64& seeds) {
  std::vector<TrainingGop> clips;
  for (const std::string& file : files) {
    std::vector<Frame> frames;
    for (const YuvFrame& f : read_yuv420_file(file, a.width, a.height, a.max_frames)) {
      frames.push_back(yuv_to_rgb(f));
    }
    const std::size_t n = static_cast<std::size_t>(a.train.gop_size);
    for (std::size_t s = 0; s + n <= frames.size(); s += n) {
      const std::span<const Frame> clip(frames.data() + s, n);
      const int size = std::min({a.train.crop_size, a.width, a.height});
      clips.push_back(random_crop_clip(clip, size, seeds()));
    }
  }
  return clips;
}

int cmd_train(TrainArgs& a, const std::string& echo) {
  a.codec.ablation = parse_ablation(a.ablation);
  a.codec.validate();
  if (a.out_dir.empty()) throw InvalidArgument("--out-dir is required");
  TrainingData data;
  std::mt19937_64 seeds(a.train.seed);
  int side = a.train.crop_size;
  if (!a.data.empty()) {
    if (a.width <= 0 || a.height <= 0) throw InvalidArgument("--width and --height are required");
    data.train = clips_from(a.data, a, seeds);
    data.validation = clips_from(a.val_data, a, seeds);
    side = std::min({a.train.crop_size, a.width, a.height});
  } else if (a.synthetic > 0) {
    for (int i = 0; i < a.synthetic; ++i) {
      std::uniform_real_distribution<double> v(-2.0, 2.0);
      const double dx = v(seeds), dy = v(seeds);
      data.train.push_back(translating_texture_clip(a.train.gop_size, a.train.crop_size, dx, dy,
                                                    seeds()));
    }
  } else {
    throw InvalidArgument("training needs --data files or --synthetic N");
  }
  if (data.train.empty()) throw InvalidArgument("no complete GoP-length clips in the training data");
  a.train.metric = metric_for(a.ms_ssim_scales, a.padding, side, side);

  std::unique_ptr<Model> model;
  if (!a.init.empty()) {
    model = load_checkpoint(a.init);
  } else {
    model = std::make_unique<Model>(a.codec, a.train.seed);
  }
  fs::create_directories(a.out_dir);
  {
    std::ofstream ini(fs::path(a.out_dir) / "effective.ini");
    ini << echo;
  }
  run_training(*model, a.train, data, a.out_dir, &std::cout);
  std::ifstream best(fs::path(a.out_dir) / "best");
  std::string name;
  best >> name;
  std::cout << "best checkpoint: " << (fs::path(a.out_dir) / name).string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- encode / decode

struct EncodeArgs {
  RawVideoOptions raw;
  std::string checkpoint;
  std::string out;
  std::string recon;
  std::string fast_coder;
  int gop = 8;
};

int cmd_encode(const EncodeArgs& a) {
  const std::unique_ptr<Model> model = load_checkpoint(a.checkpoint);
  const std::vector<Frame> frames = a.raw.load(a.raw.inputs.front());
  const CoderBackend backend = CoderBackend::probe(a.fast_coder);
  if (!backend.accelerated() && !a.fast_coder.empty()) {
    std::cerr << "note: " << backend.reason() << "; using the reference coder\n";
  }
  const EncodeResult enc = encode_video(*model, frames, a.gop, backend);
  StreamManifest m;
  m.model_hash = model_hash(*model);
  m.width = frames.front().width();
  m.height = frames.front().height();
  m.gop_size = a.gop;
  m.frame_count = static_cast<int>(frames.size());
  m.codebook_size = model->config().codebook_size;
  write_frae(a.out, enc.gops, m, backend);
  if (!a.recon.empty()) write_yuv_frames(a.recon, enc.recons);
  std::uint64_t payload = 0;
  for (const FrameStats& s : enc.stats) payload += s.payload_bits;
  const auto bytes = fs::file_size(a.out);
  std::printf("frames %zu gops %zu bytes %ju bpp %.6f payload_bits %ju coder %s\n", frames.size(),
              enc.gops.size(), static_cast<std::uintmax_t>(bytes),
              bits_per_pixel(8 * bytes, m.height, m.width, m.frame_count),
              static_cast<std::uintmax_t>(payload), backend.description().c_str());
  return 0;
}

struct DecodeArgs {
  std::string input;
  std::string checkpoint;
  std::string out;
  unsigned threads = 0;
};

int cmd_decode(const DecodeArgs& a) {
  const std::unique_ptr<Model> model = load_checkpoint(a.checkpoint);
  StreamManifest m;
  const std::vector<GopBitstream> gops = read_frae(a.input, &m);
  check_stream(*model, gops, m);
  const std::vector<Frame> frames = decode_video(*model, gops, a.threads);
  write_yuv_frames(a.out, frames);
  std::printf("frames %zu gops %zu\n", frames.size(), gops.size());
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  RawVideoOptions raw;
  std::vector<std::string> checkpoints;
  int gop = 8;
  std::string padding = "valid";
  int ms_ssim_scales = 0;
  std::string out_dir;
  std::string dataset = "dataset";
};

int cmd_eval(const EvalArgs& a) {
  if (a.checkpoints.empty()) throw CLI::ValidationError("--checkpoint", "at least one checkpoint is required");
  std::vector<std::vector<Frame>> videos;
  for (const std::string& in : a.raw.inputs) videos.push_back(a.raw.load(in));
  const MsSsimConfig metric = metric_for(a.ms_ssim_scales, a.padding, a.raw.height, a.raw.width);
  fs::create_directories(a.out_dir);
  std::vector<RdPoint> points;
  std::ofstream per_frame(fs::path(a.out_dir) / "per_frame.csv");
  per_frame << "model,position,ms_ssim,bits,bpp,samples\n";
  for (const std::string& ck : a.checkpoints) {
    const std::unique_ptr<Model> model = load_checkpoint(ck);
    const std::string name = fs::path(ck).stem().string();
    points.push_back(evaluate_model(*model, videos, a.gop, metric, name, a.dataset,
                                    "checkpoint=" + fs::path(ck).filename().string()));
    std::vector<Frame> originals, recons;
    std::vector<FrameStats> stats;
    for (const auto& v : videos) {
      const EncodeResult enc = encode_video(*model, v, a.gop);
      originals.insert(originals.end(), v.begin(), v.end());
      recons.insert(recons.end(), enc.recons.begin(), enc.recons.end());
      stats.insert(stats.end(), enc.stats.begin(), enc.stats.end());
    }
    for (const PositionStats& s : per_frame_stats(originals, recons, stats, metric)) {
      per_frame << name << "," << s.position << "," << s.ms_ssim << "," << s.bits << ","
                << s.bpp << "," << s.samples << "\n";
    }
  }
  emit_rd_report(points, fs::path(a.out_dir) / "rd.csv", fs::path(a.out_dir) / "rd.svg");
  std::cout << rd_csv(points);
  return 0;
}

// ---------------------------------------------------------------- baseline

struct BaselineArgs {
  std::string input;
  std::string encoder = "x265";
  std::string mode = "low-latency";
  std::string padding = "valid";
  std::string out_dir;
  BaselineSpec spec;
  int timeout_s = 3600;
  int frames = 0;
};

int cmd_baseline(BaselineArgs& a) {
  a.spec.encoder = parse_baseline_encoder(a.encoder);
  a.spec.mode = parse_baseline_mode(a.mode);
  if (a.frames > 0) {
    a.spec.frames = a.frames;
  } else {
    const auto size = fs::exists(a.input) ? fs::file_size(a.input) : 0;
    a.spec.frames = static_cast<int>(size / YuvFrame::frame_bytes(a.spec.width, a.spec.height));
    if (a.spec.frames < 1) a.spec.frames = 1;
  }
  fs::create_directories(a.out_dir);
  MsSsimConfig metric = metric_for(0, a.padding, a.spec.height, a.spec.width);
  const BaselineRun run = run_baseline(a.spec, a.input, a.out_dir,
                                       std::chrono::seconds(a.timeout_s), metric);
  std::ofstream csv(fs::path(a.out_dir) / "baseline.csv");
  csv << "status,message\n" << to_string(run.status) << ",\"" << run.message << "\"\n";
  if (!run.points.empty()) {
    std::ofstream rd(fs::path(a.out_dir) / "rd.csv");
    rd << rd_csv(run.points);
  }
  std::cout << to_string(run.status);
  if (!run.message.empty()) std::cout << ": " << run.message;
  std::cout << "\n";
  for (const std::string& c : run.commands) std::cout << "  " << c << "\n";
  return run.status == RunStatus::kFailed ? 1 : 0;
}

// ---------------------------------------------------------------- probe-color

struct ProbeArgs {
  std::string input;
  int size = 256;
  std::string padding = "valid";
  std::string out_dir;
  ColorProbeConfig cfg;
};

int cmd_probe_color(ProbeArgs& a) {
  a.cfg.metric.padding = parse_padding(a.padding);
  const Frame image = a.input.empty()
                          ? translating_texture_clip(1, a.size, 0, 0, a.cfg.seed).front()
                          : read_ppm(a.input);
  const ColorProbeResult r = color_probe(image, a.cfg);
  fs::create_directories(a.out_dir);
  write_ppm(fs::path(a.out_dir) / "original.ppm", image);
  write_ppm(fs::path(a.out_dir) / "start.ppm", r.start);
  write_ppm(fs::path(a.out_dir) / "probe.ppm", r.probe);
  std::ofstream log(fs::path(a.out_dir) / "trajectory.csv");
  log << "iteration,alpha,psnr,ms_ssim\n";
  for (const ProbeLogEntry& e : r.log) {
    log << e.iteration << "," << e.alpha << "," << e.psnr << "," << e.ms_ssim << "\n";
  }
  std::printf("noise_sigma %.6f target %.6f start_psnr %.3f final_psnr %.3f final_ms_ssim %.6f\n",
              r.noise_sigma, r.target, r.start_psnr, r.final_psnr, r.final_ms_ssim);
  return 0;
}

// ---------------------------------------------------------------- flow-viz

struct FlowVizArgs {
  RawVideoOptions raw;
  std::string checkpoint;
  int gop = 8;
  double max_magnitude = 0.0;
  std::string out_dir;
};

int cmd_flow_viz(const FlowVizArgs& a) {
  const std::unique_ptr<Model> model = load_checkpoint(a.checkpoint);
  const std::vector<Frame> frames = a.raw.load(a.raw.inputs.front());
  const EncodeResult enc = encode_video(*model, frames, a.gop);
  fs::create_directories(a.out_dir);
  int written = 0;
  for (std::size_t i = 0; i < enc.flows.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "recon_%04zu.ppm", i);
    write_ppm(fs::path(a.out_dir) / name, enc.recons[i]);
    if (enc.flows[i].height() == 0) continue;
    std::snprintf(name, sizeof name, "flow_%04zu.ppm", i);
    write_ppm(fs::path(a.out_dir) / name, flow_to_color(enc.flows[i], a.max_magnitude));
    const auto [u, v] = mean_flow(enc.flows[i]);
    std::printf("frame %zu mean_flow %.4f %.4f\n", i, u, v);
    ++written;
  }
  std::printf("flow images %d\n", written);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned low-latency video codec"};
  app.set_config("--config", "", "INI configuration file; keys are option names")
      ->check(CLI::ExistingFile);
  app.allow_config_extras(false);
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "Root random seed")->capture_default_str();

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a codec");
  train_cmd->add_option("--data", train.data, "Raw I420 training videos");
  train_cmd->add_option("--val-data", train.val_data, "Raw I420 validation videos");
  train_cmd->add_option("--width", train.width, "Raw frame width");
  train_cmd->add_option("--height", train.height, "Raw frame height");
  train_cmd->add_option("--max-frames", train.max_frames, "Frames read per video (0 = all)");
  train_cmd->add_option("--synthetic", train.synthetic, "Train on N synthetic texture clips");
  train_cmd->add_option("--padding", train.padding, "MS-SSIM padding: valid or replicate")
      ->capture_default_str();
  train_cmd->add_option("--ms-ssim-scales", train.ms_ssim_scales, "MS-SSIM scales (0 = auto)");
  train_cmd->add_option("--out-dir", train.out_dir, "Run directory")->required();
  train_cmd->add_option("--init", train.init, "Start from this checkpoint");
  add_codec_options(train_cmd, train.codec, train.ablation);
  train_cmd->add_option("--beta", train.train.beta, "Rate weight")->capture_default_str();
  train_cmd->add_option("--gop", train.train.gop_size, "GoP length")->capture_default_str();
  train_cmd->add_option("--batch-size", train.train.batch_size)->capture_default_str();
  train_cmd->add_option("--total-iters", train.train.total_iters)->capture_default_str();
  train_cmd->add_option("--flow-loss-until", train.train.flow_loss_until)->capture_default_str();
  train_cmd->add_option("--reference-switch-at", train.train.reference_switch_at)
      ->capture_default_str();
  train_cmd->add_option("--norm-freeze-at", train.train.norm_freeze_at)->capture_default_str();
  train_cmd->add_option("--lr", train.train.lr)->capture_default_str();
  train_cmd->add_option("--lr-decay", train.train.lr_decay)->capture_default_str();
  train_cmd->add_option("--lr-decay-every", train.train.lr_decay_every)->capture_default_str();
  train_cmd->add_option("--crop-size", train.train.crop_size)->capture_default_str();
  train_cmd->add_option("--checkpoint-every", train.train.checkpoint_every)->capture_default_str();

  EncodeArgs encode;
  CLI::App* encode_cmd = app.add_subcommand("encode", "Encode raw video to a .frae stream");
  encode.raw.add(encode_cmd, false);
  encode_cmd->add_option("--checkpoint", encode.checkpoint, "Model checkpoint")->required();
  encode_cmd->add_option("--out", encode.out, "Output .frae file")->required();
  encode_cmd->add_option("--recon", encode.recon, "Also write the closed-loop reconstruction");
  encode_cmd->add_option("--gop", encode.gop, "GoP length")->capture_default_str();
  encode_cmd->add_option("--fast-coder", encode.fast_coder, "Accelerated coder library");

  DecodeArgs decode;
  CLI::App* decode_cmd = app.add_subcommand("decode", "Decode a .frae stream to raw video");
  decode_cmd->add_option("--input", decode.input, "Input .frae file")->required();
  decode_cmd->add_option("--checkpoint", decode.checkpoint, "Model checkpoint")->required();
  decode_cmd->add_option("--out", decode.out, "Output raw I420 file")->required();
  decode_cmd->add_option("--threads", decode.threads, "Entropy-decoding threads (0 = auto)");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Rate-distortion evaluation");
  eval.raw.add(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", eval.checkpoints, "Model checkpoints");
  eval_cmd->add_option("--gop", eval.gop, "GoP length")->capture_default_str();
  eval_cmd->add_option("--padding", eval.padding, "MS-SSIM padding")->capture_default_str();
  eval_cmd->add_option("--ms-ssim-scales", eval.ms_ssim_scales, "MS-SSIM scales (0 = auto)");
  eval_cmd->add_option("--dataset", eval.dataset, "Dataset label")->capture_default_str();
  eval_cmd->add_option("--out-dir", eval.out_dir, "Report directory")->required();

  BaselineArgs base;
  CLI::App* base_cmd = app.add_subcommand("baseline", "Run a classical-codec baseline");
  base_cmd->add_option("--input", base.input, "Raw I420 video")->required();
  base_cmd->add_option("--encoder", base.encoder, "x264, x265 or hm")->capture_default_str();
  base_cmd->add_option("--mode", base.mode, "low-latency or default")->capture_default_str();
  base_cmd->add_option("--gop", base.spec.gop, "GoP length")->capture_default_str();
  base_cmd->add_option("--width", base.spec.width)->capture_default_str();
  base_cmd->add_option("--height", base.spec.height)->capture_default_str();
  base_cmd->add_option("--fps", base.spec.fps)->capture_default_str();
  base_cmd->add_option("--frames", base.frames, "Sequence length (0 = from file size)");
  base_cmd->add_option("--rates", base.spec.rates_mbps, "Rate targets in Mb/s");
  base_cmd->add_option("--qps", base.spec.qps, "HM quantization parameters");
  base_cmd->add_option("--hm-config", base.spec.hm_config)->capture_default_str();
  base_cmd->add_option("--binary", base.spec.binary, "Encoder executable");
  base_cmd->add_option("--timeout", base.timeout_s, "Seconds per encoder run")
      ->capture_default_str();
  base_cmd->add_option("--padding", base.padding, "MS-SSIM padding")->capture_default_str();
  base_cmd->add_option("--out-dir", base.out_dir, "Work directory")->required();

  ProbeArgs probe;
  CLI::App* probe_cmd =
      app.add_subcommand("probe-color", "Lower PSNR at constant MS-SSIM from a noisy start");
  probe_cmd->add_option("--input", probe.input, "PPM image (default: synthetic texture)");
  probe_cmd->add_option("--size", probe.size, "Synthetic image side")->capture_default_str();
  probe_cmd->add_option("--iterations", probe.cfg.iterations)->capture_default_str();
  probe_cmd->add_option("--target", probe.cfg.target_ms_ssim)->capture_default_str();
  probe_cmd->add_option("--lr", probe.cfg.lr)->capture_default_str();
  probe_cmd->add_option("--alpha-max", probe.cfg.alpha_max)->capture_default_str();
  probe_cmd->add_option("--log-every", probe.cfg.log_every)->capture_default_str();
  probe_cmd->add_option("--padding", probe.padding, "MS-SSIM padding")->capture_default_str();
  probe_cmd->add_option("--out-dir", probe.out_dir, "Output directory")->required();

  FlowVizArgs viz;
  CLI::App* viz_cmd = app.add_subcommand("flow-viz", "Render decoded flow fields");
  viz.raw.add(viz_cmd, false);
  viz_cmd->add_option("--checkpoint", viz.checkpoint, "Model checkpoint")->required();
  viz_cmd->add_option("--gop", viz.gop, "GoP length")->capture_default_str();
  viz_cmd->add_option("--max-magnitude", viz.max_magnitude, "Flow magnitude at full saturation");
  viz_cmd->add_option("--out-dir", viz.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    train.train.seed = seed;
    probe.cfg.seed = seed;
    if (*train_cmd) return cmd_train(train, app.config_to_str(true, false));
    if (*encode_cmd) return cmd_encode(encode);
    if (*decode_cmd) return cmd_decode(decode);
    if (*eval_cmd) return cmd_eval(eval);
    if (*base_cmd) return cmd_baseline(base);
    if (*probe_cmd) return cmd_probe_color(probe);
    if (*viz_cmd) return cmd_flow_viz(viz);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << family_name(e.family()) << " error: " << e.what() << "\n";
    return exit_code(e.family());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
