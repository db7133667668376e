#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frae/codec.hpp"
#include "frae/frames_io.hpp"
#include "frae/metrics.hpp"
#include "frae/training.hpp"

namespace frae {

struct RdPoint {
  std::string model;            // model or baseline series name
  std::string operating_point;  // "beta=0.1", "rate=10M", "qp=22"
  double bpp = 0.0;
  double ms_ssim = 0.0;
  int gop_size = 0;
  std::string dataset;
  Padding padding = Padding::kValid;
  std::string conversion{kConversionMethod};
};

inline constexpr const char* kRdCsvHeader =
    "model,operating_point,bpp,ms_ssim,gop_size,dataset,padding,conversion";

/// CSV text sorted by (model, bpp, operating_point).
std::string rd_csv(std::span<const RdPoint> points);
/// SVG scatter/line plot with one series per model and the streaming band
/// shaded.
std::string rd_svg(std::span<const RdPoint> points,
                   double band_low = kStreamingBandLow,
                   double band_high = kStreamingBandHigh);
void emit_rd_report(std::span<const RdPoint> points,
                    const std::filesystem::path& csv_path,
                    const std::filesystem::path& svg_path);

/// Encodes every video with `gop_size`, counts container bytes and averages
/// MS-SSIM per video first, then across videos.
RdPoint evaluate_model(const Model& model, std::span<const std::vector<Frame>> videos,
                       int gop_size, const MsSsimConfig& metric,
                       const std::string& model_name, const std::string& dataset,
                       const std::string& operating_point);

/// Model configuration of one ablation variant of `base`.
CodecConfig run_ablation(const CodecConfig& base, Ablation variant);

enum class BaselineEncoder { kX264, kX265, kHm };
enum class BaselineMode { kLowLatency, kDefault };

std::string_view to_string(BaselineEncoder e);
std::string_view to_string(BaselineMode m);
BaselineEncoder parse_baseline_encoder(std::string_view s);
BaselineMode parse_baseline_mode(std::string_view s);

/// Rate targets in Mb/s and HM quantization parameters of the published
/// baseline runs.
inline constexpr std::array<double, 6> kBaselineRatesMbps{10, 20, 37, 62, 87, 112};
inline constexpr std::array<int, 6> kBaselineQps{20, 22, 25, 30, 35, 40};

struct BaselineSpec {
  BaselineEncoder encoder = BaselineEncoder::kX265;
  BaselineMode mode = BaselineMode::kLowLatency;
  int gop = 12;
  int width = 1920;
  int height = 1080;
  double fps = 120;
  int frames = 600;  // sequence length (HM -f)
  std::vector<double> rates_mbps{kBaselineRatesMbps.begin(), kBaselineRatesMbps.end()};
  std::vector<int> qps{kBaselineQps.begin(), kBaselineQps.end()};
  std::string hm_config = "LowDelayP";
  std::string binary;  // empty: look up ffmpeg / TAppEncoderStatic on PATH

  void validate() const;
  std::string default_binary() const;
};

/// Filled-in placeholders of one baseline command.
struct BaselineTarget {
  std::string input;   // input path without the .yuv extension
  std::string output;  // output path without extension
  std::string log;     // HM log path without extension
  double rate_mbps = 0.0;
  int qp = 0;
};

/// The command template with parameters substituted and nothing else
/// changed.
std::string baseline_command(const BaselineSpec& spec, const BaselineTarget& target);

/// Bits per pixel of a target bit rate: rate / (W * H * fps).
double rate_to_bpp(double rate_mbps, int width, int height, double fps);

std::optional<std::filesystem::path> find_executable(const std::string& name);

enum class RunStatus { kOk, kSkipped, kFailed };
std::string_view to_string(RunStatus s);

struct BaselineRun {
  RunStatus status = RunStatus::kSkipped;
  std::string message;
  std::vector<RdPoint> points;
  std::vector<std::string> commands;
};

/// Runs every rate (ffmpeg) or QP (HM) target of `spec` on a raw I420
/// video. A missing binary yields status kSkipped and no points. Encoder
/// logs are kept in `workdir`.
BaselineRun run_baseline(const BaselineSpec& spec, const std::filesystem::path& yuv_input,
                         const std::filesystem::path& workdir,
                         std::chrono::seconds timeout = std::chrono::seconds(3600),
                         const MsSsimConfig& metric = {});

/// Extracts the bit rate (kb/s) from an HM encoder log summary.
std::optional<double> parse_hm_bitrate_kbps(std::string_view log);

struct ColorProbeConfig {
  long iterations = 20000;
  double alpha_max = 1e3;
  double lr = 1e-4;
  double target_ms_ssim = 0.966;
  long log_every = 100;
  std::uint64_t seed = 1;
  MsSsimConfig metric;
};

/// alpha_t = min(1, 2t/T) * alpha_max.
double probe_alpha(long t, const ColorProbeConfig& cfg);

struct ProbeLogEntry {
  long iteration = 0;
  double alpha = 0.0;
  double psnr = 0.0;
  double ms_ssim = 0.0;
};

struct ColorProbeResult {
  Frame start;   // noise-perturbed starting point
  Frame probe;   // optimized image
  double noise_sigma = 0.0;
  double target = 0.0;  // MS-SSIM of the starting point
  double start_psnr = 0.0;
  double final_psnr = 0.0;
  double final_ms_ssim = 0.0;
  std::vector<ProbeLogEntry> log;
};

/// Perturbs `image` with Gaussian noise scaled so that its MS-SSIM equals
/// the target, then minimizes PSNR + alpha_t |MS-SSIM - MS-SSIM(start)|
/// with Adam, keeping pixels in [0, 1].
ColorProbeResult color_probe(const Frame& image, const ColorProbeConfig& cfg);

}  // namespace frae
