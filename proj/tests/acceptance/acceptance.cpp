// Acceptance run: one PASS/FAIL line per criterion. Optional arguments
// select criteria by name.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "frae/codec.hpp"
#include "frae/evaluation.hpp"
#include "frae/motion.hpp"
#include "frae/prior.hpp"
#include "frae/training.hpp"
#include "support/fixtures.hpp"
#include "support/ms_ssim_reference.hpp"

namespace frae {
namespace {

// Tolerances.
constexpr double kPriorSumTol = 1e-5;
constexpr double kWarpGradRelTol = 1e-4;
constexpr double kQuantGradTol = 1e-5;
constexpr double kMsSsimRefTol = 1e-6;
constexpr double kRateSlackBits = 18.0;
constexpr double kCodecLoopSeconds = 300.0;
constexpr double kSmokeSeconds = 900.0;
constexpr double kSmokeLossDrop = 0.5;
constexpr double kProbeMsSsimTol = 1e-3;
constexpr double kProbePsnrDropDb = 3.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Codec loop, rate accounting and GoP decomposition share one set of encodes.

struct CodecRuns {
  std::vector<std::vector<Frame>> clips;
  std::vector<EncodeResult> encodes;
  std::vector<std::vector<Frame>> decodes;
  double seconds = 0.0;
};

const CodecRuns& codec_runs() {
  static std::optional<CodecRuns> runs;
  if (runs) return *runs;
  runs.emplace();
  Model model(CodecConfig{}, 101);
  test::perturb_parameters(model, 102, 0.05);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 50; ++i) {
    runs->clips.push_back(test::random_clip(16, 64, 64, 1000 + i));
    runs->encodes.push_back(encode_video(model, runs->clips.back(), 8));
    runs->decodes.push_back(decode_video(model, runs->encodes.back().gops));
  }
  runs->seconds = seconds_since(t0);
  return *runs;
}

Outcome codec_loop() {
  const CodecRuns& r = codec_runs();
  std::size_t frames = 0, mismatched = 0;
  for (std::size_t i = 0; i < r.clips.size(); ++i) {
    const auto& enc = r.encodes[i];
    if (enc.gops.size() != 2 || r.decodes[i].size() != 16) ++mismatched;
    for (std::size_t t = 0; t < r.decodes[i].size() && t < enc.recons.size(); ++t) {
      ++frames;
      if (!(r.decodes[i][t] == enc.recons[t])) ++mismatched;
    }
  }
  return {mismatched == 0 && frames == 800 && r.seconds < kCodecLoopSeconds,
          format("%zu/%zu frames bit-exact, %.1f s (limit %.0f s)", frames - mismatched, frames,
                 r.seconds, kCodecLoopSeconds)};
}

Outcome rate_accounting() {
  const CodecRuns& r = codec_runs();
  std::size_t bad = 0, frames = 0;
  double worst_low = std::numeric_limits<double>::infinity(), worst_high = -worst_low;
  for (const EncodeResult& enc : r.encodes) {
    for (const FrameStats& s : enc.stats) {
      const double excess = static_cast<double>(s.payload_bits) - s.cross_entropy_bits;
      worst_low = std::min(worst_low, excess);
      worst_high = std::max(worst_high, excess);
      if (excess < 0.0 || excess > kRateSlackBits) ++bad;
      ++frames;
    }
  }
  return {bad == 0 && frames > 0,
          format("%zu frames, payload - H_cross in [%.3f, %.3f] bits (allowed [0, %.0f])", frames,
                 worst_low, worst_high, kRateSlackBits)};
}

Outcome gop_decomposition() {
  const CodecRuns& r = codec_runs();
  std::size_t gops = 0, bad = 0;
  for (const EncodeResult& enc : r.encodes) {
    for (std::size_t g = 0; g < enc.gops.size(); ++g) {
      std::uint64_t i_bits = 0, p_bits = 0;
      for (const FrameStats& s : enc.stats) {
        if (s.gop != static_cast<int>(g)) continue;
        (s.type == FrameType::kI ? i_bits : p_bits) += s.payload_bits;
      }
      const GopBitstream& gop = enc.gops[g];
      const std::uint64_t container = 8 * write_gop(gop).size();
      const std::uint64_t framing = 8 * (kHeaderBytes + gop.frames.size() * kRecordHeaderBytes);
      ++gops;
      if (gop.payload_bits() != i_bits + p_bits || container != framing + i_bits + p_bits) ++bad;
    }
  }
  return {bad == 0 && gops > 0, format("%zu GoPs, %zu with a mismatch", gops, bad)};
}

// ---------------------------------------------------------------------------

Outcome prior_validity() {
  CodecConfig cfg;
  cfg.c2 = 1;
  cfg.codebook_size = 4;
  double worst_sum = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Model model(cfg, seed);
    test::perturb_parameters(model, seed + 10, 0.3);
    for (FrameType type : {FrameType::kI, FrameType::kP}) {
      double total = 0.0;
      LatentGrid z(1, 2, 2);
      for (int code = 0; code < 256; ++code) {
        for (int k = 0; k < 4; ++k) z.indices[k] = static_cast<std::uint8_t>((code >> (2 * k)) & 3);
        double bits = 0.0;
        for (double v : log_prob(z, model.prior(type), model.codebook())) bits += v;
        total += std::exp2(bits);
      }
      worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    }
  }

  // Causality: perturbing one symbol leaves every earlier conditional
  // bit-identical.
  const CodecConfig full;
  Model model(full, 4);
  test::perturb_parameters(model, 5, 0.3);
  const int C = full.c2, H = 6, W = 7, L = full.codebook_size;
  std::mt19937_64 rng(6);
  LatentGrid z(C, H, W);
  for (auto& i : z.indices) i = static_cast<std::uint8_t>(rng() % L);
  std::size_t violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const FrameType type = trial % 2 ? FrameType::kP : FrameType::kI;
    const std::vector<double> base = log_prob(z, model.prior(type), model.codebook());
    const int c = static_cast<int>(rng() % C), y = static_cast<int>(rng() % H),
              x = static_cast<int>(rng() % W);
    LatentGrid moved = z;
    moved.at(c, y, x) = static_cast<std::uint8_t>((z.at(c, y, x) + 1 + rng() % (L - 1)) % L);
    const std::vector<double> lp = log_prob(moved, model.prior(type), model.codebook());
    const int k = (y * W + x) * C + c;
    for (int cc = 0; cc < C; ++cc) {
      for (int yy = 0; yy < H; ++yy) {
        for (int xx = 0; xx < W; ++xx) {
          if ((yy * W + xx) * C + cc >= k) continue;
          const std::size_t i = (static_cast<std::size_t>(cc) * H + yy) * W + xx;
          if (lp[i] != base[i]) ++violations;
        }
      }
    }
  }
  return {worst_sum <= kPriorSumTol && violations == 0,
          format("max |sum - 1| = %.2e (tol %.0e), causality violations at 100 sites: %zu",
                 worst_sum, kPriorSumTol, violations)};
}

// ---------------------------------------------------------------------------

Outcome warp_checks() {
  std::mt19937_64 rng(7);
  const Frame img = test::random_frame(24, 28, rng);
  const bool identity = warp(img, FlowField(24, 28)) == img;

  std::size_t shift_bad = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int u = static_cast<int>(rng() % 9) - 4, v = static_cast<int>(rng() % 9) - 4;
    FlowField f(24, 28);
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 28; ++x) {
        f.at(0, y, x) = u;
        f.at(1, y, x) = v;
      }
    }
    const Frame out = warp(img, f);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < 24; ++y) {
        for (int x = 0; x < 28; ++x) {
          const int sy = y + v, sx = x + u;
          if (sy < 0 || sy >= 24 || sx < 0 || sx >= 28) continue;
          if (out.at(c, y, x) != img.at(c, sy, sx)) ++shift_bad;
        }
      }
    }
  }

  // Finite differences on a flow whose samples stay off the bilinear kinks.
  const Tensor image = to_tensor(test::random_frame(16, 16, rng));
  std::uniform_real_distribution<double> frac(0.2, 0.8);
  std::uniform_int_distribution<int> whole(-3, 3);
  Tensor flow(Shape{1, 2, 16, 16});
  for (double& v : flow.mutable_values()) v = whole(rng) + frac(rng);
  flow.set_requires_grad(true);
  std::vector<double> weights(3 * 256);
  std::uniform_real_distribution<double> w(-1.0, 1.0);
  for (double& x : weights) x = w(rng);
  const Tensor probe(Shape{1, 3, 16, 16}, weights);
  ops::sum(ops::mul(ops::warp(image, flow), probe)).backward();
  const std::vector<double> grad(flow.grad().begin(), flow.grad().end());
  NoGradGuard guard;
  auto objective = [&]() { return ops::sum(ops::mul(ops::warp(image, flow), probe)).item(); };
  double worst = 0.0;
  std::uniform_int_distribution<std::size_t> pick(0, flow.numel() - 1);
  for (int k = 0; k < 100; ++k) {
    const std::size_t i = pick(rng);
    const double orig = flow.values()[i];
    const double eps = 1e-6;
    flow.mutable_values()[i] = orig + eps;
    const double up = objective();
    flow.mutable_values()[i] = orig - eps;
    const double down = objective();
    flow.mutable_values()[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    // Relative error with a floor for near-zero derivatives.
    worst = std::max(worst, std::abs(grad[i] - numeric) / std::max(std::abs(numeric), 1e-2));
  }
  return {identity && shift_bad == 0 && worst <= kWarpGradRelTol,
          format("identity %s, integer-shift mismatches %zu, max FD rel err %.2e (tol %.0e)",
                 identity ? "exact" : "differs", shift_bad, worst, kWarpGradRelTol)};
}

// ---------------------------------------------------------------------------

Outcome quantizer_checks() {
  std::mt19937_64 rng(8);
  const std::vector<double> centers{-1.0, -0.625, -0.25, 0.0, 0.125, 0.5, 0.75, 1.0};
  std::vector<double> ys(100000);
  std::uniform_real_distribution<double> d(-1.5, 1.5);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (i % 10 == 0) {
      // Exact midpoints: both neighbours are equally near.
      const std::size_t j = rng() % (centers.size() - 1);
      ys[i] = (centers[j] + centers[j + 1]) / 2;
    } else {
      ys[i] = d(rng);
    }
  }
  const Tensor c(Shape{1, 8, 1, 1}, centers);
  const Tensor y(Shape{1, 1, 1, static_cast<int>(ys.size())}, ys);
  const Tensor q = ops::quantize_straight_through(y, c, 1.0);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    int best = 0;
    double best_d = std::abs(ys[i] - centers[0]);
    for (int j = 1; j < 8; ++j) {
      const double dist = std::abs(ys[i] - centers[j]);
      if (dist < best_d) {  // strict: ties keep the lower index
        best_d = dist;
        best = j;
      }
    }
    if (q.values()[i] != centers[best]) ++wrong;
  }

  // Soft path: d yhat / d y and d yhat / d c against the closed form.
  const int levels = 6;
  const double sigma = 2.3;
  std::vector<double> cv(levels), yv(60);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (double& v : cv) v = u(rng);
  for (double& v : yv) v = u(rng);
  Tensor ct(Shape{1, levels, 1, 1}, cv);
  Tensor yt(Shape{1, 3, 4, 5}, yv);
  ct.set_requires_grad(true);
  yt.set_requires_grad(true);
  ops::sum(ops::quantize_straight_through(yt, ct, sigma)).backward();
  std::vector<double> want_c(levels, 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < yv.size(); ++i) {
    std::vector<double> p(levels);
    double total = 0.0;
    for (int j = 0; j < levels; ++j) total += p[j] = std::exp(-sigma * std::pow(yv[i] - cv[j], 2));
    double mix = 0.0, mean_g = 0.0;
    for (int j = 0; j < levels; ++j) {
      p[j] /= total;
      mix += p[j] * cv[j];
      mean_g += p[j] * -2.0 * sigma * (yv[i] - cv[j]);
    }
    double dy = 0.0;
    for (int j = 0; j < levels; ++j) {
      dy += cv[j] * p[j] * (-2.0 * sigma * (yv[i] - cv[j]) - mean_g);
      want_c[j] += p[j] + 2.0 * sigma * (yv[i] - cv[j]) * p[j] * (cv[j] - mix);
    }
    worst = std::max(worst, std::abs(yt.grad()[i] - dy));
  }
  for (int j = 0; j < levels; ++j) worst = std::max(worst, std::abs(ct.grad()[j] - want_c[j]));
  return {wrong == 0 && worst <= kQuantGradTol,
          format("forward mismatches %zu/100000 (10%% exact ties), max Jacobian err %.2e (tol %.0e)",
                 wrong, worst, kQuantGradTol)};
}

// ---------------------------------------------------------------------------

Outcome ms_ssim_checks() {
  std::mt19937_64 rng(9);
  const test::ReferenceMsSsim reference;
  double worst = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    Frame a, b;
    std::normal_distribution<double> n(0.0, 0.02 + 0.01 * (pair % 20));
    if (pair % 4 == 0) {
      a = test::random_frame(256, 256, rng);
      b = test::random_frame(256, 256, rng);
    } else {
      a = translating_texture_clip(1, 256, 0, 0, rng()).front();
      b = a;
      for (double& v : b.data()) v = std::clamp(v + n(rng), 0.0, 1.0);
    }
    worst = std::max(worst, std::abs(ms_ssim(a, b, MsSsimConfig{}).value - reference(a, b)));
  }

  const Frame base = translating_texture_clip(1, 256, 0, 0, 10).front();
  MsSsimConfig valid, rep;
  rep.padding = Padding::kReplicate;
  bool corners = true;
  for (auto [y, x] : {std::pair{0, 0}, {0, 255}, {255, 0}, {255, 255}}) {
    Frame b = base;
    for (int c = 0; c < 3; ++c) b.at(c, y, x) = b.at(c, y, x) > 0.5 ? 0.0 : 1.0;
    const double dv = 1.0 - ms_ssim(base, b, valid).value;
    const double dr = 1.0 - ms_ssim(base, b, rep).value;
    corners = corners && dr > dv && dr > 0.0;
  }
  return {worst <= kMsSsimRefTol && corners,
          format("max |ours - reference| = %.2e over 100 pairs (tol %.0e), corner sensitivity %s",
                 worst, kMsSsimRefTol, corners ? "holds" : "fails")};
}

// ---------------------------------------------------------------------------

struct SmokeRun {
  double first = 0.0;
  double last = 0.0;
  double p_ms_ssim = 0.0;
  double seconds = 0.0;
};

SmokeRun smoke_run(Ablation ablation) {
  CodecConfig cc;
  cc.ablation = ablation;
  Model model(cc, 1);
  TrainingConfig tc;
  tc.beta = 0.1;
  tc.batch_size = 1;
  tc.gop_size = 8;
  tc.total_iters = 500;
  tc.lr = 1e-3;
  tc.lr_decay = 0.5;
  tc.lr_decay_every = 100;
  tc.reference_switch_at = 150;
  tc.flow_loss_until = 200;
  tc.metric = MsSsimConfig::truncated(3, Padding::kReplicate);
  Trainer trainer(model, tc);
  const std::vector<Frame> clip = translating_texture_clip(8, 64, 1.0, 0.5, 3);
  const std::vector<TrainingGop> batch{clip};
  SmokeRun r;
  const auto t0 = std::chrono::steady_clock::now();
  for (long i = 0; i < tc.total_iters; ++i) {
    const LossBreakdown b = trainer.step(batch);
    if (i == 0) r.first = b.total;
    r.last = b.total;
  }
  r.seconds = seconds_since(t0);
  const EncodeResult enc = encode_video(model, clip, 8);
  for (std::size_t t = 1; t < clip.size(); ++t) r.p_ms_ssim += ms_ssim(clip[t], enc.recons[t], tc.metric).value;
  r.p_ms_ssim /= static_cast<double>(clip.size() - 1);
  return r;
}

Outcome training_smoke() {
  const SmokeRun full = smoke_run(Ablation::kNone);
  const SmokeRun plain = smoke_run(Ablation::kNoMenet);
  const double drop = 1.0 - full.last / full.first;
  const double seconds = full.seconds + plain.seconds;
  return {drop >= kSmokeLossDrop && full.p_ms_ssim > plain.p_ms_ssim && seconds < kSmokeSeconds,
          format("loss %.4f -> %.4f (drop %.1f%%, need %.0f%%), P-frame MS-SSIM %.4f with MENet vs "
                 "%.4f without, %.0f s (limit %.0f s)",
                 full.first, full.last, 100 * drop, 100 * kSmokeLossDrop, full.p_ms_ssim,
                 plain.p_ms_ssim, seconds, kSmokeSeconds)};
}

// ---------------------------------------------------------------------------

Outcome schedules() {
  const TrainingConfig cfg;
  const int frame = 0, recon = 1;
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  expect(lr_at(0, cfg) == 1e-4, "lr(0)");
  expect(lr_at(99999, cfg) == 1e-4, "lr(99999)");
  expect(std::abs(lr_at(100000, cfg) - 8e-5) < 1e-18, "lr(100000)");
  expect(std::abs(lr_at(249999, cfg) - 6.4e-5) < 1e-18, "lr(249999)");
  expect(select_reference(14000L, frame, recon, cfg.reference_switch_at) == frame, "switch 14k");
  expect(select_reference(14999L, frame, recon, cfg.reference_switch_at) == frame, "switch 14999");
  expect(select_reference(15000L, frame, recon, cfg.reference_switch_at) == recon, "switch 15k");
  expect(select_reference(16000L, frame, recon, cfg.reference_switch_at) == recon, "switch 16k");
  expect(flow_losses_active(19999, cfg), "flow 19999");
  expect(!flow_losses_active(20000, cfg), "flow 20000");
  expect(set_normalization_mode(39999, cfg.norm_freeze_at).use_batch_stats, "norm 39999");
  expect(!set_normalization_mode(40000, cfg.norm_freeze_at).use_batch_stats, "norm 40000");
  std::string detail = "lr steps, reference switch 14k/15k/16k, flow gate 19999/20000, norm freeze "
                       "39999/40000";
  for (const auto& f : failures) detail += "; wrong at " + f;
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------

Outcome color_probe_check() {
  const Frame image = translating_texture_clip(1, 256, 0, 0, 11).front();
  ColorProbeConfig cfg;
  cfg.iterations = 2000;
  cfg.target_ms_ssim = 0.966;
  const ColorProbeResult r = color_probe(image, cfg);
  const double gap = std::abs(r.final_ms_ssim - cfg.target_ms_ssim);
  const double drop = r.start_psnr - r.final_psnr;
  return {gap <= kProbeMsSsimTol && drop >= kProbePsnrDropDb,
          format("MS-SSIM %.5f (|gap| %.1e, tol %.0e), PSNR %.2f -> %.2f dB (drop %.2f, need %.0f)",
                 r.final_ms_ssim, gap, kProbeMsSsimTol, r.start_psnr, r.final_psnr, drop,
                 kProbePsnrDropDb)};
}

// ---------------------------------------------------------------------------

Outcome baseline_fidelity() {
  std::vector<std::string> failures;
  BaselineTarget t;
  t.input = "IN";
  t.output = "OUT";
  t.log = "LOG";
  t.rate_mbps = 10;
  BaselineSpec spec;
  if (baseline_command(spec, t) !=
      "ffmpeg -y -pix_fmt yuv420p -s 1920x1080 -r 120 -i IN.yuv -c:v libx265 -b:v 10M -maxrate "
      "10M -tune zerolatency -x265-params \"keyint=12:min-keyint=12:verbose=1\" OUT.mkv") {
    failures.push_back("low-latency");
  }
  spec.mode = BaselineMode::kDefault;
  spec.encoder = BaselineEncoder::kX264;
  if (baseline_command(spec, t) !=
      "ffmpeg -y -pix_fmt yuv420p -s 1920x1080 -r 120 -i IN.yuv -c:v libx264 -b:v 10M -maxrate "
      "10M -x264-params \"verbose=1\" OUT.mkv") {
    failures.push_back("default");
  }
  spec.encoder = BaselineEncoder::kHm;
  t.qp = 20;
  if (baseline_command(spec, t) !=
      "TAppEncoderStatic -c LowDelayP.cfg -i IN.yuv -wdt 1920 -hgt 1080 -fr 120 -f 600 -o "
      "OUT.yuv -b -ip 12 -q 20 > LOG.log") {
    failures.push_back("hm");
  }
  const double bpp[] = {0.04, 0.08, 0.15, 0.25, 0.35, 0.45};
  for (std::size_t i = 0; i < kBaselineRatesMbps.size(); ++i) {
    if (std::abs(rate_to_bpp(kBaselineRatesMbps[i], 1920, 1080, 120) - bpp[i]) > 0.005) {
      failures.push_back("bpp " + std::to_string(i));
    }
  }
  BaselineSpec absent;
  absent.binary = "/nonexistent/frae-acceptance/ffmpeg";
  const BaselineRun run = run_baseline(absent, "/nonexistent/input.yuv", "/tmp/frae-acceptance");
  if (run.status != RunStatus::kSkipped || !run.points.empty()) failures.push_back("skip");
  std::string detail = "3 command templates, 6 rate/bpp pairs, absent binary skipped";
  for (const auto& f : failures) detail += "; wrong: " + f;
  return {failures.empty(), detail};
}

}  // namespace
}  // namespace frae

int main(int argc, char** argv) {
  using frae::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"codec-loop", frae::codec_loop},
      {"rate-accounting", frae::rate_accounting},
      {"gop-decomposition", frae::gop_decomposition},
      {"prior-validity", frae::prior_validity},
      {"warp", frae::warp_checks},
      {"quantizer", frae::quantizer_checks},
      {"ms-ssim", frae::ms_ssim_checks},
      {"schedules", frae::schedules},
      {"baseline-commands", frae::baseline_fidelity},
      {"color-probe", frae::color_probe_check},
      {"training-smoke", frae::training_smoke},
  };
  std::vector<std::string> selected(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), name) == selected.end()) {
      continue;
    }
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
