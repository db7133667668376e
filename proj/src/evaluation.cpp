#include "frae/evaluation.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#include "frae/error.hpp"
#include "frae/frames_io.hpp"

namespace frae {

namespace {

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<RdPoint> sorted(std::span<const RdPoint> points) {
  std::vector<RdPoint> v(points.begin(), points.end());
  std::stable_sort(v.begin(), v.end(), [](const RdPoint& a, const RdPoint& b) {
    if (a.model != b.model) return a.model < b.model;
    if (a.bpp != b.bpp) return a.bpp < b.bpp;
    return a.operating_point < b.operating_point;
  });
  return v;
}

}  // namespace

std::string rd_csv(std::span<const RdPoint> points) {
  std::ostringstream out;
  out << kRdCsvHeader << "\n";
  for (const RdPoint& p : sorted(points)) {
    out << csv_field(p.model) << "," << csv_field(p.operating_point) << ","
        << fmt(p.bpp, "%.9g") << "," << fmt(p.ms_ssim, "%.9g") << "," << p.gop_size << ","
        << csv_field(p.dataset) << "," << to_string(p.padding) << "," << csv_field(p.conversion)
        << "\n";
  }
  return out.str();
}

std::string rd_svg(std::span<const RdPoint> points, double band_low, double band_high) {
  const std::vector<RdPoint> pts = sorted(points);
  constexpr double kW = 640, kH = 480, kL = 70, kR = 160, kT = 30, kB = 60;
  double xmax = band_high * 1.2, ymin = 1.0, ymax = 0.0;
  for (const RdPoint& p : pts) {
    xmax = std::max(xmax, p.bpp);
    ymin = std::min(ymin, p.ms_ssim);
    ymax = std::max(ymax, p.ms_ssim);
  }
  if (pts.empty()) {
    ymin = 0.9;
    ymax = 1.0;
  }
  if (ymax - ymin < 1e-3) {
    ymin -= 0.005;
    ymax += 0.005;
  }
  xmax *= 1.05;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto sx = [&](double v) { return kL + (kW - kL - kR) * v / xmax; };
  auto sy = [&](double v) { return kT + (kH - kT - kB) * (ymax - v) / (ymax - ymin); };

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect x=\"" << sx(band_low) << "\" y=\"" << kT << "\" width=\""
    << sx(band_high) - sx(band_low) << "\" height=\"" << kH - kT - kB
    << "\" fill=\"#dddddd\"/>\n";
  s << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\""
    << kH - kB << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmax * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    s << "<text x=\"" << sx(xv) << "\" y=\"" << kH - kB + 16 << "\" text-anchor=\"middle\">"
      << fmt(xv, "%.3f") << "</text>\n";
    s << "<text x=\"" << kL - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">"
      << fmt(yv, "%.4f") << "</text>\n";
  }
  s << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 15
    << "\" text-anchor=\"middle\">bits per pixel</text>\n";
  s << "<text x=\"15\" y=\"" << (kT + kH - kB) / 2 << "\" transform=\"rotate(-90 15 "
    << (kT + kH - kB) / 2 << ")\" text-anchor=\"middle\">MS-SSIM (RGB)</text>\n";

  std::map<std::string, std::vector<RdPoint>> series;
  std::vector<std::string> order;
  for (const RdPoint& p : pts) {
    if (!series.count(p.model)) order.push_back(p.model);
    series[p.model].push_back(p);
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    const char* color = kColors[k % 8];
    const auto& ps = series[order[k]];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const RdPoint& p : ps) s << sx(p.bpp) << "," << sy(p.ms_ssim) << " ";
    s << "\"/>\n";
    for (const RdPoint& p : ps) {
      s << "<circle cx=\"" << sx(p.bpp) << "\" cy=\"" << sy(p.ms_ssim) << "\" r=\"3\" fill=\""
        << color << "\"/>\n";
    }
    s << "<text x=\"" << kW - kR + 10 << "\" y=\"" << kT + 16 * (k + 1) << "\" fill=\"" << color
      << "\">" << order[k] << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void emit_rd_report(std::span<const RdPoint> points, const std::filesystem::path& csv_path,
                    const std::filesystem::path& svg_path) {
  std::ofstream csv(csv_path);
  csv << rd_csv(points);
  std::ofstream svg(svg_path);
  svg << rd_svg(points);
  if (!csv || !svg) throw IoError("cannot write RD report files");
}

RdPoint evaluate_model(const Model& model, std::span<const std::vector<Frame>> videos,
                       int gop_size, const MsSsimConfig& metric, const std::string& model_name,
                       const std::string& dataset, const std::string& operating_point) {
  if (videos.empty()) throw InvalidArgument("evaluate_model: no videos");
  RdPoint p;
  p.model = model_name;
  p.operating_point = operating_point;
  p.gop_size = gop_size;
  p.dataset = dataset;
  p.padding = metric.padding;
  double bits = 0.0, pixels = 0.0, quality = 0.0;
  for (const std::vector<Frame>& video : videos) {
    const EncodeResult enc = encode_video(model, video, gop_size);
    for (const GopBitstream& g : enc.gops) bits += 8.0 * write_gop(g).size();
    double q = 0.0;
    for (std::size_t i = 0; i < video.size(); ++i) {
      q += ms_ssim(video[i], enc.recons[i], metric).value;
      pixels += static_cast<double>(video[i].height()) * video[i].width();
    }
    quality += q / static_cast<double>(video.size());
  }
  p.bpp = bits / pixels;
  p.ms_ssim = quality / static_cast<double>(videos.size());
  return p;
}

CodecConfig run_ablation(const CodecConfig& base, Ablation variant) {
  CodecConfig c = base;
  c.ablation = variant;
  c.validate();
  return c;
}

std::string_view to_string(BaselineEncoder e) {
  switch (e) {
    case BaselineEncoder::kX264: return "x264";
    case BaselineEncoder::kX265: return "x265";
    case BaselineEncoder::kHm: return "hm";
  }
  return "?";
}

std::string_view to_string(BaselineMode m) {
  return m == BaselineMode::kLowLatency ? "low-latency" : "default";
}

BaselineEncoder parse_baseline_encoder(std::string_view s) {
  if (s == "x264") return BaselineEncoder::kX264;
  if (s == "x265") return BaselineEncoder::kX265;
  if (s == "hm") return BaselineEncoder::kHm;
  throw InvalidArgument("unknown baseline encoder '" + std::string(s) +
                        "' (expected x264, x265 or hm)");
}

BaselineMode parse_baseline_mode(std::string_view s) {
  if (s == "low-latency") return BaselineMode::kLowLatency;
  if (s == "default") return BaselineMode::kDefault;
  throw InvalidArgument("unknown baseline mode '" + std::string(s) +
                        "' (expected low-latency or default)");
}

void BaselineSpec::validate() const {
  if (gop < 1 || width < 1 || height < 1 || !(fps > 0) || frames < 1) {
    throw InvalidArgument("baseline spec: gop, dimensions, fps and frames must be positive");
  }
  if (encoder == BaselineEncoder::kHm ? qps.empty() : rates_mbps.empty()) {
    throw InvalidArgument("baseline spec: no rate or QP targets");
  }
}

std::string BaselineSpec::default_binary() const {
  return encoder == BaselineEncoder::kHm ? "TAppEncoderStatic" : "ffmpeg";
}

namespace {

std::string number(double v) {
  // Integral values print without a decimal point (10, not 10.0).
  if (v == std::floor(v) && std::fabs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  return fmt(v, "%.10g");
}

std::string substitute(std::string text, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [key, value] : kv) {
    for (std::size_t pos = text.find(key); pos != std::string::npos;
         pos = text.find(key, pos + value.size())) {
      text.replace(pos, key.size(), value);
    }
  }
  return text;
}

constexpr const char* kFfmpegLowLatency =
    "ffmpeg -y -pix_fmt yuv420p -s [W]x[H] -r [FR] -i [IN].yuv "
    "-c:v libx[ENC] -b:v [RATE]M -maxrate [RATE]M -tune zerolatency "
    "-x[ENC]-params \"keyint=[GOP]:min-keyint=[GOP]:verbose=1\" [OUT].mkv";
constexpr const char* kFfmpegDefault =
    "ffmpeg -y -pix_fmt yuv420p -s [W]x[H] -r [FR] -i [IN].yuv "
    "-c:v libx[ENC] -b:v [RATE]M -maxrate [RATE]M "
    "-x[ENC]-params \"verbose=1\" [OUT].mkv";
constexpr const char* kHm =
    "TAppEncoderStatic -c [CONFIG].cfg -i [IN].yuv -wdt [W] -hgt [H] "
    "-fr [FR] -f [LEN] -o [OUT].yuv -b -ip [GOP] -q [QP] > [LOG].log";

}  // namespace

std::string baseline_command(const BaselineSpec& spec, const BaselineTarget& t) {
  if (spec.encoder == BaselineEncoder::kHm) {
    return substitute(kHm, {{"[CONFIG]", spec.hm_config},
                            {"[IN]", t.input},
                            {"[W]", std::to_string(spec.width)},
                            {"[H]", std::to_string(spec.height)},
                            {"[FR]", number(spec.fps)},
                            {"[LEN]", std::to_string(spec.frames)},
                            {"[OUT]", t.output},
                            {"[GOP]", std::to_string(spec.gop)},
                            {"[QP]", std::to_string(t.qp)},
                            {"[LOG]", t.log}});
  }
  const std::string enc = spec.encoder == BaselineEncoder::kX264 ? "264" : "265";
  return substitute(spec.mode == BaselineMode::kLowLatency ? kFfmpegLowLatency : kFfmpegDefault,
                    {{"[W]", std::to_string(spec.width)},
                     {"[H]", std::to_string(spec.height)},
                     {"[FR]", number(spec.fps)},
                     {"[IN]", t.input},
                     {"[ENC]", enc},
                     {"[RATE]", number(t.rate_mbps)},
                     {"[GOP]", std::to_string(spec.gop)},
                     {"[OUT]", t.output}});
}

double rate_to_bpp(double rate_mbps, int width, int height, double fps) {
  return rate_mbps * 1e6 / (static_cast<double>(width) * height * fps);
}

std::optional<std::filesystem::path> find_executable(const std::string& name) {
  if (name.find('/') != std::string::npos) {
    if (::access(name.c_str(), X_OK) == 0) return std::filesystem::path(name);
    return std::nullopt;
  }
  const char* path = std::getenv("PATH");
  if (!path) return std::nullopt;
  std::stringstream dirs(path);
  std::string dir;
  while (std::getline(dirs, dir, ':')) {
    if (dir.empty()) continue;
    const std::filesystem::path candidate = std::filesystem::path(dir) / name;
    if (::access(candidate.c_str(), X_OK) == 0 && std::filesystem::is_regular_file(candidate)) {
      return candidate;
    }
  }
  return std::nullopt;
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kOk: return "ok";
    case RunStatus::kSkipped: return "skipped";
    case RunStatus::kFailed: return "failed";
  }
  return "?";
}

std::optional<double> parse_hm_bitrate_kbps(std::string_view log) {
  // Summary block: a header line naming "Bitrate" followed by a row
  // "<frames> a <bitrate> ...".
  static const std::regex kRow(R"(\n\s*\d+\s+a\s+([0-9]+(?:\.[0-9]+)?))");
  const std::string text(log);
  const std::size_t summary = text.find("SUMMARY");
  if (summary == std::string::npos) return std::nullopt;
  std::smatch m;
  const std::string tail = text.substr(summary);
  if (!std::regex_search(tail, m, kRow)) return std::nullopt;
  return std::stod(m[1].str());
}

namespace {

struct CommandResult {
  int exit_code = -1;
  bool timed_out = false;
};

// Runs `command` through /bin/sh with stdout and stderr appended to `log`.
CommandResult run_shell(const std::string& command, const std::filesystem::path& log,
                        std::chrono::seconds timeout, const std::string& path_prefix) {
  const pid_t pid = ::fork();
  if (pid < 0) throw IoError("fork failed");
  if (pid == 0) {
    const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd >= 0) {
      ::dup2(fd, 1);
      ::dup2(fd, 2);
      ::close(fd);
    }
    if (!path_prefix.empty()) {
      const char* old = std::getenv("PATH");
      const std::string p = path_prefix + (old ? ":" + std::string(old) : "");
      ::setenv("PATH", p.c_str(), 1);
    }
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  CommandResult r;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  while (true) {
    const pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (std::chrono::steady_clock::now() > deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      r.timed_out = true;
      return r;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string strip_yuv(const std::filesystem::path& p) {
  std::string s = p.string();
  if (s.size() > 4 && s.substr(s.size() - 4) == ".yuv") s.resize(s.size() - 4);
  return s;
}

double video_ms_ssim(const std::vector<YuvFrame>& a, const std::vector<YuvFrame>& b,
                     const MsSsimConfig& metric) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n == 0) throw IoError("baseline produced no decodable frames");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += ms_ssim(yuv_to_rgb(a[i]), yuv_to_rgb(b[i]), metric).value;
  }
  return sum / static_cast<double>(n);
}

}  // namespace

BaselineRun run_baseline(const BaselineSpec& spec, const std::filesystem::path& yuv_input,
                         const std::filesystem::path& workdir, std::chrono::seconds timeout,
                         const MsSsimConfig& metric) {
  spec.validate();
  BaselineRun run;
  const std::string binary_name = spec.binary.empty() ? spec.default_binary() : spec.binary;
  const auto binary = find_executable(binary_name);
  if (!binary) {
    run.status = RunStatus::kSkipped;
    run.message = "baseline unavailable: '" + binary_name + "' not found";
    return run;
  }
  // Templates name the program by its bare name; make the resolved
  // directory win the PATH lookup.
  const std::string path_prefix = binary->parent_path().string();
  std::filesystem::create_directories(workdir);
  const std::vector<YuvFrame> original =
      read_yuv420_file(yuv_input, spec.width, spec.height, 0);
  const std::string series = std::string(to_string(spec.encoder)) + "-" +
                             std::string(to_string(spec.mode));
  const bool hm = spec.encoder == BaselineEncoder::kHm;
  const std::size_t count = hm ? spec.qps.size() : spec.rates_mbps.size();
  const double pixels = static_cast<double>(spec.width) * spec.height * original.size();
  run.status = RunStatus::kOk;
  for (std::size_t i = 0; i < count; ++i) {
    BaselineTarget t;
    t.input = strip_yuv(yuv_input);
    std::string tag;
    if (hm) {
      t.qp = spec.qps[i];
      tag = "qp" + std::to_string(t.qp);
    } else {
      t.rate_mbps = spec.rates_mbps[i];
      tag = "rate" + number(t.rate_mbps) + "M";
    }
    const std::filesystem::path stem = workdir / (series + "-" + tag);
    t.output = stem.string();
    t.log = stem.string();
    const std::string cmd = baseline_command(spec, t);
    run.commands.push_back(cmd);
    const std::filesystem::path log = stem.string() + ".stderr.log";
    const CommandResult r = run_shell(cmd, log, timeout, path_prefix);
    if (r.timed_out || r.exit_code != 0) {
      run.status = RunStatus::kFailed;
      run.message = "'" + cmd + "' " +
                    (r.timed_out ? "timed out" : "exited with " + std::to_string(r.exit_code)) +
                    "; see " + log.string();
      return run;
    }
    RdPoint p;
    p.model = series;
    p.gop_size = spec.gop;
    p.dataset = yuv_input.stem().string();
    p.padding = metric.padding;
    std::filesystem::path recon;
    if (hm) {
      p.operating_point = "qp=" + std::to_string(t.qp);
      std::ifstream in(stem.string() + ".log");
      const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      const auto kbps = parse_hm_bitrate_kbps(text);
      if (!kbps) {
        run.status = RunStatus::kFailed;
        run.message = "no bit rate in HM log " + stem.string() + ".log";
        return run;
      }
      p.bpp = *kbps * 1e3 / (static_cast<double>(spec.width) * spec.height * spec.fps);
      recon = stem.string() + ".yuv";
    } else {
      p.operating_point = "rate=" + number(t.rate_mbps) + "M";
      const std::filesystem::path mkv = stem.string() + ".mkv";
      if (!std::filesystem::exists(mkv)) {
        run.status = RunStatus::kFailed;
        run.message = "encoder produced no output " + mkv.string();
        return run;
      }
      p.bpp = 8.0 * static_cast<double>(std::filesystem::file_size(mkv)) / pixels;
      recon = stem.string() + ".decoded.yuv";
      const std::string decode = "ffmpeg -y -i " + mkv.string() +
                                 " -f rawvideo -pix_fmt yuv420p " + recon.string();
      run.commands.push_back(decode);
      const CommandResult d = run_shell(decode, log, timeout, path_prefix);
      if (d.timed_out || d.exit_code != 0) {
        run.status = RunStatus::kFailed;
        run.message = "decoding " + mkv.string() + " failed; see " + log.string();
        return run;
      }
    }
    p.ms_ssim = video_ms_ssim(original, read_yuv420_file(recon, spec.width, spec.height, 0), metric);
    run.points.push_back(p);
  }
  return run;
}

double probe_alpha(long t, const ColorProbeConfig& cfg) {
  const double ramp = 2.0 * static_cast<double>(t) / static_cast<double>(cfg.iterations);
  return std::min(1.0, ramp) * cfg.alpha_max;
}

namespace {

Frame add_noise(const Frame& image, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Frame out = image;
  for (double& v : out.data()) v = std::clamp(v + sigma * d(rng), 0.0, 1.0);
  return out;
}

}  // namespace

ColorProbeResult color_probe(const Frame& image, const ColorProbeConfig& cfg) {
  if (cfg.iterations < 1 || cfg.log_every < 1) throw InvalidArgument("color probe: bad schedule");
  cfg.metric.validate();
  if (std::min(image.height(), image.width()) < cfg.metric.min_extent()) {
    throw InvalidArgument("color probe: image smaller than the MS-SSIM pyramid");
  }
  ColorProbeResult r;
  // The same noise draw is rescaled until the start point sits on the
  // requested MS-SSIM level.
  double lo = 0.0, hi = 0.5;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double q = ms_ssim(image, add_noise(image, mid, cfg.seed), cfg.metric).value;
    (q > cfg.target_ms_ssim ? lo : hi) = mid;
  }
  r.noise_sigma = 0.5 * (lo + hi);
  r.start = add_noise(image, r.noise_sigma, cfg.seed);
  r.target = ms_ssim(image, r.start, cfg.metric).value;
  r.start_psnr = psnr(image, r.start).value;

  const Tensor x = to_tensor(image);
  Tensor xh = to_tensor(r.start);
  xh.set_requires_grad(true);
  nn::Adam adam({xh});
  auto record = [&](long t, double q, double p) {
    r.log.push_back({t, probe_alpha(t, cfg), p, q});
  };
  for (long t = 0; t < cfg.iterations; ++t) {
    adam.zero_grad();
    const Tensor q = ms_ssim(x, xh, cfg.metric);
    const Tensor p = psnr(x, xh);
    const double alpha = probe_alpha(t, cfg);
    const Tensor loss =
        ops::add(p, ops::mul_scalar(ops::abs(ops::add_scalar(ops::mean(q), -r.target)), alpha));
    if (t % cfg.log_every == 0) record(t, q.item(), p.item());
    loss.backward();
    adam.step(cfg.lr);
    for (double& v : xh.mutable_values()) v = std::clamp(v, 0.0, 1.0);
  }
  r.probe = image_from_tensor<Frame>(xh.detach());
  r.final_ms_ssim = ms_ssim(image, r.probe, cfg.metric).value;
  r.final_psnr = psnr(image, r.probe).value;
  record(cfg.iterations, r.final_ms_ssim, r.final_psnr);
  return r;
}

}  // namespace frae
