#include "frae/codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iterator>
#include <thread>

#include <nlohmann/json.hpp>

#include "frae/error.hpp"

namespace frae {

nn::NormContext inference_norm() { return {true, false}; }

namespace {

std::vector<double> pmf_at(const Tensor& log_p, int c, int levels,
                           std::size_t plane, std::size_t p) {
  std::vector<double> pmf(levels);
  for (int j = 0; j < levels; ++j) {
    pmf[j] = std::exp(log_p.values()[(static_cast<std::size_t>(c) * levels + j) * plane + p]);
  }
  return pmf;
}

Tensor window_of(const Tensor& zq, int y0, int y1, int x0, int x1) {
  const Shape s = zq.shape();
  const int h = y1 - y0 + 1;
  const int w = x1 - x0 + 1;
  std::vector<double> v(static_cast<std::size_t>(s.c) * h * w);
  for (int c = 0; c < s.c; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        v[(static_cast<std::size_t>(c) * h + y) * w + x] =
            zq.values()[(static_cast<std::size_t>(c) * s.h + y0 + y) * s.w + x0 + x];
      }
    }
  }
  return Tensor(Shape{1, s.c, h, w}, std::move(v));
}

}  // namespace

SymbolStream latent_symbols(const LatentGrid& z, const PriorModel& prior,
                            const Codebook& codebook, double* cross_entropy_bits) {
  NoGradGuard guard;
  if (z.channels != prior.channels()) {
    throw InvalidArgument("latent grid does not match the prior's channel count");
  }
  const Tensor log_p = prior.log_probs(codebook.dequantize(z));
  const int levels = prior.levels();
  const std::size_t plane = static_cast<std::size_t>(z.height) * z.width;
  SymbolStream s;
  s.symbols.reserve(z.size());
  s.tables.reserve(z.size());
  double bits = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < z.channels; ++c) {
      const int sym = z.indices[c * plane + p];
      if (sym >= levels) throw InvalidArgument("latent index outside the codebook");
      const std::vector<double> pmf = pmf_at(log_p, c, levels, plane, p);
      bits -= log_p.values()[(static_cast<std::size_t>(c) * levels + sym) * plane + p] / std::log(2.0);
      s.symbols.push_back(static_cast<std::uint32_t>(sym));
      s.tables.push_back(quantize_pmf(pmf));
    }
  }
  if (cross_entropy_bits) *cross_entropy_bits = bits;
  return s;
}

std::vector<std::uint8_t> encode_latents(const LatentGrid& z, const PriorModel& prior,
                                         const Codebook& codebook,
                                         const CoderBackend& backend,
                                         double* cross_entropy_bits) {
  return backend.encode(latent_symbols(z, prior, codebook, cross_entropy_bits));
}

LatentGrid decode_latents(std::span<const std::uint8_t> payload, int channels,
                          int height, int width, const PriorModel& prior,
                          const Codebook& codebook) {
  NoGradGuard guard;
  if (channels != prior.channels() || height <= 0 || width <= 0) {
    throw BitstreamError(BitstreamErrorKind::kInvalidField,
                         "latent dimensions do not match the model");
  }
  const int levels = prior.levels();
  LatentGrid z(channels, height, width);
  Tensor zq(Shape{1, channels, height, width}, 0.0);
  const std::span<const double> centers = codebook.centers().values();
  const int radius = prior.context_radius();
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  RangeDecoder dec(payload);
  const std::vector<double> uniform(levels, 1.0 / levels);
  const CdfTable uniform_table = quantize_pmf(uniform);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      Tensor ctx;
      if (!prior.uniform()) {
        const int y0 = std::max(0, y - radius);
        const int x0 = std::max(0, x - radius);
        const int x1 = std::min(width - 1, x + radius);
        const Tensor full = prior.context(window_of(zq, y0, y, x0, x1));
        ctx = window_of(full, y - y0, y - y0, x - x0, x - x0);
      }
      Tensor cell(Shape{1, channels, 1, 1}, 0.0);
      for (int c = 0; c < channels; ++c) {
        std::uint32_t sym;
        if (prior.uniform()) {
          sym = dec.decode(uniform_table);
        } else {
          const Tensor log_p = prior.head(ctx, cell);
          sym = dec.decode(quantize_pmf(pmf_at(log_p, c, levels, 1, 0)));
        }
        z.indices[c * plane + static_cast<std::size_t>(y) * width + x] =
            static_cast<std::uint8_t>(sym);
        cell.mutable_values()[c] = centers[sym];
        zq.mutable_values()[c * plane + static_cast<std::size_t>(y) * width + x] = centers[sym];
      }
    }
  }
  dec.finish();
  return z;
}

EncodeResult encode_video(const Model& model, std::span<const Frame> frames,
                          int gop_size, const CoderBackend& backend) {
  const CodecConfig& cfg = model.config();
  if (frames.empty()) throw InvalidArgument("no frames to encode");
  if (gop_size < 1 || gop_size > 255) throw InvalidArgument("GoP size must be in [1, 255]");
  const int height = frames.front().height();
  const int width = frames.front().width();
  if (width > 0xFFFF || height > 0xFFFF) throw InvalidArgument("frame too large for the container");
  model.check_frame_size(height, width);
  NoGradGuard guard;
  const nn::NormContext norm = inference_norm();
  const Codebook& codebook = model.codebook();

  EncodeResult result;
  for (std::size_t start = 0; start < frames.size(); start += gop_size) {
    const std::size_t end = std::min(frames.size(), start + gop_size);
    GopBitstream gop;
    gop.header.width = static_cast<std::uint16_t>(width);
    gop.header.height = static_cast<std::uint16_t>(height);
    gop.header.gop_size = static_cast<std::uint8_t>(gop_size);
    gop.header.frame_count = static_cast<std::uint32_t>(end - start);
    gop.header.codebook_size = static_cast<std::uint8_t>(cfg.codebook_size);
    Tensor prev;
    RecurrentState state = model.initial_state(1, height, width);
    for (std::size_t t = start; t < end; ++t) {
      const Frame& f = frames[t];
      if (f.height() != height || f.width() != width) {
        throw InvalidArgument("frame " + std::to_string(t) + " differs in size");
      }
      const Tensor x = to_tensor(f);
      const bool intra = t == start;
      const FrameType type = intra ? FrameType::kI : FrameType::kP;
      const EncodedFrame enc =
          intra ? model.encode_iframe(x, norm) : model.encode_pframe(x, prev, prev, state, norm);
      const LatentGrid z = codebook.quantize(enc.y);
      const Tensor zq = codebook.dequantize(z);
      DecodedFrame dec = intra ? model.decode_iframe(zq, norm)
                               : model.decode_pframe(zq, prev, state, norm);
      if (!intra) state = dec.state;
      prev = dec.recon;

      FrameRecord rec;
      rec.type = type;
      rec.latent_height = static_cast<std::uint16_t>(z.height);
      rec.latent_width = static_cast<std::uint16_t>(z.width);
      rec.latent_channels = static_cast<std::uint16_t>(z.channels);
      FrameStats st;
      st.gop = static_cast<int>(result.gops.size());
      st.position = static_cast<int>(t - start);
      st.type = type;
      rec.payload = encode_latents(z, model.prior(type), codebook, backend, &st.cross_entropy_bits);
      st.payload_bits = 8ull * rec.payload.size();
      gop.frames.push_back(std::move(rec));
      result.stats.push_back(st);
      result.recons.push_back(image_from_tensor<Frame>(dec.recon));
      result.flows.push_back(dec.flow_hat.defined() ? image_from_tensor<FlowField>(dec.flow_hat)
                                                    : FlowField());
    }
    result.gops.push_back(std::move(gop));
  }
  return result;
}

std::vector<Frame> decode_video(const Model& model, std::span<const GopBitstream> gops,
                                unsigned threads) {
  const CodecConfig& cfg = model.config();
  const Codebook& codebook = model.codebook();
  struct Job {
    const FrameRecord* record;
    LatentGrid z;
  };
  std::vector<Job> jobs;
  for (const GopBitstream& gop : gops) {
    if (gop.header.codebook_size != cfg.codebook_size) {
      throw ModelError("stream codebook size " + std::to_string(gop.header.codebook_size) +
                       " differs from the model's " + std::to_string(cfg.codebook_size));
    }
    model.check_frame_size(gop.header.height, gop.header.width);
    for (const FrameRecord& rec : gop.frames) {
      if (rec.latent_channels != cfg.c2 ||
          rec.latent_height * cfg.downsample_factor != gop.header.height ||
          rec.latent_width * cfg.downsample_factor != gop.header.width) {
        throw ModelError("latent dimensions in the stream do not fit the model");
      }
      jobs.push_back({&rec, {}});
    }
  }

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::size_t next = 0;
  while (next < jobs.size()) {
    std::vector<std::future<LatentGrid>> batch;
    const std::size_t stop = std::min(jobs.size(), next + threads);
    for (std::size_t i = next; i < stop; ++i) {
      const FrameRecord* rec = jobs[i].record;
      batch.push_back(std::async(std::launch::async, [&model, &codebook, rec] {
        return decode_latents(rec->payload, rec->latent_channels, rec->latent_height,
                              rec->latent_width, model.prior(rec->type), codebook);
      }));
    }
    for (std::size_t i = next; i < stop; ++i) jobs[i].z = batch[i - next].get();
    next = stop;
  }

  NoGradGuard guard;
  const nn::NormContext norm = inference_norm();
  std::vector<Frame> out;
  std::size_t k = 0;
  for (const GopBitstream& gop : gops) {
    Tensor prev;
    RecurrentState state = model.initial_state(1, gop.header.height, gop.header.width);
    for (std::size_t t = 0; t < gop.frames.size(); ++t, ++k) {
      const Tensor zq = codebook.dequantize(jobs[k].z);
      DecodedFrame dec = t == 0 ? model.decode_iframe(zq, norm)
                                : model.decode_pframe(zq, prev, state, norm);
      if (t != 0) state = dec.state;
      prev = dec.recon;
      out.push_back(image_from_tensor<Frame>(dec.recon));
    }
  }
  return out;
}

std::filesystem::path manifest_path(const std::filesystem::path& stream) {
  std::filesystem::path p = stream;
  p += ".manifest";
  return p;
}

void write_frae(const std::filesystem::path& path, std::span<const GopBitstream> gops,
                const StreamManifest& manifest, const CoderBackend& backend) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create '" + path.string() + "'");
  for (const GopBitstream& gop : gops) {
    const std::vector<std::uint8_t> bytes = backend.write_gop(gop);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw IoError("failed to write '" + path.string() + "'");
  nlohmann::json j = {{"model_hash", manifest.model_hash},
                      {"width", manifest.width},
                      {"height", manifest.height},
                      {"gop_size", manifest.gop_size},
                      {"frame_count", manifest.frame_count},
                      {"codebook_size", manifest.codebook_size}};
  std::ofstream side(manifest_path(path));
  side << j.dump(2) << "\n";
  if (!side) throw IoError("failed to write '" + manifest_path(path).string() + "'");
}

std::vector<GopBitstream> read_frae(const std::filesystem::path& path,
                                    StreamManifest* manifest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  std::vector<GopBitstream> gops = read_gops(bytes);
  if (manifest) {
    *manifest = {};
    std::ifstream side(manifest_path(path));
    if (side) {
      try {
        const nlohmann::json j = nlohmann::json::parse(side);
        manifest->model_hash = j.at("model_hash").get<std::string>();
        manifest->width = j.at("width").get<int>();
        manifest->height = j.at("height").get<int>();
        manifest->gop_size = j.at("gop_size").get<int>();
        manifest->frame_count = j.at("frame_count").get<int>();
        manifest->codebook_size = j.at("codebook_size").get<int>();
      } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed stream manifest: " + std::string(e.what()));
      }
    }
  }
  return gops;
}

void check_stream(const Model& model, std::span<const GopBitstream> gops,
                  const StreamManifest& manifest) {
  if (!manifest.model_hash.empty() && manifest.model_hash != model_hash(model)) {
    throw ModelError("stream was encoded with a different model (hash " +
                     manifest.model_hash.substr(0, 12) + "...)");
  }
  const CodecConfig& cfg = model.config();
  for (const GopBitstream& gop : gops) {
    if (gop.header.codebook_size != cfg.codebook_size) {
      throw ModelError("stream codebook size does not match the model");
    }
    for (const FrameRecord& rec : gop.frames) {
      if (rec.latent_channels != cfg.c2) {
        throw ModelError("stream latent channel count does not match the model");
      }
    }
  }
}

std::vector<PositionStats> per_frame_stats(std::span<const Frame> originals,
                                           std::span<const Frame> recons,
                                           std::span<const FrameStats> stats,
                                           const MsSsimConfig& cfg) {
  if (originals.size() != recons.size() || originals.size() != stats.size()) {
    throw InvalidArgument("per_frame_stats: inputs differ in length");
  }
  std::vector<PositionStats> out;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const int pos = stats[i].position;
    if (pos >= static_cast<int>(out.size())) out.resize(pos + 1);
    PositionStats& s = out[pos];
    s.position = pos;
    s.ms_ssim += ms_ssim(originals[i], recons[i], cfg).value;
    s.bits += static_cast<double>(stats[i].payload_bits);
    s.bpp += bits_per_pixel(stats[i].payload_bits, originals[i].height(), originals[i].width(), 1);
    ++s.samples;
  }
  for (PositionStats& s : out) {
    if (s.samples == 0) continue;
    s.ms_ssim /= s.samples;
    s.bits /= s.samples;
    s.bpp /= s.samples;
  }
  return out;
}

}  // namespace frae
