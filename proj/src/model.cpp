#include "frae/model.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "frae/error.hpp"
#include "frae/ops.hpp"

namespace frae {

void to_json(nlohmann::json& j, const CodecConfig& c) {
  j = {{"c1", c.c1},
       {"c2", c.c2},
       {"c3", c.c3},
       {"downsample_factor", c.downsample_factor},
       {"codebook_size", c.codebook_size},
       {"gru_kernel", c.gru_kernel},
       {"residual_blocks", c.residual_blocks},
       {"softmax_sigma", c.softmax_sigma},
       {"batchnorm", c.batchnorm},
       {"menet_width", c.menet_width},
       {"menet_levels", c.menet_levels},
       {"prior_width", c.prior_width},
       {"prior_layers", c.prior_layers},
       {"prior_kernel", c.prior_kernel},
       {"prior_head_hidden", c.prior_head_hidden},
       {"ablation", std::string(to_string(c.ablation))}};
}

void from_json(const nlohmann::json& j, CodecConfig& c) {
  j.at("c1").get_to(c.c1);
  j.at("c2").get_to(c.c2);
  j.at("c3").get_to(c.c3);
  j.at("downsample_factor").get_to(c.downsample_factor);
  j.at("codebook_size").get_to(c.codebook_size);
  j.at("gru_kernel").get_to(c.gru_kernel);
  j.at("residual_blocks").get_to(c.residual_blocks);
  j.at("softmax_sigma").get_to(c.softmax_sigma);
  j.at("batchnorm").get_to(c.batchnorm);
  j.at("menet_width").get_to(c.menet_width);
  j.at("menet_levels").get_to(c.menet_levels);
  j.at("prior_width").get_to(c.prior_width);
  j.at("prior_layers").get_to(c.prior_layers);
  j.at("prior_kernel").get_to(c.prior_kernel);
  j.at("prior_head_hidden").get_to(c.prior_head_hidden);
  c.ablation = parse_ablation(j.at("ablation").get<std::string>());
}

namespace {

CodecConfig validated(const CodecConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

Model::Model(const CodecConfig& cfg, std::uint64_t seed) : cfg_(validated(cfg)) {
  nn::Rng rng(seed);
  codebook_ = Codebook(params_, "codebook", cfg_.codebook_size);
  iframe_encoder_ = FrameEncoder(params_, "iframe.enc", cfg_, 3, 0, rng);
  iframe_decoder_ = IFrameDecoder(params_, "iframe.dec", cfg_, rng);
  const int p_inputs = cfg_.uses_menet() ? 8 : 6;
  const int feedback = cfg_.uses_feedback() ? cfg_.c3 : 0;
  pframe_encoder_ = FrameEncoder(params_, "pframe.enc", cfg_, p_inputs, feedback, rng);
  pframe_decoder_ = PFrameDecoder(params_, "pframe.dec", cfg_, rng);
  if (cfg_.uses_menet()) {
    menet_ = MENet(params_, "menet", MENetConfig{cfg_.menet_width, cfg_.menet_levels}, rng);
  }
  i_prior_ = PriorModel(params_, "prior.i", cfg_, FrameType::kI, rng);
  p_prior_ = PriorModel(params_, "prior.p", cfg_, FrameType::kP, rng);
}

void Model::check_frame_size(int height, int width) const {
  const int d = cfg_.frame_divisor();
  if (height <= 0 || width <= 0 || height % d != 0 || width % d != 0) {
    throw InvalidArgument("frame " + std::to_string(width) + "x" +
                          std::to_string(height) +
                          " must have both sides divisible by " + std::to_string(d));
  }
}

RecurrentState Model::initial_state(int batch, int height, int width) const {
  if (!cfg_.uses_recurrence()) return {};
  return RecurrentState::zeros(batch, cfg_.c3, height / cfg_.downsample_factor,
                               width / cfg_.downsample_factor);
}

EncodedFrame Model::encode_iframe(const Tensor& x, const nn::NormContext& norm) const {
  check_frame_size(x.shape().h, x.shape().w);
  return {iframe_encoder_(x, Tensor(), norm), Tensor()};
}

DecodedFrame Model::decode_iframe(const Tensor& zq, const nn::NormContext& norm) const {
  DecodedFrame out;
  out.recon = ops::clamp_straight_through(iframe_decoder_(zq, norm), 0.0, 1.0);
  return out;
}

EncodedFrame Model::encode_pframe(const Tensor& x, const Tensor& prev_recon,
                                  const Tensor& menet_reference,
                                  const RecurrentState& state,
                                  const nn::NormContext& norm) const {
  check_frame_size(x.shape().h, x.shape().w);
  if (prev_recon.shape() != x.shape()) {
    throw InvalidArgument("P-frame encoder: reference and frame shapes differ");
  }
  EncodedFrame out;
  Tensor input;
  if (cfg_.uses_menet()) {
    out.flow = menet_(x, menet_reference);
    input = ops::concat_channels({x, ops::warp(prev_recon, out.flow), out.flow});
  } else {
    input = ops::concat_channels({x, prev_recon});
  }
  const Tensor feedback = cfg_.uses_feedback() ? state.h : Tensor();
  out.y = pframe_encoder_(input, feedback, norm);
  return out;
}

DecodedFrame Model::decode_pframe(const Tensor& zq, const Tensor& prev_recon,
                                  const RecurrentState& state,
                                  const nn::NormContext& norm) const {
  PFrameDecoderOutput d = pframe_decoder_(zq, state, norm);
  if (d.flow.shape().h != prev_recon.shape().h || d.flow.shape().w != prev_recon.shape().w) {
    throw InvalidArgument("P-frame decoder output does not match the reference frame");
  }
  DecodedFrame out;
  out.recon = reconstruct(d.flow, prev_recon, d.residual);
  out.flow_hat = d.flow;
  out.residual = d.residual;
  out.state = d.state;
  return out;
}

void Model::canonicalize_codebook() {
  const std::vector<int> perm = codebook_.sorting_permutation();
  Tensor centers = codebook_.centers();
  const std::vector<double> old(centers.values().begin(), centers.values().end());
  for (std::size_t j = 0; j < perm.size(); ++j) centers.mutable_values()[j] = old[perm[j]];
  i_prior_.permute_levels(perm);
  p_prior_.permute_levels(perm);
}

namespace {

constexpr char kCheckpointMagic[4] = {'F', 'R', 'C', 'K'};
constexpr std::uint8_t kCheckpointVersion = 1;

nlohmann::json manifest(const Model& model) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& e : model.params().entries()) {
    const Shape s = e.tensor.shape();
    params.push_back({{"name", e.name}, {"shape", {s.n, s.c, s.h, s.w}}, {"trainable", e.trainable}});
  }
  return {{"config", model.config()},
          {"iteration", model.iteration},
          {"normalization", model.norm_frozen ? "frozen" : "batch_statistics"},
          {"params", params}};
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const std::string text = manifest(model).dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(kCheckpointMagic, 4);
  out.put(static_cast<char>(kCheckpointVersion));
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((len >> (8 * i)) & 0xFF));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : model.params().entries()) {
    // Doubles are stored in host byte order; all supported hosts are
    // little-endian.
    out.write(reinterpret_cast<const char*>(e.tensor.values().data()),
              static_cast<std::streamsize>(e.tensor.numel() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw ModelError("'" + path.string() + "' is not a checkpoint");
  }
  const int version = in.get();
  if (version != kCheckpointVersion) {
    throw ModelError("unsupported checkpoint version " + std::to_string(version));
  }
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(in.get() & 0xFF) << (8 * i);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw ModelError("truncated checkpoint manifest");
  nlohmann::json m;
  CodecConfig cfg;
  try {
    m = nlohmann::json::parse(text);
    cfg = m.at("config").get<CodecConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  auto model = std::make_unique<Model>(cfg, 0);
  model->iteration = m.value("iteration", 0L);
  model->norm_frozen = m.value("normalization", std::string()) == "frozen";
  const auto& entries = model->params().entries();
  const auto& listed = m.at("params");
  if (listed.size() != entries.size()) {
    throw ModelError("checkpoint lists " + std::to_string(listed.size()) +
                     " parameters, model has " + std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Shape s = entries[i].tensor.shape();
    const auto shape = listed[i].at("shape").get<std::vector<int>>();
    if (listed[i].at("name").get<std::string>() != entries[i].name ||
        shape != std::vector<int>{s.n, s.c, s.h, s.w}) {
      throw ModelError("checkpoint parameter " + std::to_string(i) + " does not match '" +
                       entries[i].name + "'");
    }
    Tensor t = entries[i].tensor;
    in.read(reinterpret_cast<char*>(t.mutable_values().data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!in) throw ModelError("truncated checkpoint data at '" + entries[i].name + "'");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ModelError("trailing bytes after checkpoint data");
  }
  return model;
}

std::string model_hash(const Model& model) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw ModelError("SHA-256 unavailable");
  }
  const std::string cfg = nlohmann::json(model.config()).dump();
  EVP_DigestUpdate(ctx.get(), cfg.data(), cfg.size());
  for (const auto& e : model.params().entries()) {
    EVP_DigestUpdate(ctx.get(), e.name.data(), e.name.size());
    EVP_DigestUpdate(ctx.get(), e.tensor.values().data(), e.tensor.numel() * sizeof(double));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &n);
  std::ostringstream hex;
  for (unsigned int i = 0; i < n; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

}  // namespace frae
