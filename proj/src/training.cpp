#include "frae/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

#include "frae/codec.hpp"
#include "frae/error.hpp"
#include "frae/motion.hpp"
#include "frae/prior.hpp"

namespace frae {

void TrainingConfig::validate() const {
  auto fail = [](const std::string& m) { throw InvalidArgument("training config: " + m); };
  if (!(beta >= 0.0) || !std::isfinite(beta)) fail("beta must be a finite non-negative number");
  if (gop_size < 1 || gop_size > 255) fail("gop_size must be in [1, 255]");
  if (batch_size < 1) fail("batch_size must be positive");
  if (total_iters < 0 || flow_loss_until < 0 || reference_switch_at < 0 || norm_freeze_at < 0) {
    fail("iteration counts must be non-negative");
  }
  if (reference_switch_at > flow_loss_until || flow_loss_until > total_iters) {
    fail("require reference_switch_at <= flow_loss_until <= total_iters");
  }
  if (!(lr > 0.0) || !(lr_decay > 0.0) || lr_decay_every < 1) fail("invalid learning-rate schedule");
  if (crop_size < 1) fail("crop_size must be positive");
  if (checkpoint_every < 1) fail("checkpoint_every must be positive");
  metric.validate();
}

double lr_at(long iteration, const TrainingConfig& cfg) {
  if (iteration < 0) throw InvalidArgument("lr_at: negative iteration");
  return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(iteration / cfg.lr_decay_every));
}

bool flow_losses_active(long iteration, const TrainingConfig& cfg) {
  return iteration < cfg.flow_loss_until;
}

double compose_total(const LossBreakdown& p, double beta) {
  double total = p.distortion + beta * p.rate;
  if (p.flow_active) total += p.l_fe + p.l_fd;
  return total;
}

double rd_loss(std::span<const Frame> recons, std::span<const Frame> inputs,
               double rate_bpp, double beta, const MsSsimConfig& metric) {
  if (recons.size() != inputs.size() || recons.empty()) {
    throw InvalidArgument("rd_loss: reconstructions and inputs must align");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < recons.size(); ++i) {
    d += 1.0 - ms_ssim(inputs[i], recons[i], metric).value;
  }
  return d / static_cast<double>(recons.size()) + beta * rate_bpp;
}

std::size_t select_checkpoint(std::span<const double> history) {
  if (history.empty()) throw InvalidArgument("select_checkpoint: empty validation history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] < history[best]) best = i;
  }
  return best;
}

namespace {

void check_batch(std::span<const TrainingGop> batch, int gop_size) {
  if (batch.empty()) throw InvalidArgument("training batch is empty");
  for (const TrainingGop& g : batch) {
    if (static_cast<int>(g.size()) != gop_size) {
      throw InvalidArgument("training GoPs must have exactly " + std::to_string(gop_size) +
                            " frames");
    }
  }
}

Tensor stack_step(std::span<const TrainingGop> batch, std::size_t t) {
  std::vector<Frame> frames;
  frames.reserve(batch.size());
  for (const TrainingGop& g : batch) frames.push_back(g[t]);
  return to_batch<3, FrameTag>(frames);
}

// Hard -log2 P of the nearest-center latents, summed over the batch.
double hard_bits(const Tensor& y, const Tensor& log_p, const Tensor& centers) {
  const Shape s = y.shape();
  const int levels = centers.shape().c;
  const std::size_t plane = s.plane();
  double bits = 0.0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        const double v = y.values()[(static_cast<std::size_t>(n) * s.c + c) * plane + p];
        const int j = ops::nearest_center(v, centers.values().data(), levels);
        bits -= log_p.values()[((static_cast<std::size_t>(n) * s.c + c) * levels + j) * plane + p] /
                std::log(2.0);
      }
    }
  }
  return bits;
}

long first_bad_item(const std::vector<Tensor>& per_item) {
  for (const Tensor& t : per_item) {
    const Shape s = t.shape();
    const std::size_t item = t.numel() / static_cast<std::size_t>(s.n);
    for (int n = 0; n < s.n; ++n) {
      for (std::size_t i = 0; i < item; ++i) {
        if (!std::isfinite(t.values()[n * item + i])) return n;
      }
    }
  }
  return -1;
}

}  // namespace

TrainingForward training_forward(const Model& model, std::span<const TrainingGop> batch,
                                 long iteration, const TrainingConfig& cfg) {
  check_batch(batch, cfg.gop_size);
  const CodecConfig& mc = model.config();
  const NormMode mode = set_normalization_mode(iteration, cfg.norm_freeze_at);
  const nn::NormContext norm{true, mode.use_batch_stats};
  const bool flow_active = mc.uses_menet() && flow_losses_active(iteration, cfg);
  const Tensor& centers = model.codebook().centers();
  const int n = static_cast<int>(batch.size());

  TrainingForward out;
  out.parts.flow_active = flow_active;
  std::vector<Tensor> distortions, rates, fe, fd, p_dist;
  std::vector<Tensor> per_item;
  double hard = 0.0;
  Tensor prev_x, prev_recon;
  RecurrentState state;
  double pixels = 0.0;
  for (int t = 0; t < cfg.gop_size; ++t) {
    const Tensor x = stack_step(batch, t);
    if (t == 0) {
      pixels = static_cast<double>(x.shape().h) * x.shape().w;
      state = model.initial_state(n, x.shape().h, x.shape().w);
    }
    const FrameType type = t == 0 ? FrameType::kI : FrameType::kP;
    EncodedFrame enc;
    if (t == 0) {
      enc = model.encode_iframe(x, norm);
    } else {
      const Tensor& menet_ref =
          select_reference(iteration, prev_x, prev_recon, cfg.reference_switch_at);
      enc = model.encode_pframe(x, prev_recon, menet_ref, state, norm);
    }
    const Tensor soft = ops::soft_assignment(enc.y, centers, mc.softmax_sigma);
    const Tensor yq = ops::quantize_straight_through(enc.y, centers, mc.softmax_sigma);
    const Tensor log_p = model.prior(type).log_probs(yq);
    rates.push_back(rate_loss(soft, log_p, pixels));
    hard += hard_bits(enc.y, log_p, centers);

    DecodedFrame dec = t == 0 ? model.decode_iframe(yq, norm)
                              : model.decode_pframe(yq, prev_recon, state, norm);
    const Tensor score = ms_ssim(x, dec.recon, cfg.metric);
    per_item.push_back(score);
    const Tensor d = ops::rsub_scalar(1.0, ops::mean(score));
    distortions.push_back(d);
    if (t > 0) {
      p_dist.push_back(d);
      if (flow_active) {
        const Tensor& target =
            select_reference(iteration, prev_x, prev_recon, cfg.reference_switch_at);
        const FlowLosses fl = flow_losses(x, target, enc.flow, dec.flow_hat, cfg.metric);
        fe.push_back(fl.l_fe);
        fd.push_back(fl.l_fd);
      }
      state = dec.state;
    }
    out.recons.push_back(dec.recon);
    out.latents.push_back(enc.y);
    prev_x = x;
    prev_recon = dec.recon;
  }

  auto average = [](const std::vector<Tensor>& v) {
    Tensor acc = v.front();
    for (std::size_t i = 1; i < v.size(); ++i) acc = ops::add(acc, v[i]);
    return ops::mul_scalar(acc, 1.0 / static_cast<double>(v.size()));
  };
  out.distortion = average(distortions);
  out.rate = average(rates);
  out.total = ops::add(out.distortion, ops::mul_scalar(out.rate, cfg.beta));
  if (!p_dist.empty()) out.p_distortion = average(p_dist);
  if (flow_active && !fe.empty()) {
    out.l_fe = average(fe);
    out.l_fd = average(fd);
    out.total = ops::add(out.total, ops::add(out.l_fe, out.l_fd));
  }

  LossBreakdown& b = out.parts;
  b.distortion = out.distortion.item();
  b.rate = out.rate.item();
  b.l_fe = out.l_fe.defined() ? out.l_fe.item() : 0.0;
  b.l_fd = out.l_fd.defined() ? out.l_fd.item() : 0.0;
  b.total = out.total.item();
  b.hard_bpp = hard / (pixels * n * cfg.gop_size);
  if (!std::isfinite(b.total)) {
    std::vector<Tensor> inputs;
    for (int t = 0; t < cfg.gop_size; ++t) inputs.push_back(stack_step(batch, t));
    long bad = first_bad_item(inputs);
    if (bad < 0) bad = first_bad_item(out.latents);
    if (bad < 0) bad = first_bad_item(out.recons);
    if (bad < 0) bad = first_bad_item(per_item);
    throw NumericError(bad, "non-finite training loss at iteration " + std::to_string(iteration) +
                                (bad >= 0 ? " (batch item " + std::to_string(bad) + ")" : ""));
  }
  return out;
}

Trainer::Trainer(Model& model, const TrainingConfig& cfg)
    : model_(model), cfg_(cfg),
      optimizer_(model.params().trainable(), cfg.adam_beta1, cfg.adam_beta2) {
  cfg_.validate();
}

LossBreakdown Trainer::step(std::span<const TrainingGop> batch) {
  const long it = model_.iteration;
  optimizer_.zero_grad();
  TrainingForward fwd = training_forward(model_, batch, it, cfg_);
  fwd.total.backward();
  optimizer_.step(lr_at(it, cfg_));
  model_.iteration = it + 1;
  model_.norm_frozen = !set_normalization_mode(model_.iteration, cfg_.norm_freeze_at).use_batch_stats;
  return fwd.parts;
}

LossBreakdown Trainer::evaluate(std::span<const TrainingGop> gops) const {
  if (gops.empty()) throw InvalidArgument("evaluate: no GoPs");
  NoGradGuard guard;
  const nn::NormContext norm = inference_norm();
  const Codebook& codebook = model_.codebook();
  LossBreakdown total;
  double frames = 0.0;
  double bits = 0.0;
  double pixels = 0.0;
  for (const TrainingGop& gop : gops) {
    Tensor prev;
    RecurrentState state = model_.initial_state(1, gop.front().height(), gop.front().width());
    for (std::size_t t = 0; t < gop.size(); ++t) {
      const Tensor x = to_tensor(gop[t]);
      const FrameType type = t == 0 ? FrameType::kI : FrameType::kP;
      const EncodedFrame enc = t == 0 ? model_.encode_iframe(x, norm)
                                      : model_.encode_pframe(x, prev, prev, state, norm);
      const LatentGrid z = codebook.quantize(enc.y);
      bits += frame_rate(z, model_.prior(type), codebook).total_bits;
      DecodedFrame dec = t == 0 ? model_.decode_iframe(codebook.dequantize(z), norm)
                                : model_.decode_pframe(codebook.dequantize(z), prev, state, norm);
      if (t > 0) state = dec.state;
      prev = dec.recon;
      total.distortion += 1.0 - ms_ssim(x, dec.recon, cfg_.metric).item();
      frames += 1.0;
      pixels += static_cast<double>(gop[t].height()) * gop[t].width();
    }
  }
  total.distortion /= frames;
  total.rate = bits / pixels;
  total.hard_bpp = total.rate;
  total.total = compose_total(total, cfg_.beta);
  return total;
}

std::string metrics_row(long iteration, double lr, const LossBreakdown& b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%ld,%.9g,%.17g,%.17g,%.17g,%.17g,%.17g", iteration, lr,
                b.distortion, b.rate, b.l_fe, b.l_fd, b.total);
  return buf;
}

namespace {

nlohmann::json config_echo(const Model& model, const TrainingConfig& c) {
  nlohmann::json metric = {{"window_size", c.metric.window_size},
                           {"sigma", c.metric.sigma},
                           {"weights", c.metric.weights},
                           {"padding", std::string(to_string(c.metric.padding))},
                           {"k1", c.metric.k1},
                           {"k2", c.metric.k2}};
  return {{"codec", model.config()},
          {"training",
           {{"beta", c.beta},
            {"gop_size", c.gop_size},
            {"batch_size", c.batch_size},
            {"total_iters", c.total_iters},
            {"flow_loss_until", c.flow_loss_until},
            {"reference_switch_at", c.reference_switch_at},
            {"norm_freeze_at", c.norm_freeze_at},
            {"lr", c.lr},
            {"lr_decay", c.lr_decay},
            {"lr_decay_every", c.lr_decay_every},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"crop_size", c.crop_size},
            {"checkpoint_every", c.checkpoint_every},
            {"seed", c.seed},
            {"metric", metric}}}};
}

}  // namespace

void run_training(Model& model, const TrainingConfig& cfg, const TrainingData& data,
                  const std::filesystem::path& run_dir, std::ostream* progress) {
  cfg.validate();
  if (data.train.empty()) throw InvalidArgument("no training clips");
  std::filesystem::create_directories(run_dir);
  {
    std::ofstream echo(run_dir / "config.json");
    echo << config_echo(model, cfg).dump(2) << "\n";
    if (!echo) throw IoError("cannot write config echo in '" + run_dir.string() + "'");
  }
  std::ofstream metrics(run_dir / "metrics.csv");
  std::ofstream validation(run_dir / "validation.csv");
  if (!metrics || !validation) throw IoError("cannot create logs in '" + run_dir.string() + "'");
  metrics << kMetricsHeader << "\n";
  validation << "epoch,iteration,checkpoint,distortion,rate_bpp,total\n";

  Trainer trainer(model, cfg);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.train.size() - 1);
  const long epoch_len = std::max<long>(
      1, static_cast<long>((data.train.size() + cfg.batch_size - 1) / cfg.batch_size));
  std::vector<double> history;
  std::vector<std::string> names;
  auto checkpoint_name = [](long it) { return "checkpoint-" + std::to_string(it) + ".frck"; };

  while (model.iteration < cfg.total_iters) {
    std::vector<TrainingGop> batch;
    for (int i = 0; i < cfg.batch_size; ++i) batch.push_back(data.train[pick(rng)]);
    const long it = model.iteration;
    const LossBreakdown b = trainer.step(batch);
    metrics << metrics_row(it, lr_at(it, cfg), b) << "\n";
    metrics.flush();
    if (progress && (it % 10 == 0 || model.iteration == cfg.total_iters)) {
      *progress << "iter " << it << " total " << b.total << " distortion " << b.distortion
                << " bpp " << b.rate << "\n";
    }
    const bool epoch_end = model.iteration % epoch_len == 0 || model.iteration == cfg.total_iters;
    if (model.iteration % cfg.checkpoint_every == 0 || epoch_end) {
      save_checkpoint(model, run_dir / checkpoint_name(model.iteration));
    }
    if (epoch_end) {
      const std::vector<TrainingGop>& val = data.validation.empty() ? data.train : data.validation;
      const LossBreakdown v = trainer.evaluate(val);
      history.push_back(v.total);
      names.push_back(checkpoint_name(model.iteration));
      validation << history.size() - 1 << "," << model.iteration << "," << names.back() << ","
                 << v.distortion << "," << v.rate << "," << v.total << "\n";
      validation.flush();
      std::ofstream best(run_dir / "best");
      best << names[select_checkpoint(history)] << "\n";
    }
  }
}

}  // namespace frae
