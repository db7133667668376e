#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "frae/metrics.hpp"
#include "frae/model.hpp"

namespace frae {

/// The five operating points of the rate-distortion sweep.
inline constexpr std::array<double, 5> kBetaSweep{0.025, 0.05, 0.1, 0.2, 0.3};

struct TrainingConfig {
  double beta = 0.1;
  int gop_size = 8;
  int batch_size = 16;
  long total_iters = 250000;
  long flow_loss_until = 20000;
  long reference_switch_at = 15000;
  long norm_freeze_at = 40000;
  double lr = 1e-4;
  double lr_decay = 0.8;
  long lr_decay_every = 100000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int crop_size = 256;
  long checkpoint_every = 10000;
  std::uint64_t seed = 1;
  /// Distortion metric used inside the loss.
  MsSsimConfig metric = MsSsimConfig::truncated(5, Padding::kReplicate);

  /// Throws InvalidArgument unless reference_switch_at <= flow_loss_until
  /// <= total_iters and every count is in range.
  void validate() const;
};

double lr_at(long iteration, const TrainingConfig& cfg);
bool flow_losses_active(long iteration, const TrainingConfig& cfg);

struct LossBreakdown {
  double distortion = 0.0;  // frame-averaged 1 - MS-SSIM
  double rate = 0.0;        // bits per pixel (soft cross-entropy in training)
  double l_fe = 0.0;
  double l_fd = 0.0;
  double total = 0.0;
  bool flow_active = false;
  double hard_bpp = 0.0;    // -log2 P of the hard latents, for monitoring
};

/// total = distortion + beta * rate (+ l_fe + l_fd when `flow_active`).
double compose_total(const LossBreakdown& parts, double beta);

/// Mean over frames of (1 - MS-SSIM) plus beta times the rate in bpp.
double rd_loss(std::span<const Frame> recons, std::span<const Frame> inputs,
               double rate_bpp, double beta, const MsSsimConfig& metric);

/// Index of the smallest validation loss; ties go to the earliest entry.
std::size_t select_checkpoint(std::span<const double> validation_history);

/// One clip of exactly gop_size frames.
using TrainingGop = std::vector<Frame>;

/// Unrolled closed-loop forward pass over a batch of GoPs with the
/// schedules of `iteration` applied.
struct TrainingForward {
  Tensor total;        // scalar with autograd history
  Tensor distortion;   // scalar
  Tensor rate;         // scalar, bpp
  Tensor l_fe;         // scalar or undefined
  Tensor l_fd;
  Tensor p_distortion; // P-frames only
  LossBreakdown parts;
  std::vector<Tensor> recons;  // per time step, (n,3,H,W)
  std::vector<Tensor> latents; // per time step, continuous encoder output
};

TrainingForward training_forward(const Model& model,
                                 std::span<const TrainingGop> batch,
                                 long iteration, const TrainingConfig& cfg);

class Trainer {
 public:
  Trainer(Model& model, const TrainingConfig& cfg);

  /// One optimizer update at `model.iteration`, which is then advanced.
  /// Throws NumericError naming the offending batch item on a NaN loss.
  LossBreakdown step(std::span<const TrainingGop> batch);

  /// Closed-loop evaluation with hard quantization and running statistics;
  /// the rate is the hard cross-entropy in bpp.
  LossBreakdown evaluate(std::span<const TrainingGop> gops) const;

  const TrainingConfig& config() const { return cfg_; }
  Model& model() { return model_; }

 private:
  Model& model_;
  TrainingConfig cfg_;
  nn::Adam optimizer_;
};

struct TrainingData {
  std::vector<TrainingGop> train;
  std::vector<TrainingGop> validation;
};

/// Full training run writing into `run_dir`: config.json (echo),
/// metrics.csv, checkpoint-<iter>.frck every checkpoint_every iterations
/// and at each epoch end, validation.csv and a `best` file naming the
/// selected checkpoint. Batches are drawn from one generator seeded by
/// cfg.seed.
void run_training(Model& model, const TrainingConfig& cfg,
                  const TrainingData& data, const std::filesystem::path& run_dir,
                  std::ostream* progress = nullptr);

/// Header and row format of metrics.csv.
inline constexpr const char* kMetricsHeader =
    "iteration,lr,distortion,rate_bpp,l_fe,l_fd,total";
std::string metrics_row(long iteration, double lr, const LossBreakdown& b);

}  // namespace frae
