#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "cratergan/evalmetrics.hpp"
#include "cratergan/masks.hpp"
#include "cratergan/tiling.hpp"

namespace cratergan {

struct SegmenterConfig {
  int down_blocks = 4;
  int up_blocks = 4;
  int base_channels = 64;
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  std::string normalisation = "instance";
  int epochs = 30;
  int batch_size = 15;
  double learning_rate = 1e-4;
  std::string loss = "bce";
  double threshold = 0.5;
  std::uint64_t seed = 0;
  bool flip_augment = true;

  void validate() const;

  template <typename V>
  void visit(V&& v) {
    v("down_blocks", down_blocks);
    v("up_blocks", up_blocks);
    v("base_channels", base_channels);
    v("kernel", kernel);
    v("stride", stride);
    v("padding", padding);
    v("normalisation", normalisation);
    v("epochs", epochs);
    v("batch_size", batch_size);
    v("learning_rate", learning_rate);
    v("loss", loss);
    v("threshold", threshold);
    v("seed", seed);
    v("flip_augment", flip_augment);
  }
};

/// Shape of one stage's output, for the architecture ledger.
struct StageShape {
  std::string name;
  std::int64_t channels = 0;
  std::int64_t side = 0;

  friend bool operator==(const StageShape&, const StageShape&) = default;
};

/// Expected per-stage output shapes for a square input of side `side`.
std::vector<StageShape> unet_architecture(const SegmenterConfig& cfg, std::int64_t side);

/// Encoder stages of [3x3 conv, instance norm, ReLU] followed by 2x max
/// pooling, a bottleneck conv, and decoder stages of [2x transposed conv,
/// skip concatenation, 3x3 conv, instance norm, ReLU]; 1x1 conv head.
class UNetImpl : public torch::nn::Module {
 public:
  explicit UNetImpl(const SegmenterConfig& cfg);

  torch::Tensor forward_logits(const torch::Tensor& x);
  /// Sigmoid probabilities.
  torch::Tensor forward(const torch::Tensor& x) { return torch::sigmoid(forward_logits(x)); }

  /// Runs a forward pass and records every stage's output shape.
  std::vector<StageShape> trace(const torch::Tensor& x);

  torch::nn::Sequential bottleneck{nullptr};

 private:
  torch::Tensor run(const torch::Tensor& x, std::vector<StageShape>* shapes);

  int down_blocks_;
  std::vector<torch::nn::Sequential> down_;
  std::vector<torch::nn::ConvTranspose2d> up_sample_;
  std::vector<torch::nn::Sequential> up_conv_;
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(UNet);

/// A tile and its mask, checked for matching dimensions.
struct Sample {
  Tile tile;
  BinaryMask mask;
};

/// Throws ConfigError when tile and mask dimensions differ.
Sample make_sample(Tile tile, BinaryMask mask);

struct SegmenterEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;

  friend bool operator==(const SegmenterEpoch&, const SegmenterEpoch&) = default;
};

struct SegmenterState {
  explicit SegmenterState(const SegmenterConfig& cfg);

  SegmenterConfig config;
  UNet net{nullptr};
  std::unique_ptr<torch::optim::Adam> optimizer;
  int epoch = 0;
  std::vector<SegmenterEpoch> history;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<torch::Tensor> best_parameters;

  /// Loads the parameters recorded at the best validation epoch.
  void restore_best();
};

struct SegmenterHooks {
  std::function<void(const SegmenterEpoch&)> on_epoch;
};

/// One optimizer step on a batch, with optional per-sample (x, y) flips
/// applied to tile and mask alike; returns the loss before the step.
double segmenter_step(SegmenterState& state, std::span<const Sample* const> batch,
                      const std::vector<std::pair<bool, bool>>& flips = {});

/// Mean binary cross-entropy over samples, in evaluation mode.
double segmenter_loss(SegmenterState& state, std::span<const Sample> samples);

/// Trains cfg.epochs epochs of shuffled mini-batches with flip augmentation.
/// Records train/val loss per epoch and keeps the best-validation weights.
std::unique_ptr<SegmenterState> train_segmenter(std::span<const Sample> train,
                                                std::span<const Sample> val,
                                                const SegmenterConfig& cfg,
                                                const SegmenterHooks& hooks = {});

struct Prediction {
  Image probability;
  BinaryMask mask;
};

/// Probability map and thresholded mask (probability >= threshold).
Prediction predict_mask(SegmenterState& state, const Tile& tile);
Prediction predict_mask(SegmenterState& state, const Tile& tile, double threshold);

/// Thresholds a probability map.
Grid<std::uint8_t> threshold_map(const Image& probability, double threshold);

/// Per-image metrics over a dataset, averaged without weighting.
MetricsReport evaluate(SegmenterState& state, std::span<const Sample> samples, double threshold,
                       ZeroDivision policy = ZeroDivision::kOne,
                       const std::string& dataset_id = {}, const std::string& model_id = {});

void save_segmenter(const SegmenterState& state, const std::filesystem::path& path);
std::unique_ptr<SegmenterState> load_segmenter(const std::filesystem::path& path);

/// epoch,train_loss,val_loss
void write_segmenter_history(const std::filesystem::path& path,
                             std::span<const SegmenterEpoch> rows);

}  // namespace cratergan
