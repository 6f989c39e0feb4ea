#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "cratergan/common.hpp"
#include "cratergan/tiling.hpp"

namespace cratergan {

/// Unpaired translator hyperparameters. Images are handled internally in
/// [-1, 1] and exposed in [0, 1].
struct TranslatorConfig {
  int residual_blocks = 9;
  int gen_base_channels = 64;
  int disc_conv_layers = 3;
  int disc_base_channels = 64;
  double cycle_weight = 10.0;
  double identity_weight = 0.0;
  std::string adversarial_mode = "least-squares";
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  int batch_size = 1;
  int iterations = 200;
  std::uint64_t seed = 0;
  int pool_size = 50;  // 0 disables the generated-image history
  bool flip_augment = true;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints

  void validate() const;

  template <typename V>
  void visit(V&& v) {
    v("residual_blocks", residual_blocks);
    v("gen_base_channels", gen_base_channels);
    v("disc_conv_layers", disc_conv_layers);
    v("disc_base_channels", disc_base_channels);
    v("cycle_weight", cycle_weight);
    v("identity_weight", identity_weight);
    v("adversarial_mode", adversarial_mode);
    v("learning_rate", learning_rate);
    v("beta1", beta1);
    v("batch_size", batch_size);
    v("iterations", iterations);
    v("seed", seed);
    v("pool_size", pool_size);
    v("flip_augment", flip_augment);
    v("checkpoint_every", checkpoint_every);
  }
};

/// ResNet-style generator: 7x7 stem, two stride-2 downsampling convs,
/// residual blocks at 4x base channels, two transposed-conv upsamplers,
/// 7x7 head and tanh. Instance normalisation throughout.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const TranslatorConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x);

  /// Final 7x7 convolution (exposed for probing).
  torch::nn::Conv2d head{nullptr};

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(Generator);

/// Patch discriminator: disc_conv_layers stride-2 4x4 convs (ReLU between
/// them), then a stride-1 4x4 conv producing one score per patch.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const TranslatorConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x);
  /// Output of the stride-2 trunk, before the scoring head.
  torch::Tensor features(const torch::Tensor& x);

 private:
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Discriminator);

/// Mean absolute difference over all elements.
torch::Tensor cycle_loss(const torch::Tensor& x, const torch::Tensor& x_rec);

struct TranslatorLossRow {
  int iteration = 0;
  double loss_g = 0.0;    // adversarial, sim -> real generator
  double loss_f = 0.0;    // adversarial, real -> sim generator
  double loss_d_r = 0.0;
  double loss_d_s = 0.0;
  double loss_cyc = 0.0;  // unweighted sum of both cycle terms

  friend bool operator==(const TranslatorLossRow&, const TranslatorLossRow&) = default;
};

struct TranslatorState {
  explicit TranslatorState(const TranslatorConfig& cfg);

  TranslatorConfig config;
  Generator sim_to_real{nullptr};
  Generator real_to_sim{nullptr};
  Discriminator disc_real{nullptr};
  Discriminator disc_sim{nullptr};
  std::unique_ptr<torch::optim::Adam> gen_optimizer;
  std::unique_ptr<torch::optim::Adam> disc_optimizer;
  int iteration = 0;
  std::vector<TranslatorLossRow> history;
};

struct TranslatorHooks {
  std::function<void(const TranslatorState&)> on_checkpoint;
  std::function<void(const TranslatorLossRow&)> on_iteration;
};

/// Alternating generator / discriminator updates with least-squares
/// adversarial terms plus weighted cycle (and optional identity) losses.
/// Throws ConfigError on empty or inconsistent datasets and RuntimeFailure
/// on a non-finite loss.
std::unique_ptr<TranslatorState> train_translator(std::span<const Image> sim,
                                                  std::span<const Image> real,
                                                  const TranslatorConfig& cfg,
                                                  const TranslatorHooks& hooks = {});

/// Applies the sim -> real generator. Metadata is preserved and provenance
/// becomes "translated". Tile sides must be divisible by 4.
Tile translate(TranslatorState& state, const Tile& tile);
std::vector<Tile> translate_batch(TranslatorState& state, std::span<const Tile> tiles);

void save_translator(const TranslatorState& state, const std::filesystem::path& path);
std::unique_ptr<TranslatorState> load_translator(const std::filesystem::path& path);

/// iteration,loss_G,loss_F,loss_D_R,loss_D_S,loss_cyc
void write_translator_history(const std::filesystem::path& path,
                              std::span<const TranslatorLossRow> rows);

}  // namespace cratergan
