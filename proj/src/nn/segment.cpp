#include "cratergan/segment.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "cratergan/config.hpp"
#include "nn/tensor_util.hpp"

namespace cratergan {
namespace {

namespace tnn = torch::nn;

constexpr const char* kConfigSection = "segmenter";
constexpr std::size_t kInferenceChunk = 8;

tnn::Sequential conv_block(const SegmenterConfig& cfg, std::int64_t in, std::int64_t out) {
  return tnn::Sequential(
      tnn::Conv2d(tnn::Conv2dOptions(in, out, cfg.kernel).stride(cfg.stride).padding(cfg.padding)),
      tnn::InstanceNorm2d(tnn::InstanceNorm2dOptions(out).affine(true)), tnn::ReLU());
}

std::int64_t stage_channels(const SegmenterConfig& cfg, int level) {
  return static_cast<std::int64_t>(cfg.base_channels) << level;
}

torch::Tensor predict_batch(SegmenterState& state, std::span<const Tile* const> tiles) {
  std::vector<const Image*> images;
  for (const auto* t : tiles) images.push_back(&t->pixels);
  return state.net->forward(nn::images_to_tensor(images));
}

}  // namespace

void SegmenterConfig::validate() const {
  if (down_blocks < 1) throw ConfigError("segmenter.down_blocks must be >= 1");
  if (down_blocks != up_blocks) throw ConfigError("segmenter.down_blocks must equal up_blocks");
  if (base_channels < 1) throw ConfigError("segmenter.base_channels must be >= 1");
  if (kernel < 1 || kernel % 2 == 0 || stride != 1 || 2 * padding != kernel - 1) {
    throw ConfigError("segmenter convs must be size-preserving (odd kernel, stride 1, "
                      "padding = (kernel - 1) / 2)");
  }
  if (normalisation != "instance") throw ConfigError("segmenter.normalisation must be 'instance'");
  if (loss != "bce") throw ConfigError("segmenter.loss must be 'bce'");
  if (epochs < 0) throw ConfigError("segmenter.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("segmenter.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("segmenter.learning_rate must be > 0");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("segmenter.threshold must be in (0, 1)");
}

std::vector<StageShape> unet_architecture(const SegmenterConfig& cfg, std::int64_t side) {
  std::vector<StageShape> shapes;
  for (int i = 0; i < cfg.down_blocks; ++i) {
    shapes.push_back({"down" + std::to_string(i), stage_channels(cfg, i), side >> i});
  }
  shapes.push_back({"bottleneck", stage_channels(cfg, cfg.down_blocks), side >> cfg.down_blocks});
  for (int i = cfg.down_blocks - 1; i >= 0; --i) {
    shapes.push_back({"up" + std::to_string(i), stage_channels(cfg, i), side >> i});
  }
  shapes.push_back({"head", 1, side});
  return shapes;
}

UNetImpl::UNetImpl(const SegmenterConfig& cfg) : down_blocks_(cfg.down_blocks) {
  cfg.validate();
  std::int64_t in = 1;
  for (int i = 0; i < cfg.down_blocks; ++i) {
    down_.push_back(register_module("down" + std::to_string(i),
                                    conv_block(cfg, in, stage_channels(cfg, i))));
    in = stage_channels(cfg, i);
  }
  bottleneck = register_module("bottleneck",
                               conv_block(cfg, in, stage_channels(cfg, cfg.down_blocks)));
  for (int i = cfg.down_blocks - 1; i >= 0; --i) {
    const auto c = stage_channels(cfg, i);
    up_sample_.push_back(register_module(
        "upsample" + std::to_string(i),
        tnn::ConvTranspose2d(tnn::ConvTranspose2dOptions(2 * c, c, 2).stride(2))));
    up_conv_.push_back(register_module("up" + std::to_string(i), conv_block(cfg, 2 * c, c)));
  }
  head_ = register_module("head", tnn::Conv2d(tnn::Conv2dOptions(stage_channels(cfg, 0), 1, 1)));
}

torch::Tensor UNetImpl::run(const torch::Tensor& x, std::vector<StageShape>* shapes) {
  const std::int64_t factor = std::int64_t{1} << down_blocks_;
  if (x.dim() != 4 || x.size(1) != 1) throw ConfigError("U-Net expects (batch, 1, H, W) input");
  if (x.size(2) % factor != 0 || x.size(3) % factor != 0) {
    throw ConfigError("U-Net input side must be divisible by " + std::to_string(factor) +
                      ", got " + std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)));
  }
  auto record = [&](const std::string& name, const torch::Tensor& t) {
    if (shapes) shapes->push_back({name, t.size(1), t.size(2)});
  };

  std::vector<torch::Tensor> skips;
  auto h = x;
  for (int i = 0; i < down_blocks_; ++i) {
    h = down_[i]->forward(h);
    record("down" + std::to_string(i), h);
    skips.push_back(h);
    h = torch::max_pool2d(h, 2);
  }
  h = bottleneck->forward(h);
  record("bottleneck", h);
  for (int k = 0; k < down_blocks_; ++k) {
    const int level = down_blocks_ - 1 - k;
    h = up_sample_[k]->forward(h);
    h = torch::cat({skips[level], h}, 1);
    h = up_conv_[k]->forward(h);
    record("up" + std::to_string(level), h);
  }
  h = head_->forward(h);
  record("head", h);
  return h;
}

torch::Tensor UNetImpl::forward_logits(const torch::Tensor& x) { return run(x, nullptr); }

std::vector<StageShape> UNetImpl::trace(const torch::Tensor& x) {
  std::vector<StageShape> shapes;
  torch::NoGradGuard no_grad;
  run(x, &shapes);
  return shapes;
}

Sample make_sample(Tile tile, BinaryMask mask) {
  if (!mask.pixels.same_shape(tile.pixels.width, tile.pixels.height)) {
    throw ConfigError("sample '" + tile.tile_id + "': tile and mask dimensions differ");
  }
  return {std::move(tile), std::move(mask)};
}

SegmenterState::SegmenterState(const SegmenterConfig& cfg) : config(cfg) {
  config.validate();
  torch::manual_seed(cfg.seed);
  net = UNet(cfg);
  optimizer = std::make_unique<torch::optim::Adam>(net->parameters(),
                                                   torch::optim::AdamOptions(cfg.learning_rate));
}

void SegmenterState::restore_best() {
  if (best_parameters.empty()) return;
  torch::NoGradGuard no_grad;
  auto params = net->parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].copy_(best_parameters[i]);
}

double segmenter_step(SegmenterState& state, std::span<const Sample* const> batch,
                      const std::vector<std::pair<bool, bool>>& flips) {
  std::vector<const Image*> images;
  std::vector<const Grid<std::uint8_t>*> masks;
  for (const auto* s : batch) {
    images.push_back(&s->tile.pixels);
    masks.push_back(&s->mask.pixels);
  }
  auto x = nn::images_to_tensor(images);
  auto y = nn::masks_to_tensor(masks);
  if (!flips.empty()) {
    x = nn::apply_flips(x, flips);
    y = nn::apply_flips(y, flips);
  }
  state.net->train();
  state.optimizer->zero_grad();
  auto loss = torch::binary_cross_entropy_with_logits(state.net->forward_logits(x), y);
  const double value = loss.item<double>();
  if (!std::isfinite(value)) {
    throw RuntimeFailure("segmenter training diverged at epoch " + std::to_string(state.epoch + 1) +
                         ": non-finite loss");
  }
  loss.backward();
  state.optimizer->step();
  return value;
}

double segmenter_loss(SegmenterState& state, std::span<const Sample> samples) {
  if (samples.empty()) throw ConfigError("segmenter_loss: empty dataset");
  torch::NoGradGuard no_grad;
  state.net->eval();
  double total = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += kInferenceChunk) {
    const std::size_t n = std::min(kInferenceChunk, samples.size() - start);
    std::vector<const Image*> images;
    std::vector<const Grid<std::uint8_t>*> masks;
    for (std::size_t i = 0; i < n; ++i) {
      images.push_back(&samples[start + i].tile.pixels);
      masks.push_back(&samples[start + i].mask.pixels);
    }
    auto logits = state.net->forward_logits(nn::images_to_tensor(images));
    auto per_sample = torch::binary_cross_entropy_with_logits(
                          logits, nn::masks_to_tensor(masks), {}, {}, at::Reduction::None)
                          .mean({1, 2, 3});
    total += per_sample.sum().item<double>();
  }
  state.net->train();
  return total / static_cast<double>(samples.size());
}

std::unique_ptr<SegmenterState> train_segmenter(std::span<const Sample> train,
                                                std::span<const Sample> val,
                                                const SegmenterConfig& cfg,
                                                const SegmenterHooks& hooks) {
  if (train.empty() || val.empty()) throw ConfigError("train_segmenter: empty dataset");
  for (const auto* set : {&train, &val}) {
    for (const auto& s : *set) {
      if (!s.mask.pixels.same_shape(s.tile.pixels.width, s.tile.pixels.height)) {
        throw ConfigError("sample '" + s.tile.tile_id + "': tile and mask dimensions differ");
      }
    }
  }
  auto state = std::make_unique<SegmenterState>(cfg);
  Rng rng(Rng::mix(cfg.seed ^ 0x5E6A7E57ULL));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int e = 1; e <= cfg.epochs; ++e) {
    shuffle(order, rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      std::vector<const Sample*> batch;
      std::vector<std::pair<bool, bool>> flips;
      for (std::size_t i = 0; i < n; ++i) {
        batch.push_back(&train[order[start + i]]);
        const bool fx = cfg.flip_augment && rng.uniform() < 0.5;
        const bool fy = cfg.flip_augment && rng.uniform() < 0.5;
        flips.emplace_back(fx, fy);
      }
      weighted += segmenter_step(*state, batch, flips) * static_cast<double>(n);
    }
    state->epoch = e;
    SegmenterEpoch row{e, weighted / static_cast<double>(train.size()), segmenter_loss(*state, val)};
    if (!std::isfinite(row.val_loss)) {
      throw RuntimeFailure("segmenter validation loss is non-finite at epoch " + std::to_string(e));
    }
    if (state->best_parameters.empty() || row.val_loss < state->best_val_loss) {
      state->best_epoch = e;
      state->best_val_loss = row.val_loss;
      state->best_parameters.clear();
      for (const auto& p : state->net->parameters()) {
        state->best_parameters.push_back(p.detach().clone());
      }
    }
    state->history.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row);
  }
  return state;
}

Grid<std::uint8_t> threshold_map(const Image& probability, double threshold) {
  Grid<std::uint8_t> mask(probability.width, probability.height, 0);
  for (std::size_t i = 0; i < probability.size(); ++i) {
    mask.data[i] = probability.data[i] >= threshold ? 1 : 0;
  }
  return mask;
}

Prediction predict_mask(SegmenterState& state, const Tile& tile, double threshold) {
  torch::NoGradGuard no_grad;
  state.net->eval();
  const Tile* one = &tile;
  auto prob = predict_batch(state, std::span<const Tile* const>(&one, 1));
  state.net->train();
  Prediction out;
  out.probability = nn::tensor_to_image(prob, 0);
  out.mask.pixels = threshold_map(out.probability, threshold);
  out.mask.origin_x = tile.origin_x;
  out.mask.origin_y = tile.origin_y;
  out.mask.parent_id = tile.parent_id;
  out.mask.tile_id = tile.tile_id;
  return out;
}

Prediction predict_mask(SegmenterState& state, const Tile& tile) {
  return predict_mask(state, tile, state.config.threshold);
}

MetricsReport evaluate(SegmenterState& state, std::span<const Sample> samples, double threshold,
                       ZeroDivision policy, const std::string& dataset_id,
                       const std::string& model_id) {
  if (samples.empty()) throw ConfigError("evaluate: empty dataset");
  torch::NoGradGuard no_grad;
  state.net->eval();
  std::vector<Metrics> per_image;
  std::vector<std::string> ids;
  for (std::size_t start = 0; start < samples.size(); start += kInferenceChunk) {
    const std::size_t n = std::min(kInferenceChunk, samples.size() - start);
    std::vector<const Tile*> tiles;
    for (std::size_t i = 0; i < n; ++i) tiles.push_back(&samples[start + i].tile);
    auto prob = predict_batch(state, tiles);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = samples[start + i];
      auto pred = threshold_map(nn::tensor_to_image(prob, static_cast<std::int64_t>(i)), threshold);
      per_image.push_back(compute_metrics(confusion(pred, s.mask.pixels), policy));
      ids.push_back(s.tile.tile_id);
    }
  }
  state.net->train();
  return aggregate(std::move(per_image), std::move(ids), dataset_id, model_id);
}

void save_segmenter(const SegmenterState& state, const std::filesystem::path& path) {
  torch::serialize::OutputArchive ar;
  ar.write("config", c10::IValue(render_fields(state.config, kConfigSection)));
  ar.write("epoch", c10::IValue(static_cast<std::int64_t>(state.epoch)));
  ar.write("best_epoch", c10::IValue(static_cast<std::int64_t>(state.best_epoch)));
  ar.write("best_val_loss", c10::IValue(state.best_val_loss));
  nn::save_module(ar, "net", *state.net);
  torch::serialize::OutputArchive opt;
  state.optimizer->save(opt);
  ar.write("optimizer", opt);
  torch::serialize::OutputArchive best;
  for (std::size_t i = 0; i < state.best_parameters.size(); ++i) {
    best.write("p" + std::to_string(i), state.best_parameters[i], /*is_buffer=*/true);
  }
  ar.write("best", best);
  auto hist = torch::empty({static_cast<std::int64_t>(state.history.size()), 3}, torch::kDouble);
  for (std::size_t i = 0; i < state.history.size(); ++i) {
    hist[static_cast<std::int64_t>(i)][0] = static_cast<double>(state.history[i].epoch);
    hist[static_cast<std::int64_t>(i)][1] = state.history[i].train_loss;
    hist[static_cast<std::int64_t>(i)][2] = state.history[i].val_loss;
  }
  ar.write("history", hist, /*is_buffer=*/true);
  ar.save_to(path.string());
}

std::unique_ptr<SegmenterState> load_segmenter(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  torch::serialize::InputArchive ar;
  ar.load_from(path.string());
  c10::IValue cfg_text, epoch, best_epoch, best_val;
  if (!ar.try_read("config", cfg_text) || !ar.try_read("epoch", epoch)) {
    throw ConfigError("not a segmenter checkpoint: " + path.string());
  }
  auto state = std::make_unique<SegmenterState>(
      parse_fields<SegmenterConfig>(cfg_text.toStringRef(), kConfigSection));
  state->epoch = static_cast<int>(epoch.toInt());
  if (ar.try_read("best_epoch", best_epoch)) state->best_epoch = static_cast<int>(best_epoch.toInt());
  if (ar.try_read("best_val_loss", best_val)) state->best_val_loss = best_val.toDouble();
  nn::load_module(ar, "net", *state->net);
  torch::serialize::InputArchive opt;
  if (ar.try_read("optimizer", opt)) state->optimizer->load(opt);
  torch::serialize::InputArchive best;
  if (ar.try_read("best", best)) {
    const std::size_t n = state->net->parameters().size();
    for (std::size_t i = 0; i < n; ++i) {
      torch::Tensor t;
      if (!best.try_read("p" + std::to_string(i), t, /*is_buffer=*/true)) break;
      state->best_parameters.push_back(t);
    }
  }
  torch::Tensor hist;
  if (ar.try_read("history", hist, /*is_buffer=*/true)) {
    auto acc = hist.accessor<double, 2>();
    for (std::int64_t i = 0; i < hist.size(0); ++i) {
      state->history.push_back({static_cast<int>(acc[i][0]), acc[i][1], acc[i][2]});
    }
  }
  return state;
}

void write_segmenter_history(const std::filesystem::path& path,
                             std::span<const SegmenterEpoch> rows) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.precision(10);
  out << "epoch,train_loss,val_loss\n";
  for (const auto& r : rows) out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << '\n';
}

}  // namespace cratergan
