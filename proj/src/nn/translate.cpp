#include "cratergan/translate.hpp"

#include <cmath>
#include <deque>
#include <fstream>

#include "cratergan/config.hpp"
#include "nn/tensor_util.hpp"

namespace cratergan {
namespace {

namespace tnn = torch::nn;

constexpr const char* kConfigSection = "translator";

class ResidualBlockImpl : public tnn::Module {
 public:
  explicit ResidualBlockImpl(int channels) {
    block_ = register_module(
        "block",
        tnn::Sequential(tnn::ReflectionPad2d(1),
                        tnn::Conv2d(tnn::Conv2dOptions(channels, channels, 3)),
                        tnn::InstanceNorm2d(channels), tnn::ReLU(), tnn::ReflectionPad2d(1),
                        tnn::Conv2d(tnn::Conv2dOptions(channels, channels, 3)),
                        tnn::InstanceNorm2d(channels)));
  }
  torch::Tensor forward(const torch::Tensor& x) { return x + block_->forward(x); }

 private:
  tnn::Sequential block_{nullptr};
};
TORCH_MODULE(ResidualBlock);

// Bounded history of generated images shown to the discriminators.
class ImagePool {
 public:
  explicit ImagePool(int capacity) : capacity_(capacity) {}

  torch::Tensor query(const torch::Tensor& batch, Rng& rng) {
    if (capacity_ <= 0) return batch;
    std::vector<torch::Tensor> out;
    for (std::int64_t i = 0; i < batch.size(0); ++i) {
      auto img = batch.narrow(0, i, 1).clone();
      if (static_cast<int>(stored_.size()) < capacity_) {
        stored_.push_back(img);
        out.push_back(img);
      } else if (rng.uniform() > 0.5) {
        const std::size_t k = rng.below(stored_.size());
        out.push_back(stored_[k]);
        stored_[k] = img;
      } else {
        out.push_back(img);
      }
    }
    return torch::cat(out, 0);
  }

 private:
  int capacity_;
  std::vector<torch::Tensor> stored_;
};

torch::Tensor lsgan(const torch::Tensor& scores, float target) {
  return torch::mse_loss(scores, torch::full_like(scores, target));
}

void check_side(std::int64_t h, std::int64_t w) {
  if (h % 4 != 0 || w % 4 != 0) {
    throw ConfigError("translator input side must be divisible by 4, got " + std::to_string(h) +
                      "x" + std::to_string(w));
  }
}

}  // namespace

void TranslatorConfig::validate() const {
  if (residual_blocks < 1) throw ConfigError("translator.residual_blocks must be >= 1");
  if (gen_base_channels < 1 || disc_base_channels < 1) {
    throw ConfigError("translator channel counts must be >= 1");
  }
  if (disc_conv_layers < 1) throw ConfigError("translator.disc_conv_layers must be >= 1");
  if (!(cycle_weight >= 0.0) || !(identity_weight >= 0.0)) {
    throw ConfigError("translator loss weights must be >= 0");
  }
  if (adversarial_mode != "least-squares") {
    throw ConfigError("translator.adversarial_mode must be 'least-squares'");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("translator.learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("translator.batch_size must be >= 1");
  if (iterations < 0) throw ConfigError("translator.iterations must be >= 0");
  if (pool_size < 0 || checkpoint_every < 0) {
    throw ConfigError("translator.pool_size and checkpoint_every must be >= 0");
  }
}

GeneratorImpl::GeneratorImpl(const TranslatorConfig& cfg) {
  const int c = cfg.gen_base_channels;
  tnn::Sequential body(tnn::ReflectionPad2d(3), tnn::Conv2d(tnn::Conv2dOptions(1, c, 7)),
                       tnn::InstanceNorm2d(c), tnn::ReLU());
  for (int mult : {1, 2}) {
    body->push_back(tnn::Conv2d(tnn::Conv2dOptions(c * mult, c * mult * 2, 3).stride(2).padding(1)));
    body->push_back(tnn::InstanceNorm2d(c * mult * 2));
    body->push_back(tnn::ReLU());
  }
  for (int i = 0; i < cfg.residual_blocks; ++i) body->push_back(ResidualBlock(c * 4));
  for (int mult : {4, 2}) {
    body->push_back(tnn::ConvTranspose2d(
        tnn::ConvTranspose2dOptions(c * mult, c * mult / 2, 3).stride(2).padding(1).output_padding(1)));
    body->push_back(tnn::InstanceNorm2d(c * mult / 2));
    body->push_back(tnn::ReLU());
  }
  body->push_back(tnn::ReflectionPad2d(3));
  body_ = register_module("body", body);
  head = register_module("head", tnn::Conv2d(tnn::Conv2dOptions(c, 1, 7)));
  nn::init_conv_weights(*this);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x) {
  check_side(x.size(2), x.size(3));
  return torch::tanh(head->forward(body_->forward(x)));
}

DiscriminatorImpl::DiscriminatorImpl(const TranslatorConfig& cfg) {
  tnn::Sequential trunk;
  int in = 1;
  int out = cfg.disc_base_channels;
  for (int i = 0; i < cfg.disc_conv_layers; ++i) {
    out = cfg.disc_base_channels * (1 << std::min(i, 3));
    trunk->push_back(tnn::Conv2d(tnn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
    if (i > 0) trunk->push_back(tnn::InstanceNorm2d(out));
    if (i + 1 < cfg.disc_conv_layers) trunk->push_back(tnn::ReLU());
    in = out;
  }
  trunk_ = register_module("trunk", trunk);
  head_ = register_module("head", tnn::Conv2d(tnn::Conv2dOptions(out, 1, 4).stride(1).padding(1)));
  nn::init_conv_weights(*this);
}

torch::Tensor DiscriminatorImpl::features(const torch::Tensor& x) { return trunk_->forward(x); }

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) {
  return head_->forward(trunk_->forward(x));
}

torch::Tensor cycle_loss(const torch::Tensor& x, const torch::Tensor& x_rec) {
  if (x.sizes() != x_rec.sizes()) throw ConfigError("cycle_loss: shape mismatch");
  return (x - x_rec).abs().mean();
}

TranslatorState::TranslatorState(const TranslatorConfig& cfg) : config(cfg) {
  config.validate();
  torch::manual_seed(cfg.seed);
  sim_to_real = Generator(cfg);
  real_to_sim = Generator(cfg);
  disc_real = Discriminator(cfg);
  disc_sim = Discriminator(cfg);

  auto adam = torch::optim::AdamOptions(cfg.learning_rate).betas({cfg.beta1, 0.999});
  std::vector<torch::Tensor> gen_params = sim_to_real->parameters();
  for (auto& p : real_to_sim->parameters()) gen_params.push_back(p);
  std::vector<torch::Tensor> disc_params = disc_real->parameters();
  for (auto& p : disc_sim->parameters()) disc_params.push_back(p);
  gen_optimizer = std::make_unique<torch::optim::Adam>(gen_params, adam);
  disc_optimizer = std::make_unique<torch::optim::Adam>(disc_params, adam);
}

std::unique_ptr<TranslatorState> train_translator(std::span<const Image> sim,
                                                  std::span<const Image> real,
                                                  const TranslatorConfig& cfg,
                                                  const TranslatorHooks& hooks) {
  if (sim.empty() || real.empty()) throw ConfigError("train_translator: empty dataset");
  const int w = sim.front().width;
  const int h = sim.front().height;
  for (const auto* set : {&sim, &real}) {
    for (const auto& img : *set) {
      if (!img.same_shape(w, h)) throw ConfigError("train_translator: tiles differ in size");
    }
  }
  check_side(h, w);

  auto state = std::make_unique<TranslatorState>(cfg);
  Rng rng(Rng::mix(cfg.seed ^ 0x7A11C0DEULL));
  ImagePool pool_real(cfg.pool_size);
  ImagePool pool_sim(cfg.pool_size);
  auto& G = state->sim_to_real;
  auto& F = state->real_to_sim;
  auto& D_R = state->disc_real;
  auto& D_S = state->disc_sim;

  auto draw = [&](std::span<const Image> set) {
    std::vector<const Image*> picked;
    std::vector<std::pair<bool, bool>> flips;
    for (int b = 0; b < cfg.batch_size; ++b) {
      picked.push_back(&set[rng.below(set.size())]);
      const bool fx = cfg.flip_augment && rng.uniform() < 0.5;
      const bool fy = cfg.flip_augment && rng.uniform() < 0.5;
      flips.emplace_back(fx, fy);
    }
    return nn::apply_flips(nn::images_to_tensor(picked, -1.0f, 1.0f), flips);
  };

  for (int it = 1; it <= cfg.iterations; ++it) {
    const auto s = draw(sim);
    const auto r = draw(real);

    state->gen_optimizer->zero_grad();
    const auto fake_r = G->forward(s);
    const auto rec_s = F->forward(fake_r);
    const auto fake_s = F->forward(r);
    const auto rec_r = G->forward(fake_s);
    const auto loss_g = lsgan(D_R->forward(fake_r), 1.0f);
    const auto loss_f = lsgan(D_S->forward(fake_s), 1.0f);
    const auto loss_cyc = cycle_loss(s, rec_s) + cycle_loss(r, rec_r);
    auto total = loss_g + loss_f + cfg.cycle_weight * loss_cyc;
    if (cfg.identity_weight > 0.0) {
      total = total + cfg.identity_weight *
                          (cycle_loss(r, G->forward(r)) + cycle_loss(s, F->forward(s)));
    }
    total.backward();
    state->gen_optimizer->step();

    state->disc_optimizer->zero_grad();
    const auto pooled_r = pool_real.query(fake_r.detach(), rng);
    const auto pooled_s = pool_sim.query(fake_s.detach(), rng);
    const auto loss_d_r =
        0.5 * (lsgan(D_R->forward(r), 1.0f) + lsgan(D_R->forward(pooled_r), 0.0f));
    const auto loss_d_s =
        0.5 * (lsgan(D_S->forward(s), 1.0f) + lsgan(D_S->forward(pooled_s), 0.0f));
    (loss_d_r + loss_d_s).backward();
    state->disc_optimizer->step();

    TranslatorLossRow row{it,
                          loss_g.item<double>(),
                          loss_f.item<double>(),
                          loss_d_r.item<double>(),
                          loss_d_s.item<double>(),
                          loss_cyc.item<double>()};
    for (double v : {row.loss_g, row.loss_f, row.loss_d_r, row.loss_d_s, row.loss_cyc}) {
      if (!std::isfinite(v)) {
        throw RuntimeFailure("translator training diverged at iteration " + std::to_string(it) +
                             ": non-finite loss (G=" + std::to_string(row.loss_g) +
                             " F=" + std::to_string(row.loss_f) +
                             " D_R=" + std::to_string(row.loss_d_r) +
                             " D_S=" + std::to_string(row.loss_d_s) +
                             " cyc=" + std::to_string(row.loss_cyc) + ")");
      }
    }
    state->iteration = it;
    state->history.push_back(row);
    if (hooks.on_iteration) hooks.on_iteration(row);
    if (cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0 && hooks.on_checkpoint) {
      hooks.on_checkpoint(*state);
    }
  }
  return state;
}

std::vector<Tile> translate_batch(TranslatorState& state, std::span<const Tile> tiles) {
  torch::NoGradGuard no_grad;
  state.sim_to_real->eval();
  std::vector<Tile> out;
  out.reserve(tiles.size());
  constexpr std::size_t kChunk = 8;
  for (std::size_t start = 0; start < tiles.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, tiles.size() - start);
    std::vector<const Image*> batch;
    for (std::size_t i = 0; i < n; ++i) batch.push_back(&tiles[start + i].pixels);
    const auto y = state.sim_to_real->forward(nn::images_to_tensor(batch, -1.0f, 1.0f));
    for (std::size_t i = 0; i < n; ++i) {
      Tile t = tiles[start + i];
      t.pixels = nn::tensor_to_image(y, static_cast<std::int64_t>(i), -1.0f, 1.0f);
      t.provenance = "translated";
      out.push_back(std::move(t));
    }
  }
  state.sim_to_real->train();
  return out;
}

Tile translate(TranslatorState& state, const Tile& tile) {
  return translate_batch(state, std::span<const Tile>(&tile, 1)).front();
}

void save_translator(const TranslatorState& state, const std::filesystem::path& path) {
  torch::serialize::OutputArchive ar;
  ar.write("config", c10::IValue(render_fields(state.config, kConfigSection)));
  ar.write("iteration", c10::IValue(static_cast<std::int64_t>(state.iteration)));
  nn::save_module(ar, "sim_to_real", *state.sim_to_real);
  nn::save_module(ar, "real_to_sim", *state.real_to_sim);
  nn::save_module(ar, "disc_real", *state.disc_real);
  nn::save_module(ar, "disc_sim", *state.disc_sim);
  torch::serialize::OutputArchive gen_opt, disc_opt;
  state.gen_optimizer->save(gen_opt);
  state.disc_optimizer->save(disc_opt);
  ar.write("gen_optimizer", gen_opt);
  ar.write("disc_optimizer", disc_opt);
  auto hist = torch::empty({static_cast<std::int64_t>(state.history.size()), 6}, torch::kDouble);
  for (std::size_t i = 0; i < state.history.size(); ++i) {
    const auto& r = state.history[i];
    const double vals[6] = {static_cast<double>(r.iteration), r.loss_g, r.loss_f,
                            r.loss_d_r, r.loss_d_s, r.loss_cyc};
    for (int k = 0; k < 6; ++k) hist[static_cast<std::int64_t>(i)][k] = vals[k];
  }
  ar.write("history", hist, /*is_buffer=*/true);
  ar.save_to(path.string());
}

std::unique_ptr<TranslatorState> load_translator(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  torch::serialize::InputArchive ar;
  ar.load_from(path.string());
  c10::IValue cfg_text, iteration;
  if (!ar.try_read("config", cfg_text) || !ar.try_read("iteration", iteration)) {
    throw ConfigError("not a translator checkpoint: " + path.string());
  }
  auto cfg = parse_fields<TranslatorConfig>(cfg_text.toStringRef(), kConfigSection);
  auto state = std::make_unique<TranslatorState>(cfg);
  state->iteration = static_cast<int>(iteration.toInt());
  nn::load_module(ar, "sim_to_real", *state->sim_to_real);
  nn::load_module(ar, "real_to_sim", *state->real_to_sim);
  nn::load_module(ar, "disc_real", *state->disc_real);
  nn::load_module(ar, "disc_sim", *state->disc_sim);
  torch::serialize::InputArchive gen_opt, disc_opt;
  if (ar.try_read("gen_optimizer", gen_opt)) state->gen_optimizer->load(gen_opt);
  if (ar.try_read("disc_optimizer", disc_opt)) state->disc_optimizer->load(disc_opt);
  torch::Tensor hist;
  if (ar.try_read("history", hist, /*is_buffer=*/true)) {
    auto acc = hist.accessor<double, 2>();
    for (std::int64_t i = 0; i < hist.size(0); ++i) {
      state->history.push_back({static_cast<int>(acc[i][0]), acc[i][1], acc[i][2], acc[i][3],
                                acc[i][4], acc[i][5]});
    }
  }
  return state;
}

void write_translator_history(const std::filesystem::path& path,
                              std::span<const TranslatorLossRow> rows) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.precision(10);
  out << "iteration,loss_G,loss_F,loss_D_R,loss_D_S,loss_cyc\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.loss_g << ',' << r.loss_f << ',' << r.loss_d_r << ','
        << r.loss_d_s << ',' << r.loss_cyc << '\n';
  }
}

}  // namespace cratergan
