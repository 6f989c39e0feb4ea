#include "nn/tensor_util.hpp"

#include <algorithm>
#include <cstring>

namespace cratergan::nn {

torch::Tensor images_to_tensor(std::span<const Image* const> images, float lo, float hi) {
  if (images.empty()) throw ConfigError("empty image batch");
  const int w = images.front()->width;
  const int h = images.front()->height;
  auto out = torch::empty({static_cast<std::int64_t>(images.size()), 1, h, w});
  float* dst = out.data_ptr<float>();
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i]->same_shape(w, h)) throw ConfigError("image batch has mixed sizes");
    const float* src = images[i]->data.data();
    for (std::size_t p = 0; p < plane; ++p) dst[i * plane + p] = lo + (hi - lo) * src[p];
  }
  return out;
}

Image tensor_to_image(const torch::Tensor& t, std::int64_t index, float lo, float hi) {
  auto plane = t.index({index, 0}).contiguous().to(torch::kFloat);
  const int h = static_cast<int>(plane.size(0));
  const int w = static_cast<int>(plane.size(1));
  Image img(w, h);
  const float* src = plane.data_ptr<float>();
  for (std::size_t p = 0; p < img.size(); ++p) {
    img.data[p] = std::clamp((src[p] - lo) / (hi - lo), 0.0f, 1.0f);
  }
  return img;
}

torch::Tensor masks_to_tensor(std::span<const Grid<std::uint8_t>* const> masks) {
  if (masks.empty()) throw ConfigError("empty mask batch");
  const int w = masks.front()->width;
  const int h = masks.front()->height;
  auto out = torch::empty({static_cast<std::int64_t>(masks.size()), 1, h, w});
  float* dst = out.data_ptr<float>();
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (!masks[i]->same_shape(w, h)) throw ConfigError("mask batch has mixed sizes");
    const auto* src = masks[i]->data.data();
    for (std::size_t p = 0; p < plane; ++p) dst[i * plane + p] = src[p] ? 1.0f : 0.0f;
  }
  return out;
}

torch::Tensor apply_flips(torch::Tensor t, const std::vector<std::pair<bool, bool>>& flips) {
  std::vector<torch::Tensor> parts;
  parts.reserve(flips.size());
  for (std::size_t i = 0; i < flips.size(); ++i) {
    auto x = t.narrow(0, static_cast<std::int64_t>(i), 1);
    if (flips[i].first) x = x.flip({3});
    if (flips[i].second) x = x.flip({2});
    parts.push_back(x);
  }
  return torch::cat(parts, 0);
}

void init_conv_weights(torch::nn::Module& module) {
  torch::NoGradGuard guard;
  for (auto& m : module.modules(/*include_self=*/false)) {
    if (auto* conv = m->as<torch::nn::Conv2d>()) {
      conv->weight.normal_(0.0, 0.02);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* tconv = m->as<torch::nn::ConvTranspose2d>()) {
      tconv->weight.normal_(0.0, 0.02);
      if (tconv->bias.defined()) tconv->bias.zero_();
    }
  }
}

bool all_finite(const torch::Tensor& t) { return torch::isfinite(t).all().item<bool>(); }

void save_module(torch::serialize::OutputArchive& parent, const std::string& key,
                 const torch::nn::Module& module) {
  torch::serialize::OutputArchive child;
  module.save(child);
  parent.write(key, child);
}

void load_module(torch::serialize::InputArchive& parent, const std::string& key,
                 torch::nn::Module& module) {
  torch::serialize::InputArchive child;
  if (!parent.try_read(key, child)) throw ConfigError("checkpoint lacks '" + key + "'");
  module.load(child);
}

}  // namespace cratergan::nn
