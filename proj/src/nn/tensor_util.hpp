#pragma once

#include <span>
#include <vector>

#include <torch/torch.h>

#include "cratergan/common.hpp"

namespace cratergan::nn {

/// Stacks images into (N, 1, H, W), mapping [0, 1] to [lo, hi].
torch::Tensor images_to_tensor(std::span<const Image* const> images, float lo = 0.0f,
                               float hi = 1.0f);

/// Inverse of images_to_tensor for one batch element.
Image tensor_to_image(const torch::Tensor& t, std::int64_t index, float lo = 0.0f,
                      float hi = 1.0f);

/// Stacks masks into (N, 1, H, W) float {0, 1}.
torch::Tensor masks_to_tensor(std::span<const Grid<std::uint8_t>* const> masks);

/// Flips selected batch elements along width and/or height.
torch::Tensor apply_flips(torch::Tensor t, const std::vector<std::pair<bool, bool>>& flips);

/// Normal(0, 0.02) conv weights, zero biases.
void init_conv_weights(torch::nn::Module& module);

bool all_finite(const torch::Tensor& t);

/// Serializes a module's parameters and buffers into a nested archive.
void save_module(torch::serialize::OutputArchive& parent, const std::string& key,
                 const torch::nn::Module& module);
void load_module(torch::serialize::InputArchive& parent, const std::string& key,
                 torch::nn::Module& module);

}  // namespace cratergan::nn
