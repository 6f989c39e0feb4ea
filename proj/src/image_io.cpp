#include "cratergan/image_io.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace cratergan {

Image read_grayscale(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("image not found: " + path.string());
  }
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (raw.empty()) throw RuntimeFailure("cannot decode image: " + path.string());

  double scale = 0.0;
  switch (raw.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default:
      throw RuntimeFailure("unsupported bit depth in " + path.string());
  }
  Image out(raw.cols, raw.rows);
  cv::Mat view(raw.rows, raw.cols, CV_32F, out.data.data());
  raw.convertTo(view, CV_32F, scale);
  return out;
}

Image quantize8(const Image& image) {
  Image out(image.width, image.height);
  for (std::size_t i = 0; i < image.size(); ++i) {
    float v = std::clamp(image.data[i], 0.0f, 1.0f);
    out.data[i] = static_cast<float>(std::lround(v * 255.0f)) / 255.0f;
  }
  return out;
}

void write_png8(const std::filesystem::path& path, const Image& image) {
  cv::Mat bytes(image.height, image.width, CV_8U);
  for (int y = 0; y < image.height; ++y) {
    auto* row = bytes.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width; ++x) {
      float v = std::clamp(image.at(x, y), 0.0f, 1.0f);
      row[x] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  }
  if (!cv::imwrite(path.string(), bytes)) {
    throw RuntimeFailure("cannot write " + path.string());
  }
}

void write_mask_png(const std::filesystem::path& path,
                    const Grid<std::uint8_t>& mask) {
  cv::Mat bytes(mask.height, mask.width, CV_8U);
  for (int y = 0; y < mask.height; ++y) {
    auto* row = bytes.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width; ++x) row[x] = mask.at(x, y) ? 255 : 0;
  }
  if (!cv::imwrite(path.string(), bytes)) {
    throw RuntimeFailure("cannot write " + path.string());
  }
}

Grid<std::uint8_t> read_mask_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("mask not found: " + path.string());
  }
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (raw.empty()) throw RuntimeFailure("cannot decode mask: " + path.string());
  Grid<std::uint8_t> out(raw.cols, raw.rows);
  for (int y = 0; y < raw.rows; ++y) {
    const auto* row = raw.ptr<std::uint8_t>(y);
    for (int x = 0; x < raw.cols; ++x) out.at(x, y) = row[x] ? 1 : 0;
  }
  return out;
}

}  // namespace cratergan
