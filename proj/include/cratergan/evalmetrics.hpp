#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cratergan/masks.hpp"

namespace cratergan {

/// Pixel tallies with crater as the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// How a metric with a zero denominator is resolved.
enum class ZeroDivision { kOne, kZero };

inline constexpr std::size_t kMetricCount = 6;

/// Order used by reports and the comparison table.
inline constexpr std::array<std::string_view, kMetricCount> kMetricNames = {
    "accuracy", "f1", "iou", "precision", "recall", "specificity"};

/// Six pixel metrics, as fractions in [0, 1].
struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  bool vacuous = false;  // some metric hit 0/0

  std::array<double, kMetricCount> values() const {
    return {accuracy, f1, iou, precision, recall, specificity};
  }
  static Metrics from_values(const std::array<double, kMetricCount>& v);
};

ConfusionCounts confusion(const Grid<std::uint8_t>& pred, const Grid<std::uint8_t>& gt);
inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
  return confusion(pred.pixels, gt.pixels);
}

/// Throws ConfigError when the counts are empty.
Metrics compute_metrics(const ConfusionCounts& c, ZeroDivision policy = ZeroDivision::kOne);

struct MetricsReport {
  std::vector<Metrics> per_image;
  std::vector<std::string> image_ids;
  Metrics mean;
  std::size_t n_images = 0;
  std::size_t vacuous_images = 0;
  std::string dataset_id;
  std::string model_id;
};

/// Unweighted mean over images, summed in input order.
MetricsReport aggregate(std::vector<Metrics> per_image, std::vector<std::string> image_ids = {},
                        std::string dataset_id = {}, std::string model_id = {});

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
void write_report(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_report(const std::filesystem::path& path);

struct ComparisonRow {
  std::string metric;
  double a = 0.0;
  double b = 0.0;
  double delta = 0.0;  // b - a
  std::string verdict;  // improved | worsened | unchanged
};

struct Comparison {
  std::string label_a;
  std::string label_b;
  std::vector<ComparisonRow> rows;
};

/// Side-by-side means of two reports, deltas as b - a.
Comparison compare_reports(const MetricsReport& a, const MetricsReport& b);

std::string comparison_csv(const Comparison& c);
/// Text table in percent, one row per metric.
std::string comparison_table(const Comparison& c);

/// Reference means for raw-simulation versus translated training data
/// (percent values divided by 100).
std::pair<MetricsReport, MetricsReport> reference_table_fixture();

}  // namespace cratergan
