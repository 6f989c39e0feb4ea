#include "cratergan/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cratergan {
namespace {

double ratio(std::uint64_t num, std::uint64_t den, ZeroDivision policy, bool& vacuous) {
  if (den == 0) {
    vacuous = true;
    return policy == ZeroDivision::kOne ? 1.0 : 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json j;
  const auto v = m.values();
  for (std::size_t i = 0; i < kMetricCount; ++i) j[std::string(kMetricNames[i])] = v[i];
  j["vacuous"] = m.vacuous;
  return j;
}

Metrics metrics_from_json(const nlohmann::json& j) {
  std::array<double, kMetricCount> v{};
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    v[i] = j.at(std::string(kMetricNames[i])).get<double>();
  }
  Metrics m = Metrics::from_values(v);
  m.vacuous = j.value("vacuous", false);
  return m;
}

}  // namespace

Metrics Metrics::from_values(const std::array<double, kMetricCount>& v) {
  Metrics m;
  m.accuracy = v[0];
  m.f1 = v[1];
  m.iou = v[2];
  m.precision = v[3];
  m.recall = v[4];
  m.specificity = v[5];
  return m;
}

ConfusionCounts confusion(const Grid<std::uint8_t>& pred, const Grid<std::uint8_t>& gt) {
  if (!pred.same_shape(gt.width, gt.height)) {
    throw ConfigError("confusion: mask dimensions differ");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.data[i] != 0;
    const bool g = gt.data[i] != 0;
    if (p && g) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (g) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

Metrics compute_metrics(const ConfusionCounts& c, ZeroDivision policy) {
  const std::uint64_t n = c.total();
  if (n == 0) throw ConfigError("compute_metrics: no pixels");
  Metrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
  m.iou = ratio(c.tp, c.tp + c.fp + c.fn, policy, m.vacuous);
  m.precision = ratio(c.tp, c.tp + c.fp, policy, m.vacuous);
  m.recall = ratio(c.tp, c.tp + c.fn, policy, m.vacuous);
  // Harmonic mean of precision and recall, written on the counts.
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, policy, m.vacuous);
  m.specificity = ratio(c.tn, c.tn + c.fp, policy, m.vacuous);
  return m;
}

MetricsReport aggregate(std::vector<Metrics> per_image, std::vector<std::string> image_ids,
                        std::string dataset_id, std::string model_id) {
  if (per_image.empty()) throw ConfigError("aggregate: empty dataset");
  MetricsReport r;
  std::array<double, kMetricCount> sum{};
  for (const auto& m : per_image) {
    const auto v = m.values();
    for (std::size_t i = 0; i < kMetricCount; ++i) sum[i] += v[i];
    if (m.vacuous) ++r.vacuous_images;
  }
  for (auto& s : sum) s /= static_cast<double>(per_image.size());
  r.mean = Metrics::from_values(sum);
  r.n_images = per_image.size();
  r.per_image = std::move(per_image);
  r.image_ids = std::move(image_ids);
  r.dataset_id = std::move(dataset_id);
  r.model_id = std::move(model_id);
  return r;
}

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["dataset_id"] = report.dataset_id;
  j["model_id"] = report.model_id;
  j["n_images"] = report.n_images;
  j["vacuous_images"] = report.vacuous_images;
  j["mean"] = metrics_to_json(report.mean);
  auto& images = j["per_image"] = nlohmann::json::array();
  for (std::size_t i = 0; i < report.per_image.size(); ++i) {
    auto entry = metrics_to_json(report.per_image[i]);
    if (i < report.image_ids.size()) entry["image_id"] = report.image_ids[i];
    images.push_back(std::move(entry));
  }
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.dataset_id = j.value("dataset_id", "");
  r.model_id = j.value("model_id", "");
  r.n_images = j.at("n_images").get<std::size_t>();
  r.vacuous_images = j.value("vacuous_images", std::size_t{0});
  r.mean = metrics_from_json(j.at("mean"));
  for (const auto& e : j.value("per_image", nlohmann::json::array())) {
    r.per_image.push_back(metrics_from_json(e));
    if (e.contains("image_id")) r.image_ids.push_back(e["image_id"].get<std::string>());
  }
  return r;
}

void write_report(const std::filesystem::path& path, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << report_to_json(report).dump(2) << '\n';
}

MetricsReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("report not found: " + path.string());
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed report " + path.string() + ": " + e.what());
  }
}

Comparison compare_reports(const MetricsReport& a, const MetricsReport& b) {
  Comparison c;
  c.label_a = a.model_id.empty() ? "a" : a.model_id;
  c.label_b = b.model_id.empty() ? "b" : b.model_id;
  const auto va = a.mean.values();
  const auto vb = b.mean.values();
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    ComparisonRow row;
    row.metric = std::string(kMetricNames[i]);
    row.a = va[i];
    row.b = vb[i];
    row.delta = vb[i] - va[i];
    row.verdict = row.delta > 0.0 ? "improved" : row.delta < 0.0 ? "worsened" : "unchanged";
    c.rows.push_back(std::move(row));
  }
  return c;
}

std::string comparison_csv(const Comparison& c) {
  std::ostringstream out;
  out.precision(10);
  out << "metric," << c.label_a << ',' << c.label_b << ",delta,verdict\n";
  for (const auto& r : c.rows) {
    out << r.metric << ',' << r.a << ',' << r.b << ',' << r.delta << ',' << r.verdict << '\n';
  }
  return out.str();
}

std::string comparison_table(const Comparison& c) {
  std::ostringstream out;
  const int wa = std::max<int>(14, static_cast<int>(c.label_a.size()));
  const int wb = std::max<int>(14, static_cast<int>(c.label_b.size()));
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s | %*s | %*s | %9s | %s\n", "Metric [%]", wa,
                c.label_a.c_str(), wb, c.label_b.c_str(), "delta", "verdict");
  out << line << std::string(static_cast<std::size_t>(12 + wa + wb + 32), '-') << '\n';
  for (const auto& r : c.rows) {
    std::snprintf(line, sizeof(line), "%-12s | %*.2f | %*.2f | %+9.2f | %s\n", r.metric.c_str(),
                  wa, 100.0 * r.a, wb, 100.0 * r.b, 100.0 * r.delta, r.verdict.c_str());
    out << line;
  }
  return out.str();
}

std::pair<MetricsReport, MetricsReport> reference_table_fixture() {
  // accuracy, f1, iou, precision, recall, specificity
  const std::array<double, kMetricCount> sim = {0.8959, 0.1529, 0.0846, 0.1271, 0.2841, 0.9247};
  const std::array<double, kMetricCount> translated = {0.9253, 0.2331, 0.1381,
                                                       0.2209, 0.3313, 0.9537};
  auto a = aggregate({Metrics::from_values(sim)}, {}, "reference-table", "sim-trained");
  auto b = aggregate({Metrics::from_values(translated)}, {}, "reference-table",
                     "translated-trained");
  return {a, b};
}

}  // namespace cratergan
