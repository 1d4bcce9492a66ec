#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgcoi/dataset.hpp"

namespace kgcoi {

/// counts[gold][predicted], indexed by Label.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, 3>, 3> counts{};

  void add(Label gold, Label predicted) {
    ++counts[static_cast<std::size_t>(gold)][static_cast<std::size_t>(predicted)];
  }
  std::size_t total() const noexcept;
  std::size_t trace() const noexcept;
  bool operator==(const ConfusionMatrix&) const = default;
};

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double mean_confidence = 0.0;
  std::size_t n = 0;
};

/// One line of a results file, reduced to what scoring needs.
struct Prediction {
  std::string id;
  std::string method;
  std::size_t n_runs = 1;
  Label label = Label::no_relation;
  double confidence = 0.0;
  bool parse_failed = false;
};

struct GoldItem {
  std::string id;
  Label label = Label::no_relation;
};

struct ScoreResult {
  Metrics metrics;
  ConfusionMatrix confusion;
};

/// Per-class F1 with 0/0 read as 0, averaged over the three labels.
double macro_f1(const ConfusionMatrix& m);
Metrics compute_metrics(const ConfusionMatrix& m, std::span<const double> confidences);

/// Throws AlignmentError naming missing, duplicate and unknown ids.
ScoreResult score(std::span<const Prediction> predictions, std::span<const GoldItem> gold);

std::vector<GoldItem> gold_from(std::span<const DatasetInstance> dataset);
std::vector<Prediction> parse_predictions(std::istream& in);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

/// Text report; confidence is shown as a percentage with two decimals.
std::string render_report(const ScoreResult& r);
nlohmann::json to_json(const ScoreResult& r);

struct ScalingInput {
  std::string method;
  std::size_t n = 1;
  std::vector<Prediction> predictions;
};

struct ScalingRow {
  std::string method;
  std::size_t n = 1;
  Metrics metrics;
};

/// One row per (method, N), sorted by method then N. Every input must
/// cover exactly the gold ids.
std::vector<ScalingRow> scaling_report(std::span<const ScalingInput> inputs,
                                       std::span<const GoldItem> gold);
std::string render_scaling(std::span<const ScalingRow> rows);
nlohmann::json to_json(std::span<const ScalingRow> rows);

}  // namespace kgcoi
