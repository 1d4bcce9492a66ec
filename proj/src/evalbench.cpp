#include "kgcoi/evalbench.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include "kgcoi/errors.hpp"
#include "kgcoi/text.hpp"

namespace kgcoi {

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (std::size_t c : row) n += c;
  return n;
}

std::size_t ConfusionMatrix::trace() const noexcept {
  return counts[0][0] + counts[1][1] + counts[2][2];
}

double macro_f1(const ConfusionMatrix& m) {
  double sum = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t tp = m.counts[c][c];
    std::size_t predicted = 0;
    std::size_t actual = 0;
    for (std::size_t o = 0; o < 3; ++o) {
      predicted += m.counts[o][c];
      actual += m.counts[c][o];
    }
    if (tp == 0) continue;  // covers 0/0 precision or recall
    const double p = static_cast<double>(tp) / static_cast<double>(predicted);
    const double r = static_cast<double>(tp) / static_cast<double>(actual);
    sum += 2.0 * p * r / (p + r);
  }
  return sum / 3.0;
}

Metrics compute_metrics(const ConfusionMatrix& m, std::span<const double> confidences) {
  Metrics out;
  out.n = m.total();
  if (out.n > 0) {
    out.accuracy = static_cast<double>(m.trace()) / static_cast<double>(out.n);
    out.macro_f1 = macro_f1(m);
  }
  if (!confidences.empty()) {
    double sum = 0.0;
    for (double c : confidences) sum += c;
    out.mean_confidence = sum / static_cast<double>(confidences.size());
  }
  return out;
}

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) {
    if (i > 0) out += ", ";
    out += ids[i];
  }
  if (ids.size() > 20) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace

ScoreResult score(std::span<const Prediction> predictions, std::span<const GoldItem> gold) {
  std::map<std::string, const Prediction*> by_id;
  std::vector<std::string> duplicate;
  for (const Prediction& p : predictions) {
    if (!by_id.emplace(p.id, &p).second) duplicate.push_back(p.id);
  }
  std::vector<std::string> missing;
  std::map<std::string, bool> known;
  for (const GoldItem& g : gold) {
    known[g.id] = true;
    if (!by_id.contains(g.id)) missing.push_back(g.id);
  }
  std::vector<std::string> unknown;
  for (const auto& [id, p] : by_id) {
    if (!known.contains(id)) unknown.push_back(id);
  }
  if (!missing.empty() || !duplicate.empty() || !unknown.empty()) {
    std::string msg = "predictions do not align with the dataset";
    if (!missing.empty()) msg += "; missing ids: " + join_ids(missing);
    if (!duplicate.empty()) msg += "; duplicate ids: " + join_ids(duplicate);
    if (!unknown.empty()) msg += "; unknown ids: " + join_ids(unknown);
    throw AlignmentError(msg);
  }

  ScoreResult r;
  std::vector<double> confidences;
  confidences.reserve(gold.size());
  for (const GoldItem& g : gold) {
    const Prediction& p = *by_id.at(g.id);
    r.confusion.add(g.label, p.label);
    confidences.push_back(p.confidence);
  }
  r.metrics = compute_metrics(r.confusion, confidences);
  return r;
}

std::vector<GoldItem> gold_from(std::span<const DatasetInstance> dataset) {
  std::vector<GoldItem> out;
  out.reserve(dataset.size());
  for (const DatasetInstance& d : dataset) out.push_back({d.id, d.label});
  return out;
}

std::vector<Prediction> parse_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (text::trim(line).empty()) continue;
    const std::string where = "results line " + std::to_string(number) + ": ";
    try {
      auto j = nlohmann::json::parse(line);
      const int version = j.at("schema_version").get<int>();
      if (version != 1)
        throw FormatError(where + "schema_version " + std::to_string(version) +
                          " is not supported (expected 1)");
      Prediction p;
      p.id = j.at("id").get<std::string>();
      p.method = j.value("method", std::string{});
      p.n_runs = j.value("n", std::size_t{1});
      auto label = label_from_string(j.at("prediction").get<std::string>());
      if (!label) throw ParseError(where + "unknown prediction label");
      p.label = *label;
      p.confidence = j.at("confidence").get<double>();
      p.parse_failed = j.value("parse_failed", false);
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + e.what());
    }
  }
  return out;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return parse_predictions(in);
}

namespace {

std::string fixed(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

std::string render_report(const ScoreResult& r) {
  std::ostringstream out;
  out << "n           " << r.metrics.n << '\n';
  out << "Accuracy    " << fixed("%05.2f", 100.0 * r.metrics.accuracy) << '\n';
  out << "F1          " << fixed("%05.2f", 100.0 * r.metrics.macro_f1) << '\n';
  out << "Confidence  " << fixed("%05.2f", 100.0 * r.metrics.mean_confidence) << '\n';
  out << "\nconfusion (rows gold, columns predicted)\n";
  out << "              inhibit  no_relation  stimulate\n";
  for (Label g : kAllLabels) {
    const auto& row = r.confusion.counts[static_cast<std::size_t>(g)];
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-12s %8zu %12zu %10zu\n", std::string(to_string(g)).c_str(),
                  row[0], row[1], row[2]);
    out << buf;
  }
  return out.str();
}

nlohmann::json to_json(const ScoreResult& r) {
  nlohmann::json confusion = nlohmann::json::object();
  for (Label g : kAllLabels) {
    nlohmann::json row = nlohmann::json::object();
    for (Label p : kAllLabels)
      row[std::string(to_string(p))] =
          r.confusion.counts[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
    confusion[std::string(to_string(g))] = row;
  }
  return {{"n", r.metrics.n},
          {"accuracy", r.metrics.accuracy},
          {"macro_f1", r.metrics.macro_f1},
          {"mean_confidence", r.metrics.mean_confidence},
          {"confusion", confusion}};
}

std::vector<ScalingRow> scaling_report(std::span<const ScalingInput> inputs,
                                       std::span<const GoldItem> gold) {
  std::vector<ScalingRow> rows;
  for (const ScalingInput& in : inputs) {
    ScoreResult r;
    try {
      r = score(in.predictions, gold);
    } catch (const AlignmentError& e) {
      throw AlignmentError("results for " + in.method + " N=" + std::to_string(in.n) +
                           " use a different dataset: " + e.what());
    }
    rows.push_back({in.method, in.n, r.metrics});
  }
  std::sort(rows.begin(), rows.end(), [](const ScalingRow& a, const ScalingRow& b) {
    return a.method != b.method ? a.method < b.method : a.n < b.n;
  });
  return rows;
}

std::string render_scaling(std::span<const ScalingRow> rows) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-8s %4s %9s %7s %11s\n", "method", "N", "Accuracy", "F1",
                "Confidence");
  out << buf;
  for (const ScalingRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8s %4zu %9.2f %7.2f %11s\n", r.method.c_str(), r.n,
                  100.0 * r.metrics.accuracy, 100.0 * r.metrics.macro_f1,
                  fixed("%05.2f", 100.0 * r.metrics.mean_confidence).c_str());
    out << buf;
  }
  return out.str();
}

nlohmann::json to_json(std::span<const ScalingRow> rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const ScalingRow& r : rows) {
    out.push_back({{"method", r.method},
                   {"n", r.n},
                   {"accuracy", r.metrics.accuracy},
                   {"macro_f1", r.metrics.macro_f1},
                   {"mean_confidence", r.metrics.mean_confidence},
                   {"count", r.metrics.n}});
  }
  return out;
}

}  // namespace kgcoi
