#include "wagf/metrics.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

#include "wagf/errors.hpp"

WAGF_BEGIN_NAMESPACE

namespace {

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::int64_t MetricsReport::total() const { return std::accumulate(confusion.begin(), confusion.end(), std::int64_t{0}); }

MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::size_t num_classes) {
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("compute_metrics: " + std::to_string(truth.size()) + " labels vs " +
                                std::to_string(predicted.size()) + " predictions");
  }
  MetricsReport r;
  const std::size_t K = num_classes;
  r.num_classes = K;
  r.confusion.assign(K * K, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= K || static_cast<std::size_t>(p) >= K) {
      throw std::out_of_range("compute_metrics: label outside [0," + std::to_string(K) + ") at index " +
                              std::to_string(i));
    }
    ++r.confusion[static_cast<std::size_t>(t) * K + static_cast<std::size_t>(p)];
  }
  std::int64_t diag = 0;
  const std::int64_t n = static_cast<std::int64_t>(truth.size());
  r.per_class.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    std::int64_t row = 0, col = 0;
    for (std::size_t j = 0; j < K; ++j) {
      row += r.confusion[k * K + j];
      col += r.confusion[j * K + k];
    }
    const std::int64_t tp = r.confusion[k * K + k];
    diag += tp;
    auto& s = r.per_class[k];
    s.support = row;
    s.precision = ratio(tp, col);
    s.recall = ratio(tp, row);
    s.f1 = (s.precision + s.recall) == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    r.macro_precision += s.precision;
    r.macro_recall += s.recall;
    r.macro_f1 += s.f1;
    const double w = n == 0 ? 0.0 : static_cast<double>(row) / static_cast<double>(n);
    r.weighted_precision += w * s.precision;
    r.weighted_recall += w * s.recall;
    r.weighted_f1 += w * s.f1;
  }
  if (K > 0) {
    r.macro_precision /= static_cast<double>(K);
    r.macro_recall /= static_cast<double>(K);
    r.macro_f1 /= static_cast<double>(K);
  }
  r.accuracy = ratio(diag, n);
  return r;
}

nlohmann::ordered_json MetricsReport::to_json(const std::vector<std::string>& class_names) const {
  nlohmann::ordered_json j;
  j["samples"] = total();
  j["accuracy"] = accuracy;
  j["macro_precision"] = macro_precision;
  j["macro_recall"] = macro_recall;
  j["macro_f1"] = macro_f1;
  j["weighted_precision"] = weighted_precision;
  j["weighted_recall"] = weighted_recall;
  j["weighted_f1"] = weighted_f1;
  auto& pc = j["per_class"];
  pc = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < num_classes; ++k) {
    nlohmann::ordered_json c;
    c["class"] = k < class_names.size() ? class_names[k] : std::to_string(k);
    c["precision"] = per_class[k].precision;
    c["recall"] = per_class[k].recall;
    c["f1"] = per_class[k].f1;
    c["support"] = per_class[k].support;
    pc.push_back(std::move(c));
  }
  auto& cm = j["confusion"];
  cm = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < num_classes; ++t) {
    std::vector<std::int64_t> row(confusion.begin() + static_cast<std::ptrdiff_t>(t * num_classes),
                                  confusion.begin() + static_cast<std::ptrdiff_t>((t + 1) * num_classes));
    cm.push_back(row);
  }
  return j;
}

std::string MetricsReport::confusion_csv(const std::vector<std::string>& class_names) const {
  std::ostringstream os;
  auto name = [&](std::size_t k) { return k < class_names.size() ? class_names[k] : std::to_string(k); };
  os << "true\\predicted";
  for (std::size_t k = 0; k < num_classes; ++k) os << ',' << name(k);
  os << '\n';
  for (std::size_t t = 0; t < num_classes; ++t) {
    os << name(t);
    for (std::size_t p = 0; p < num_classes; ++p) os << ',' << at(t, p);
    os << '\n';
  }
  return os.str();
}

WAGF_END_NAMESPACE
