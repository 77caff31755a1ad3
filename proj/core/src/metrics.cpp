#include "srlp/metrics.hpp"

#include <nlohmann/json.hpp>

#include "srlp/error.hpp"

namespace srlp {
namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

EvalReport report_from_confusion(const ConfusionMatrix& confusion) {
  EvalReport r;
  r.confusion = confusion;
  std::array<double, kLabelCount> predicted_count{};
  double correct = 0.0;
  for (std::size_t t = 0; t < kLabelCount; ++t) {
    for (std::size_t p = 0; p < kLabelCount; ++p) {
      r.support[t] += confusion[t][p];
      predicted_count[p] += static_cast<double>(confusion[t][p]);
      r.total += confusion[t][p];
    }
    correct += static_cast<double>(confusion[t][t]);
  }
  const double total = static_cast<double>(r.total);
  r.accuracy = ratio(correct, total);

  for (std::size_t c = 0; c < kLabelCount; ++c) {
    const double tp = static_cast<double>(confusion[c][c]);
    const double precision = ratio(tp, predicted_count[c]);
    const double recall = ratio(tp, static_cast<double>(r.support[c]));
    r.macro.precision += precision / kLabelCount;
    r.macro.recall += recall / kLabelCount;
    r.macro.f1 += ratio(2.0 * precision * recall, precision + recall) / kLabelCount;
  }
  // Every miss is one false positive and one false negative.
  r.micro.precision = ratio(correct, total);
  r.micro.recall = ratio(correct, total);
  r.micro.f1 = ratio(2.0 * r.micro.precision * r.micro.recall, r.micro.precision + r.micro.recall);
  return r;
}

EvalReport score_predictions(std::span<const Label> truth, std::span<const Label> predicted) {
  if (truth.size() != predicted.size()) fail(ErrorCode::InvalidArgument, "score_predictions: length mismatch");
  ConfusionMatrix m{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++m[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return report_from_confusion(m);
}

std::string to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["total"] = r.total;
  j["skipped"] = r.skipped;
  j["accuracy"] = r.accuracy;
  j["macro"] = {{"precision", r.macro.precision}, {"recall", r.macro.recall}, {"f1", r.macro.f1}};
  j["micro"] = {{"precision", r.micro.precision}, {"recall", r.micro.recall}, {"f1", r.micro.f1}};
  j["confusion"] = r.confusion;
  nlohmann::ordered_json support;
  for (std::size_t c = 0; c < kLabelCount; ++c) support[std::string(to_string(static_cast<Label>(c)))] = r.support[c];
  j["support"] = support;
  return j.dump(2);
}

}  // namespace srlp
