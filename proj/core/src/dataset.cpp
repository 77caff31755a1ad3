#include "srlp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "srlp/error.hpp"
#include "srlp/rng.hpp"

namespace srlp {

void LabelThresholds::validate() const {
  for (const double v : {a, b, c, d}) {
    if (!(v > 0.0 && v <= 100.0)) {
      fail(ErrorCode::InvalidArgument, fmt::format("label thresholds must lie in (0, 100], got {}", v));
    }
  }
  if (!(a <= b && b < c && c <= 100.0 - d)) {
    fail(ErrorCode::InvalidArgument,
         fmt::format("label thresholds need a <= b < c <= 100 - d, got a={} b={} c={} d={}", a, b, c, d));
  }
}

LabeledCorpus derive_labels(Corpus corpus, const LabelThresholds& thresholds) {
  thresholds.validate();
  if (corpus.empty()) fail(ErrorCode::InvalidArgument, "derive_labels: empty corpus");
  for (const auto& ev : corpus) {
    if (!ev.return_rate) fail(ErrorCode::Validation, fmt::format("event '{}' has no return_rate", ev.event_id));
  }

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const double rx = *corpus[x].return_rate;
    const double ry = *corpus[y].return_rate;
    if (rx != ry) return rx > ry;
    return corpus[x].event_id < corpus[y].event_id;
  });

  // Compare 100*i against threshold*n to keep the cut exact for integral thresholds.
  const double n = static_cast<double>(corpus.size());
  std::vector<std::optional<Label>> assigned(corpus.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const double scaled = 100.0 * static_cast<double>(rank);
    std::optional<Label> label;
    if (scaled < thresholds.a * n) {
      label = Label::Outperforming;
    } else if (scaled >= thresholds.b * n && scaled < thresholds.c * n) {
      label = Label::Neutral;
    } else if (scaled >= (100.0 - thresholds.d) * n) {
      label = Label::Underperforming;
    }
    assigned[order[rank]] = label;
  }

  LabeledCorpus out;
  out.report.total = corpus.size();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!assigned[i]) {
      out.report.excluded_ids.push_back(corpus[i].event_id);
      continue;
    }
    switch (*assigned[i]) {
      case Label::Outperforming: ++out.report.outperforming; break;
      case Label::Neutral: ++out.report.neutral; break;
      case Label::Underperforming: ++out.report.underperforming; break;
    }
    corpus[i].label = assigned[i];
    out.events.push_back(std::move(corpus[i]));
  }
  return out;
}

DatasetSplit split_dataset(const Corpus& corpus, const SplitScheme& scheme) {
  DatasetSplit out;
  if (const auto* ood = std::get_if<OutOfDistribution>(&scheme)) {
    out.out_of_distribution = true;
    for (const auto& ev : corpus) {
      (ev.published_at < ood->cutoff ? out.train : out.test).push_back(ev);
    }
    if (out.train.empty()) fail(ErrorCode::EmptyPartition, "split: partition 'train' is empty");
    if (out.test.empty()) fail(ErrorCode::EmptyPartition, "split: partition 'ood_test' is empty");
    return out;
  }

  const auto& ind = std::get<InDistribution>(scheme);
  const std::size_t n = corpus.size();
  const std::size_t n_val = n / 10;
  const std::size_t n_test = n / 10;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(ind.seed);
  shuffle(order, rng);

  // 0 = train, 1 = validation, 2 = test
  std::vector<int> bucket(n, 0);
  for (std::size_t k = 0; k < n_val; ++k) bucket[order[k]] = 1;
  for (std::size_t k = n_val; k < n_val + n_test; ++k) bucket[order[k]] = 2;
  for (std::size_t i = 0; i < n; ++i) {
    (bucket[i] == 0 ? out.train : bucket[i] == 1 ? out.validation : out.test).push_back(corpus[i]);
  }
  if (out.train.empty()) fail(ErrorCode::EmptyPartition, "split: partition 'train' is empty");
  if (out.validation.empty()) fail(ErrorCode::EmptyPartition, "split: partition 'validation' is empty");
  if (out.test.empty()) fail(ErrorCode::EmptyPartition, "split: partition 'test' is empty");
  return out;
}

FactorScaler FactorScaler::fit(const Corpus& train) {
  if (train.empty()) fail(ErrorCode::EmptyPartition, "cannot fit the factor scaler on an empty train split");
  FactorScaler s;
  s.mean_ = Eigen::VectorXd::Zero(kFactorCount);
  s.stddev_ = Eigen::VectorXd::Zero(kFactorCount);
  for (std::size_t f = 0; f < kFactorCount; ++f) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& ev : train) {
      if (const auto& v = ev.factors.values[f]) {
        sum += *v;
        ++count;
      }
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (const auto& ev : train) {
      if (const auto& v = ev.factors.values[f]) ss += (*v - mean) * (*v - mean);
    }
    s.mean_[static_cast<Eigen::Index>(f)] = mean;
    s.stddev_[static_cast<Eigen::Index>(f)] = std::sqrt(ss / static_cast<double>(count));
  }
  s.fitted_ = true;
  return s;
}

FactorScaler FactorScaler::from_moments(Eigen::VectorXd mean, Eigen::VectorXd stddev) {
  if (mean.size() != static_cast<Eigen::Index>(kFactorCount) || stddev.size() != mean.size()) {
    fail(ErrorCode::ShapeMismatch, fmt::format("factor scaler expects {} moments", kFactorCount));
  }
  FactorScaler s;
  s.mean_ = std::move(mean);
  s.stddev_ = std::move(stddev);
  s.fitted_ = true;
  return s;
}

void FactorScaler::require_fitted() const {
  if (!fitted_) fail(ErrorCode::Unfitted, "factor scaler used before fit");
}

Eigen::VectorXd FactorScaler::transform(const FactorVector& raw) const {
  require_fitted();
  Eigen::VectorXd out(static_cast<Eigen::Index>(kFactorCount));
  for (std::size_t f = 0; f < kFactorCount; ++f) {
    const auto i = static_cast<Eigen::Index>(f);
    const double x = raw.values[f].value_or(mean_[i]);
    out[i] = stddev_[i] > 0.0 ? (x - mean_[i]) / stddev_[i] : 0.0;
  }
  return out;
}

Corpus FactorScaler::apply(Corpus corpus) const {
  require_fitted();
  for (auto& ev : corpus) {
    const Eigen::VectorXd scaled = transform(ev.factors);
    for (std::size_t f = 0; f < kFactorCount; ++f) ev.factors.values[f] = scaled[static_cast<Eigen::Index>(f)];
  }
  return corpus;
}

}  // namespace srlp
