#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "srlp/events.hpp"

namespace srlp {

// --- labeling ----------------------------------------------------------------

/// Rank-percentile cut points, in percent. With events ranked by return
/// (highest first) and percentile p = 100*i/n:
///   p < a            -> Outperforming
///   b <= p < c       -> Neutral
///   p >= 100 - d     -> Underperforming
/// and the gaps [a, b) and [c, 100 - d) are dropped.
struct LabelThresholds {
  double a = 20.0;
  double b = 40.0;
  double c = 60.0;
  double d = 20.0;

  void validate() const;
};

struct ExclusionReport {
  std::size_t total = 0;
  std::size_t outperforming = 0;
  std::size_t neutral = 0;
  std::size_t underperforming = 0;
  /// Events that fell into a gap between classes.
  std::vector<std::string> excluded_ids;
};

struct LabeledCorpus {
  Corpus events;  // labeled events only, input order preserved
  ExclusionReport report;
};

/// Ties in return are broken by event_id ascending.
LabeledCorpus derive_labels(Corpus corpus, const LabelThresholds& thresholds);

// --- splitting -----------------------------------------------------------------

struct InDistribution {
  std::uint64_t seed = 0;
};

/// Train on events strictly before the cutoff, test on the rest.
struct OutOfDistribution {
  Timestamp cutoff;
};

using SplitScheme = std::variant<InDistribution, OutOfDistribution>;

struct DatasetSplit {
  Corpus train;
  Corpus validation;  // empty for OutOfDistribution
  Corpus test;        // the ood_test partition for OutOfDistribution
  bool out_of_distribution = false;
};

/// InDistribution: 80/10/10, validation and test each floor(n/10). Partitions
/// keep the corpus order. Throws EmptyPartition naming the empty partition.
DatasetSplit split_dataset(const Corpus& corpus, const SplitScheme& scheme);

// --- factor scaling ------------------------------------------------------------

/// Per-factor z-score with population standard deviation, fitted on training
/// events. Missing values are imputed with the training mean; a zero-variance
/// factor scales to 0.
class FactorScaler {
 public:
  FactorScaler() = default;

  static FactorScaler fit(const Corpus& train);
  static FactorScaler from_moments(Eigen::VectorXd mean, Eigen::VectorXd stddev);

  bool fitted() const noexcept { return fitted_; }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::VectorXd& stddev() const noexcept { return stddev_; }

  Eigen::VectorXd transform(const FactorVector& raw) const;
  /// Returns a copy whose factors are all present and scaled.
  Corpus apply(Corpus corpus) const;

 private:
  void require_fitted() const;

  bool fitted_ = false;
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
};

}  // namespace srlp
