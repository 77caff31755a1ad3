#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>

#include "srlp/events.hpp"

namespace srlp {

/// confusion[truth][predicted]
using ConfusionMatrix = std::array<std::array<std::size_t, kLabelCount>, kLabelCount>;

struct AveragedScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::size_t total = 0;
  double accuracy = 0.0;
  /// Unweighted mean over the three classes; a 0/0 ratio counts as 0.
  AveragedScores macro;
  /// Pooled counts; equals accuracy for single-label data.
  AveragedScores micro;
  ConfusionMatrix confusion{};
  std::array<std::size_t, kLabelCount> support{};
  std::size_t skipped = 0;
};

EvalReport report_from_confusion(const ConfusionMatrix& confusion);
EvalReport score_predictions(std::span<const Label> truth, std::span<const Label> predicted);

std::string to_json(const EvalReport& report);

}  // namespace srlp
