#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "srlp/checkpoint.hpp"
#include "srlp/features.hpp"
#include "srlp/metrics.hpp"
#include "srlp/optimizer.hpp"
#include "srlp/predictions.hpp"

namespace srlp {

enum class LrSchedule { Constant, LinearDecay, Cosine };

std::string_view to_string(LrSchedule schedule) noexcept;
LrSchedule parse_lr_schedule(std::string_view text);

struct TrainConfig {
  std::uint64_t seed = 7;
  /// Overrides the seed of the mask stream only.
  std::optional<std::uint64_t> mask_seed;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  LrSchedule schedule = LrSchedule::Constant;
  std::size_t warmup_steps = 0;
  double alpha = 0.7;
  MaskRoleDistribution mask_roles = MaskRoleDistribution::v_only();
  std::size_t patience = 5;
  AdamConfig adam;
  /// d_tok == 0 means "take it from the training data".
  ModelConfig model;

  void validate() const;
  /// Flat key/value view, stored in checkpoint metadata and manifests.
  std::map<std::string, std::string> entries() const;
};

/// Learning rate for 0-based step `step` out of `total_steps`.
double learning_rate_at(const TrainConfig& config, std::size_t step, std::size_t total_steps);

/// An event turned into model input.
struct PreparedEvent {
  std::size_t index = 0;  // position in the source corpus
  SrlpMatrix matrix;
  std::optional<Label> label;
};

struct PreparedCorpus {
  std::vector<PreparedEvent> events;
  std::vector<SkippedEvent> skipped;
};

/// Scales factors and builds E for every event; events without a complete
/// frame are recorded as skipped.
PreparedCorpus prepare_corpus(const Corpus& corpus, const FactorScaler& scaler, std::size_t max_frames);

struct StepLog {
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::size_t batch_size = 0;
  double learning_rate = 0.0;
  double loss = 0.0;
  double loss_cls = 0.0;
  double loss_ssl = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double loss_cls = 0.0;
  double loss_ssl = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  bool improved = false;
};

struct TrainResult {
  /// Parameters of the epoch with the best validation accuracy.
  Checkpoint best;
  ModelParams initial;
  ModelParams last;
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_validation_accuracy = 0.0;
  bool stopped_early = false;
  std::vector<SkippedEvent> skipped;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Throws EmptyPartition for an empty split, Validation for unlabeled events
/// and NonFinite when a loss or gradient blows up.
TrainResult train(const Corpus& train_events, const Corpus& validation_events, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// One JSON object per line: "step" records followed by "epoch" records.
void write_training_log(std::ostream& out, const TrainResult& result);

/// Throws ShapeMismatch when the corpus does not fit the checkpoint.
void check_compatible(const Checkpoint& checkpoint, const Corpus& corpus);

EvalReport evaluate(const Checkpoint& checkpoint, const Corpus& events);

/// Class probabilities with dropout off.
Eigen::Vector3d predict_probabilities(const ModelParams& params, const SrlpMatrix& matrix);

Predictions predict(const Checkpoint& checkpoint, const Corpus& events);

/// Fraction of masked slots whose highest-scoring candidate is the true one.
/// Masks come from an Rng seeded with `seed`.
double ssl_top1_accuracy(const ModelParams& params, const std::vector<PreparedEvent>& events,
                         const MaskRoleDistribution& roles, std::uint64_t seed);

/// Mean SSL cross-entropy over the events, one mask per event.
double mean_ssl_loss(const ModelParams& params, const std::vector<PreparedEvent>& events,
                     const MaskRoleDistribution& roles, std::uint64_t seed);

}  // namespace srlp
