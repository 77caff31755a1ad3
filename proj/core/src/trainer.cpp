#include "srlp/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "srlp/error.hpp"
#include "srlp/rng.hpp"

namespace srlp {
namespace {

// Stream ids under the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kMaskStream = 3;
constexpr std::uint64_t kDropoutStream = 4;

std::string num(double v) { return fmt::format("{}", v); }

std::size_t argmax(const Eigen::Vector3d& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return static_cast<std::size_t>(i);
}

std::size_t bucket_of(std::size_t frames) { return std::bit_width(frames > 0 ? frames - 1 : 0); }

// Batches never mix buckets. Shuffle, group by bucket (stable), chunk, then
// shuffle the batch order.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<PreparedEvent>& events, std::size_t batch_size,
                                                   Rng& rng) {
  std::vector<std::size_t> order(events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return bucket_of(events[a].matrix.frames()) < bucket_of(events[b].matrix.frames());
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size();) {
    const std::size_t bucket = bucket_of(events[order[i]].matrix.frames());
    std::vector<std::size_t> batch;
    while (i < order.size() && batch.size() < batch_size && bucket_of(events[order[i]].matrix.frames()) == bucket) {
      batch.push_back(order[i++]);
    }
    batches.push_back(std::move(batch));
  }
  shuffle(batches, rng);
  return batches;
}

std::size_t batches_per_epoch(const std::vector<PreparedEvent>& events, std::size_t batch_size) {
  std::map<std::size_t, std::size_t> counts;
  for (const auto& e : events) ++counts[bucket_of(e.matrix.frames())];
  std::size_t total = 0;
  for (const auto& [bucket, n] : counts) total += (n + batch_size - 1) / batch_size;
  return total;
}

void require_labels(const Corpus& corpus, std::string_view split) {
  for (const auto& e : corpus) {
    if (!e.label) fail(ErrorCode::Validation, fmt::format("{} event '{}' has no label", split, e.event_id));
  }
}

double accuracy(const ModelParams& params, const std::vector<PreparedEvent>& events) {
  if (events.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& e : events) {
    const auto pass = forward_classify(e.matrix, params, nullptr, false);
    if (argmax(pass.logits) == static_cast<std::size_t>(*e.label)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(events.size());
}

}  // namespace

std::string_view to_string(LrSchedule schedule) noexcept {
  switch (schedule) {
    case LrSchedule::Constant: return "constant";
    case LrSchedule::LinearDecay: return "linear";
    case LrSchedule::Cosine: return "cosine";
  }
  return "constant";
}

LrSchedule parse_lr_schedule(std::string_view text) {
  if (text == "constant") return LrSchedule::Constant;
  if (text == "linear") return LrSchedule::LinearDecay;
  if (text == "cosine") return LrSchedule::Cosine;
  fail(ErrorCode::InvalidArgument, fmt::format("unknown lr schedule '{}' (constant|linear|cosine)", text));
}

void TrainConfig::validate() const {
  if (epochs == 0) fail(ErrorCode::InvalidArgument, "epochs must be positive");
  if (batch_size == 0) fail(ErrorCode::InvalidArgument, "batch_size must be positive");
  if (patience == 0) fail(ErrorCode::InvalidArgument, "patience must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorCode::InvalidArgument, "learning_rate must be finite and >= 0");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::InvalidArgument, fmt::format("alpha {} outside [0, 1]", alpha));
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    fail(ErrorCode::InvalidArgument, "adam betas must be in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) fail(ErrorCode::InvalidArgument, "adam epsilon must be positive");
  if (!(adam.weight_decay >= 0.0)) fail(ErrorCode::InvalidArgument, "weight_decay must be >= 0");
  mask_roles.validate();
}

std::map<std::string, std::string> TrainConfig::entries() const {
  std::map<std::string, std::string> e;
  e["train.seed"] = std::to_string(seed);
  if (mask_seed) e["train.mask_seed"] = std::to_string(*mask_seed);
  e["train.epochs"] = std::to_string(epochs);
  e["train.batch_size"] = std::to_string(batch_size);
  e["train.learning_rate"] = num(learning_rate);
  e["train.schedule"] = std::string(to_string(schedule));
  e["train.warmup_steps"] = std::to_string(warmup_steps);
  e["train.alpha"] = num(alpha);
  e["train.mask_roles"] = mask_roles.to_string();
  e["train.patience"] = std::to_string(patience);
  e["adam.beta1"] = num(adam.beta1);
  e["adam.beta2"] = num(adam.beta2);
  e["adam.epsilon"] = num(adam.epsilon);
  e["adam.weight_decay"] = num(adam.weight_decay);
  e["model.d_model"] = std::to_string(model.d_model);
  e["model.n_layers"] = std::to_string(model.n_layers);
  e["model.n_heads"] = std::to_string(model.n_heads);
  e["model.ffn_ratio"] = std::to_string(model.ffn_ratio);
  e["model.max_frames"] = std::to_string(model.max_frames);
  e["model.dropout"] = num(model.dropout);
  e["model.layer_norm_eps"] = num(model.layer_norm_eps);
  return e;
}

double learning_rate_at(const TrainConfig& c, std::size_t step, std::size_t total_steps) {
  const double base = c.learning_rate;
  if (step < c.warmup_steps) return base * static_cast<double>(step + 1) / static_cast<double>(c.warmup_steps);
  if (c.schedule == LrSchedule::Constant || total_steps <= c.warmup_steps) return base;
  const double progress =
      static_cast<double>(step - c.warmup_steps) / static_cast<double>(total_steps - c.warmup_steps);
  if (c.schedule == LrSchedule::LinearDecay) return base * (1.0 - progress);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

PreparedCorpus prepare_corpus(const Corpus& corpus, const FactorScaler& scaler, std::size_t max_frames) {
  PreparedCorpus out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& e = corpus[i];
    if (e.complete_frame_count() == 0) {
      out.skipped.push_back({e.event_id, "no complete frames"});
      continue;
    }
    out.events.push_back({i, build_event_matrix(e, scaler.transform(e.factors), max_frames), e.label});
  }
  return out;
}

TrainResult train(const Corpus& train_events, const Corpus& validation_events, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_events.empty()) fail(ErrorCode::EmptyPartition, "train split is empty");
  if (validation_events.empty()) fail(ErrorCode::EmptyPartition, "validation split is empty");
  require_labels(train_events, "train");
  require_labels(validation_events, "validation");

  const auto scaler = FactorScaler::fit(train_events);
  ModelConfig mc = config.model;
  mc.d_factors = kFactorCount;
  if (mc.d_tok == 0) mc.d_tok = embedding_dim(train_events);
  mc.validate();

  TrainResult result;
  auto train_set = prepare_corpus(train_events, scaler, mc.max_frames);
  auto val_set = prepare_corpus(validation_events, scaler, mc.max_frames);
  result.skipped = train_set.skipped;
  result.skipped.insert(result.skipped.end(), val_set.skipped.begin(), val_set.skipped.end());
  for (const auto& s : result.skipped) spdlog::warn("skipping event {}: {}", s.event_id, s.reason);
  if (train_set.events.empty()) fail(ErrorCode::EmptyPartition, "train split has no usable events");
  if (val_set.events.empty()) fail(ErrorCode::EmptyPartition, "validation split has no usable events");

  const Rng base(config.seed);
  Rng init_rng = base.fork(kInitStream);
  Rng shuffle_rng = base.fork(kShuffleStream);
  Rng dropout_rng = base.fork(kDropoutStream);
  Rng mask_rng = Rng(config.mask_seed.value_or(config.seed)).fork(kMaskStream);

  ModelParams params = ModelParams::initialize(mc, init_rng);
  result.initial = params;
  AdamOptimizer optimizer(mc, config.adam);

  const std::size_t total_steps = config.epochs * batches_per_epoch(train_set.events, config.batch_size);
  std::size_t step = 0;
  std::size_t stale = 0;
  result.best_validation_accuracy = -1.0;
  ModelParams best = params;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    std::size_t correct = 0;
    for (const auto& batch : make_batches(train_set.events, config.batch_size, shuffle_rng)) {
      ModelParams grads = ModelParams::zeros(mc);
      const double scale = 1.0 / static_cast<double>(batch.size());
      StepLog sl;
      sl.epoch = epoch;
      sl.step = step;
      sl.batch_size = batch.size();
      for (const std::size_t idx : batch) {
        const auto& ev = train_set.events[idx];
        const MaskSpec mask = sample_mask(mask_rng, ev.matrix.frames(), config.mask_roles);
        const auto r = loss_and_gradients(params, ev.matrix, mask, *ev.label, config.alpha, grads, scale, &dropout_rng);
        if (!std::isfinite(r.loss.total)) {
          fail(ErrorCode::NonFinite,
               fmt::format("non-finite loss at epoch {} step {} on event '{}' (frames {}, mask t={} role={}): "
                           "L={} L_cls={} L_ssl={}",
                           epoch, step, train_events[ev.index].event_id, ev.matrix.frames(), mask.frame,
                           to_string(mask.role), r.loss.total, r.loss.cls, r.loss.ssl));
        }
        sl.loss += scale * r.loss.total;
        sl.loss_cls += scale * r.loss.cls;
        sl.loss_ssl += scale * r.loss.ssl;
        if (argmax(r.logits) == static_cast<std::size_t>(*ev.label)) ++correct;
      }
      sl.learning_rate = learning_rate_at(config, step, total_steps);
      try {
        optimizer.step(params, grads, sl.learning_rate);
      } catch (const Error& e) {
        fail(e.code(), fmt::format("epoch {} step {}: {}", epoch, step, e.what()));
      }
      const double w = static_cast<double>(batch.size()) / static_cast<double>(train_set.events.size());
      log.loss += w * sl.loss;
      log.loss_cls += w * sl.loss_cls;
      log.loss_ssl += w * sl.loss_ssl;
      result.steps.push_back(sl);
      ++step;
    }
    log.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.events.size());
    log.validation_accuracy = accuracy(params, val_set.events);
    if (log.validation_accuracy > result.best_validation_accuracy) {
      log.improved = true;
      result.best_validation_accuracy = log.validation_accuracy;
      result.best_epoch = epoch;
      best = params;
      stale = 0;
    } else {
      ++stale;
    }
    spdlog::info("epoch {}: loss {:.6f} (cls {:.6f}, ssl {:.6f}) train acc {:.4f} val acc {:.4f}", epoch, log.loss,
                 log.loss_cls, log.loss_ssl, log.train_accuracy, log.validation_accuracy);
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (stale >= config.patience && epoch < config.epochs) {
      result.stopped_early = true;
      break;
    }
  }

  result.last = params;
  result.best.params = std::move(best);
  result.best.scaler = scaler;
  result.best.metadata = config.entries();
  result.best.metadata["train.best_epoch"] = std::to_string(result.best_epoch);
  result.best.metadata["train.best_validation_accuracy"] = num(result.best_validation_accuracy);
  return result;
}

void write_training_log(std::ostream& out, const TrainResult& result) {
  for (const auto& s : result.steps) {
    nlohmann::ordered_json j;
    j["type"] = "step";
    j["epoch"] = s.epoch;
    j["step"] = s.step;
    j["batch_size"] = s.batch_size;
    j["learning_rate"] = s.learning_rate;
    j["loss"] = s.loss;
    j["loss_cls"] = s.loss_cls;
    j["loss_ssl"] = s.loss_ssl;
    out << j.dump() << '\n';
  }
  for (const auto& e : result.epochs) {
    nlohmann::ordered_json j;
    j["type"] = "epoch";
    j["epoch"] = e.epoch;
    j["loss"] = e.loss;
    j["loss_cls"] = e.loss_cls;
    j["loss_ssl"] = e.loss_ssl;
    j["train_accuracy"] = e.train_accuracy;
    j["validation_accuracy"] = e.validation_accuracy;
    j["improved"] = e.improved;
    out << j.dump() << '\n';
  }
}

void check_compatible(const Checkpoint& checkpoint, const Corpus& corpus) {
  const auto& c = checkpoint.params.config;
  if (!checkpoint.scaler) fail(ErrorCode::ShapeMismatch, "checkpoint carries no factor scaler");
  if (c.d_factors != kFactorCount) {
    fail(ErrorCode::ShapeMismatch, fmt::format("checkpoint expects {} factors, data has {}", c.d_factors, kFactorCount));
  }
  for (const auto& e : corpus) {
    for (const auto& s : e.sentences) {
      if (s.embeddings.size() > 0 && static_cast<std::size_t>(s.embeddings.cols()) != c.d_tok) {
        fail(ErrorCode::ShapeMismatch, fmt::format("event '{}' has d_tok {}, checkpoint expects {}", e.event_id,
                                                   s.embeddings.cols(), c.d_tok));
      }
    }
  }
}

EvalReport evaluate(const Checkpoint& checkpoint, const Corpus& events) {
  if (events.empty()) fail(ErrorCode::EmptyPartition, "evaluation split is empty");
  require_labels(events, "evaluation");
  check_compatible(checkpoint, events);
  const auto prepared = prepare_corpus(events, *checkpoint.scaler, checkpoint.params.config.max_frames);
  ConfusionMatrix m{};
  for (const auto& e : prepared.events) {
    const auto pass = forward_classify(e.matrix, checkpoint.params, nullptr, false);
    ++m[static_cast<std::size_t>(*e.label)][argmax(pass.logits)];
  }
  auto report = report_from_confusion(m);
  report.skipped = prepared.skipped.size();
  return report;
}

Eigen::Vector3d predict_probabilities(const ModelParams& params, const SrlpMatrix& matrix) {
  const auto pass = forward_classify(matrix, params, nullptr, false);
  return softmax(pass.logits);
}

Predictions predict(const Checkpoint& checkpoint, const Corpus& events) {
  check_compatible(checkpoint, events);
  const auto prepared = prepare_corpus(events, *checkpoint.scaler, checkpoint.params.config.max_frames);
  Predictions out;
  out.skipped = prepared.skipped;
  for (const auto& s : out.skipped) spdlog::warn("skipping event {}: {}", s.event_id, s.reason);
  for (const auto& e : prepared.events) {
    const auto& src = events[e.index];
    const Eigen::Vector3d p = predict_probabilities(checkpoint.params, e.matrix);
    PredictionRow row;
    row.event_id = src.event_id;
    row.stock_id = src.stock_id;
    row.published_at = src.published_at;
    row.predicted = static_cast<Label>(argmax(p));
    for (std::size_t k = 0; k < kLabelCount; ++k) row.probabilities[k] = p[static_cast<Eigen::Index>(k)];
    out.rows.push_back(std::move(row));
  }
  return out;
}

namespace {

template <class F>
void for_each_ssl_pass(const ModelParams& params, const std::vector<PreparedEvent>& events,
                       const MaskRoleDistribution& roles, std::uint64_t seed, F&& f) {
  Rng rng(seed);
  for (const auto& e : events) {
    const MaskSpec mask = sample_mask(rng, e.matrix.frames(), roles);
    const auto candidates = role_candidates(e.matrix, mask.role);
    const auto pass = forward_ssl(mask_matrix(e.matrix, mask), candidates, params, nullptr, false);
    f(pass, mask);
  }
}

}  // namespace

double ssl_top1_accuracy(const ModelParams& params, const std::vector<PreparedEvent>& events,
                         const MaskRoleDistribution& roles, std::uint64_t seed) {
  if (events.empty()) fail(ErrorCode::InvalidArgument, "ssl_top1_accuracy: no events");
  std::size_t hits = 0;
  for_each_ssl_pass(params, events, roles, seed, [&](const SslPass& pass, const MaskSpec& mask) {
    Eigen::Index best = 0;
    pass.p_ssl.maxCoeff(&best);
    if (static_cast<std::size_t>(best) == mask.frame) ++hits;
  });
  return static_cast<double>(hits) / static_cast<double>(events.size());
}

double mean_ssl_loss(const ModelParams& params, const std::vector<PreparedEvent>& events,
                     const MaskRoleDistribution& roles, std::uint64_t seed) {
  if (events.empty()) fail(ErrorCode::InvalidArgument, "mean_ssl_loss: no events");
  double total = 0.0;
  for_each_ssl_pass(params, events, roles, seed, [&](const SslPass& pass, const MaskSpec& mask) {
    total -= pass.log_p[static_cast<Eigen::Index>(mask.frame)];
  });
  return total / static_cast<double>(events.size());
}

}  // namespace srlp
