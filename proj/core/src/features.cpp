#include "srlp/features.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "srlp/error.hpp"

namespace srlp {

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::V: return "V";
    case Role::A0: return "A0";
    case Role::A1: return "A1";
  }
  return "?";
}

const Eigen::VectorXd& RoleFeatures::operator[](Role r) const {
  switch (r) {
    case Role::V: return v;
    case Role::A0: return a0;
    case Role::A1: return a1;
  }
  return v;
}

SrlpMatrix::SrlpMatrix(Eigen::MatrixXd columns, std::size_t d_tok, std::size_t d_factors)
    : columns_(std::move(columns)), d_tok_(d_tok), d_factors_(d_factors) {
  if (static_cast<std::size_t>(columns_.rows()) != column_size()) {
    fail(ErrorCode::ShapeMismatch,
         fmt::format("SRLP matrix has {} rows, expected 3*{}+{}", columns_.rows(), d_tok, d_factors));
  }
}

Eigen::VectorXd SrlpMatrix::role(std::size_t frame, Role role) const {
  const auto offset = static_cast<Eigen::Index>(static_cast<std::size_t>(role) * d_tok_);
  return columns_.col(static_cast<Eigen::Index>(frame)).segment(offset, static_cast<Eigen::Index>(d_tok_));
}

Eigen::VectorXd SrlpMatrix::factors(std::size_t frame) const {
  return columns_.col(static_cast<Eigen::Index>(frame)).tail(static_cast<Eigen::Index>(d_factors_));
}

Eigen::VectorXd pool_role(const TokenizedSentence& sentence, std::span<const std::uint32_t> indices) {
  if (indices.empty()) fail(ErrorCode::InvalidArgument, "pool_role: empty index set");
  const auto& emb = sentence.embeddings;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(emb.cols());
  for (const auto idx : indices) {
    if (idx >= static_cast<std::uint32_t>(emb.rows())) {
      fail(ErrorCode::InvalidArgument,
           fmt::format("pool_role: index {} outside a sentence of {} embedded tokens", idx, emb.rows()));
    }
    sum += emb.row(idx).transpose();
  }
  return sum / static_cast<double>(indices.size());
}

RoleFeatures pool_frame(const TokenizedSentence& sentence, const SrlFrame& frame) {
  return {pool_role(sentence, frame.v), pool_role(sentence, frame.a0), pool_role(sentence, frame.a1)};
}

SrlpMatrix build_event_matrix(const NewsEvent& event, const Eigen::VectorXd& scaled_factors,
                              std::size_t max_frames) {
  std::vector<RoleFeatures> frames;
  for (const auto& sentence : event.sentences) {
    for (const auto& frame : sentence.frames) {
      if (frames.size() == max_frames) break;
      if (frame.complete()) frames.push_back(pool_frame(sentence, frame));
    }
  }
  if (frames.empty()) {
    fail(ErrorCode::Validation, fmt::format("event '{}' has no complete SRL frame", event.event_id));
  }
  if (!scaled_factors.allFinite()) {
    fail(ErrorCode::NonFinite, fmt::format("event '{}' has non-finite scaled factors", event.event_id));
  }
  const auto d_tok = frames.front().v.size();
  const auto d_f = scaled_factors.size();
  Eigen::MatrixXd cols(3 * d_tok + d_f, static_cast<Eigen::Index>(frames.size()));
  for (std::size_t j = 0; j < frames.size(); ++j) {
    auto col = cols.col(static_cast<Eigen::Index>(j));
    col.segment(0, d_tok) = frames[j].v;
    col.segment(d_tok, d_tok) = frames[j].a0;
    col.segment(2 * d_tok, d_tok) = frames[j].a1;
    col.tail(d_f) = scaled_factors;
  }
  return SrlpMatrix(std::move(cols), static_cast<std::size_t>(d_tok), static_cast<std::size_t>(d_f));
}

SrlpMatrix mask_matrix(const SrlpMatrix& matrix, MaskSpec spec) {
  if (matrix.mask_) fail(ErrorCode::InvalidArgument, "mask_matrix: matrix is already masked");
  if (spec.frame >= matrix.frames()) {
    fail(ErrorCode::InvalidArgument,
         fmt::format("mask_matrix: frame {} out of range for {} frames", spec.frame, matrix.frames()));
  }
  SrlpMatrix out = matrix;
  const auto offset = static_cast<Eigen::Index>(static_cast<std::size_t>(spec.role) * matrix.d_tok_);
  out.columns_.col(static_cast<Eigen::Index>(spec.frame))
      .segment(offset, static_cast<Eigen::Index>(matrix.d_tok_))
      .setZero();
  out.mask_ = spec;
  return out;
}

MaskRoleDistribution MaskRoleDistribution::parse(std::string_view text) {
  if (text == "v") return v_only();
  if (text == "a0a1") return a0_a1();
  if (text == "uniform") return uniform();
  MaskRoleDistribution d;
  std::istringstream in{std::string(text)};
  std::string part;
  for (std::size_t i = 0; i < kRoleCount; ++i) {
    if (!std::getline(in, part, ',')) {
      fail(ErrorCode::InvalidArgument, fmt::format("bad mask preset '{}'", text));
    }
    try {
      d.weights[i] = std::stod(part);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, fmt::format("bad mask preset '{}'", text));
    }
  }
  d.validate();
  return d;
}

std::string MaskRoleDistribution::to_string() const {
  if (*this == v_only()) return "v";
  if (*this == a0_a1()) return "a0a1";
  if (*this == uniform()) return "uniform";
  return fmt::format("{},{},{}", weights[0], weights[1], weights[2]);
}

void MaskRoleDistribution::validate() const {
  double total = 0.0;
  for (const double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorCode::InvalidArgument, "mask role weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) fail(ErrorCode::InvalidArgument, "mask role weights sum to zero");
}

MaskSpec sample_mask(Rng& rng, std::size_t frames, const MaskRoleDistribution& roles) {
  if (frames == 0) fail(ErrorCode::InvalidArgument, "sample_mask: no frames");
  roles.validate();
  MaskSpec spec;
  spec.frame = rng.uniform_index(frames);
  const double total = roles.weights[0] + roles.weights[1] + roles.weights[2];
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  spec.role = Role::A1;
  for (std::size_t r = 0; r < kRoleCount; ++r) {
    acc += roles.weights[r];
    if (roles.weights[r] > 0.0 && u < acc) {
      spec.role = static_cast<Role>(r);
      break;
    }
  }
  // Guard against a trailing zero-weight role being picked by rounding.
  while (roles.weights[static_cast<std::size_t>(spec.role)] == 0.0) {
    spec.role = static_cast<Role>(static_cast<std::size_t>(spec.role) - 1);
  }
  return spec;
}

std::vector<Eigen::VectorXd> role_candidates(const SrlpMatrix& unmasked, Role role) {
  if (unmasked.mask()) fail(ErrorCode::InvalidArgument, "role_candidates: matrix is masked");
  std::vector<Eigen::VectorXd> out;
  out.reserve(unmasked.frames());
  for (std::size_t j = 0; j < unmasked.frames(); ++j) out.push_back(unmasked.role(j, role));
  return out;
}

void write_matrix_csv(std::ostream& out, const SrlpMatrix& matrix) {
  out << "row";
  for (std::size_t j = 0; j < matrix.frames(); ++j) out << ",frame_" << j;
  out << '\n';
  const auto& cols = matrix.columns();
  const auto d = static_cast<Eigen::Index>(matrix.d_tok());
  for (Eigen::Index r = 0; r < cols.rows(); ++r) {
    std::string name;
    if (r < 3 * d) {
      name = fmt::format("{}[{}]", to_string(static_cast<Role>(r / d)), r % d);
    } else {
      name = fmt::format("F[{}]", r - 3 * d);
    }
    out << name;
    for (Eigen::Index c = 0; c < cols.cols(); ++c) out << fmt::format(",{}", cols(r, c));
    out << '\n';
  }
}

}  // namespace srlp
