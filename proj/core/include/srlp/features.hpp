#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "srlp/events.hpp"
#include "srlp/rng.hpp"

namespace srlp {

enum class Role : std::uint8_t { V = 0, A0 = 1, A1 = 2 };

inline constexpr std::size_t kRoleCount = 3;
inline constexpr std::size_t kDefaultMaxFrames = 32;

std::string_view to_string(Role role) noexcept;

struct RoleFeatures {
  Eigen::VectorXd v;
  Eigen::VectorXd a0;
  Eigen::VectorXd a1;

  const Eigen::VectorXd& operator[](Role r) const;
};

struct MaskSpec {
  std::size_t frame = 0;
  Role role = Role::V;

  friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

/// Per-event feature matrix. Column j is [e_V; e_A0; e_A1; F] for the j-th
/// complete frame, so there are 3*d_tok + d_factors rows and one column per frame.
class SrlpMatrix {
 public:
  SrlpMatrix(Eigen::MatrixXd columns, std::size_t d_tok, std::size_t d_factors);

  const Eigen::MatrixXd& columns() const noexcept { return columns_; }
  std::size_t frames() const noexcept { return static_cast<std::size_t>(columns_.cols()); }
  std::size_t d_tok() const noexcept { return d_tok_; }
  std::size_t d_factors() const noexcept { return d_factors_; }
  std::size_t column_size() const noexcept { return 3 * d_tok_ + d_factors_; }

  const std::optional<MaskSpec>& mask() const noexcept { return mask_; }

  /// Role segment of column j.
  Eigen::VectorXd role(std::size_t frame, Role role) const;
  /// Factor segment of column j.
  Eigen::VectorXd factors(std::size_t frame) const;

 private:
  friend SrlpMatrix mask_matrix(const SrlpMatrix& matrix, MaskSpec spec);

  Eigen::MatrixXd columns_;
  std::size_t d_tok_;
  std::size_t d_factors_;
  std::optional<MaskSpec> mask_;
};

/// Mean of the embedding rows at `indices`.
Eigen::VectorXd pool_role(const TokenizedSentence& sentence, std::span<const std::uint32_t> indices);

RoleFeatures pool_frame(const TokenizedSentence& sentence, const SrlFrame& frame);

/// One column per complete frame in document order, truncated to max_frames.
/// Throws Validation when the event has no complete frame.
SrlpMatrix build_event_matrix(const NewsEvent& event, const Eigen::VectorXd& scaled_factors,
                              std::size_t max_frames = kDefaultMaxFrames);

/// Copy of `matrix` with one role segment of one column zeroed.
SrlpMatrix mask_matrix(const SrlpMatrix& matrix, MaskSpec spec);

/// Probability of masking each role, indexed by Role.
struct MaskRoleDistribution {
  std::array<double, kRoleCount> weights{1.0, 0.0, 0.0};

  /// Always V.
  static MaskRoleDistribution v_only() { return {{1.0, 0.0, 0.0}}; }
  /// A0 or A1 with equal probability, never V.
  static MaskRoleDistribution a0_a1() { return {{0.0, 0.5, 0.5}}; }
  static MaskRoleDistribution uniform() { return {{1.0 / 3, 1.0 / 3, 1.0 / 3}}; }

  /// "v", "a0a1", "uniform", or explicit "wV,wA0,wA1".
  static MaskRoleDistribution parse(std::string_view text);
  std::string to_string() const;

  void validate() const;

  friend bool operator==(const MaskRoleDistribution&, const MaskRoleDistribution&) = default;
};

/// Uniform frame index, role drawn from `roles`. Two draws per call regardless
/// of the distribution so streams stay aligned across presets.
MaskSpec sample_mask(Rng& rng, std::size_t frames, const MaskRoleDistribution& roles);

/// Unmasked role segments of every column, the SSL candidate pool.
std::vector<Eigen::VectorXd> role_candidates(const SrlpMatrix& unmasked, Role role);

/// Debug dump: one row per matrix row, one column per frame.
void write_matrix_csv(std::ostream& out, const SrlpMatrix& matrix);

}  // namespace srlp
