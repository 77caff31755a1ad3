#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "srlp/time.hpp"

namespace srlp {

enum class Label : std::uint8_t { Outperforming = 0, Neutral = 1, Underperforming = 2 };

inline constexpr std::size_t kLabelCount = 3;

std::string_view to_string(Label label) noexcept;
Label parse_label(std::string_view text);

/// One predicate-argument frame. Indices point into the owning sentence's tokens.
struct SrlFrame {
  std::vector<std::uint32_t> v;
  std::vector<std::uint32_t> a0;
  std::vector<std::uint32_t> a1;

  /// Only frames with all three roles present contribute a column to E.
  bool complete() const noexcept { return !v.empty() && !a0.empty() && !a1.empty(); }

  friend bool operator==(const SrlFrame&, const SrlFrame&) = default;
};

struct TokenizedSentence {
  std::vector<std::string> tokens;
  /// token_count x d_tok. Empty until embeddings are attached.
  Eigen::MatrixXd embeddings;
  std::vector<SrlFrame> frames;
};

inline constexpr std::size_t kFactorCount = 24;

/// Names of the per-stock factors, in file order.
const std::array<std::string_view, kFactorCount>& factor_names() noexcept;

/// Raw factor values; a missing value stays missing until a scaler imputes it.
struct FactorVector {
  std::array<std::optional<double>, kFactorCount> values{};

  std::size_t missing_count() const noexcept;
};

struct NewsEvent {
  std::string event_id;
  std::string stock_id;
  Timestamp published_at;
  std::vector<TokenizedSentence> sentences;
  FactorVector factors;
  std::optional<double> return_rate;
  std::optional<Label> label;

  std::size_t complete_frame_count() const noexcept;
};

using Corpus = std::vector<NewsEvent>;

/// Orders by (published_at, event_id).
void sort_canonical(Corpus& corpus);

// --- events file: line-delimited JSON ---------------------------------------

/// Parses the events file. Embeddings are left empty. Errors name the line.
Corpus read_events_jsonl(std::istream& in, std::string_view source = "<events>");
Corpus read_events_jsonl(const std::filesystem::path& path);

/// Canonical writer; parse followed by write reproduces canonical input bytes.
void write_events_jsonl(std::ostream& out, const Corpus& corpus);
void write_events_jsonl(const std::filesystem::path& path, const Corpus& corpus);

// --- embeddings file: "SRLPEMB1" binary -------------------------------------

inline constexpr std::string_view kEmbeddingsMagic = "SRLPEMB1";

/// Attaches every record to its (event, sentence). Every sentence of every
/// event must receive exactly one block. Returns d_tok from the header.
std::size_t attach_embeddings(Corpus& corpus, std::istream& in);
std::size_t attach_embeddings(Corpus& corpus, const std::filesystem::path& path);

/// Writes one record per sentence in corpus order. Values are narrowed to f32.
void write_embeddings(std::ostream& out, const Corpus& corpus, std::size_t d_tok);
void write_embeddings(const std::filesystem::path& path, const Corpus& corpus, std::size_t d_tok);

/// Reads both files and returns the corpus in canonical order.
Corpus parse_events(const std::filesystem::path& events_path,
                    const std::filesystem::path& embeddings_path);

/// Checks the corpus-level invariants: unique ids, in-range frame indices and,
/// when require_embeddings is set, embedding shapes and a uniform d_tok.
void validate_corpus(const Corpus& corpus, bool require_embeddings);

/// Embedding width of the corpus (0 if empty or no embeddings attached).
std::size_t embedding_dim(const Corpus& corpus) noexcept;

}  // namespace srlp
