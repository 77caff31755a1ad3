#include "srlp/events.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "srlp/detail/binary_io.hpp"
#include "srlp/error.hpp"

namespace srlp {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::string_view, kFactorCount> kFactorNames = {
    "dividend_yield",   "dividend_yield_ttm",
    "total_share",      "circulated_share",
    "free_float_share", "market_cap",
    "pe",               "pe_ttm",
    "pb",               "ps",
    "ps_ttm",           "circulated_market_cap",
    "open",             "high",
    "low",              "close",
    "pre_close",        "change",
    "pct_change",       "volume",
    "amount",           "turnover_rate",
    "turnover_rate_circulated", "volume_ratio",
};

std::vector<std::uint32_t> read_indices(const ordered_json& node, std::string_view field) {
  if (!node.is_array()) fail(ErrorCode::Parse, fmt::format("'{}' must be an array", field));
  std::vector<std::uint32_t> out;
  out.reserve(node.size());
  for (const auto& v : node) {
    if (!v.is_number_unsigned()) fail(ErrorCode::Parse, fmt::format("'{}' must hold token indices", field));
    out.push_back(v.get<std::uint32_t>());
  }
  return out;
}

const ordered_json& require(const ordered_json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorCode::Parse, fmt::format("missing field '{}'", key));
  return *it;
}

void check_frame_indices(const NewsEvent& ev) {
  for (std::size_t s = 0; s < ev.sentences.size(); ++s) {
    const auto& sentence = ev.sentences[s];
    const std::size_t n = sentence.tokens.size();
    for (std::size_t f = 0; f < sentence.frames.size(); ++f) {
      const auto& frame = sentence.frames[f];
      for (const auto* set : {&frame.v, &frame.a0, &frame.a1}) {
        for (auto idx : *set) {
          if (idx >= n) {
            fail(ErrorCode::Validation,
                 fmt::format("event '{}': sentence {} frame {} references token {} but the sentence has {} tokens",
                             ev.event_id, s, f, idx, n));
          }
        }
      }
      if (frame.v.empty()) {
        fail(ErrorCode::Validation,
             fmt::format("event '{}': sentence {} frame {} has an empty predicate set", ev.event_id, s, f));
      }
    }
  }
}

NewsEvent event_from_json(const ordered_json& obj) {
  if (!obj.is_object()) fail(ErrorCode::Parse, "record is not a JSON object");
  NewsEvent ev;
  ev.event_id = require(obj, "event_id").get<std::string>();
  if (ev.event_id.empty()) fail(ErrorCode::Parse, "empty event_id");
  ev.stock_id = require(obj, "stock_id").get<std::string>();
  ev.published_at = Timestamp::parse(require(obj, "published_at").get<std::string>());

  for (const auto& s : require(obj, "sentences")) {
    TokenizedSentence sentence;
    for (const auto& tok : require(s, "tokens")) sentence.tokens.push_back(tok.get<std::string>());
    if (const auto it = s.find("frames"); it != s.end()) {
      for (const auto& f : *it) {
        SrlFrame frame;
        frame.v = read_indices(require(f, "v"), "v");
        frame.a0 = read_indices(require(f, "a0"), "a0");
        frame.a1 = read_indices(require(f, "a1"), "a1");
        sentence.frames.push_back(std::move(frame));
      }
    }
    ev.sentences.push_back(std::move(sentence));
  }

  const auto& factors = require(obj, "factors");
  if (!factors.is_array() || factors.size() != kFactorCount) {
    fail(ErrorCode::Parse, fmt::format("'factors' must hold exactly {} entries", kFactorCount));
  }
  for (std::size_t i = 0; i < kFactorCount; ++i) {
    if (factors[i].is_null()) continue;
    if (!factors[i].is_number()) fail(ErrorCode::Parse, fmt::format("factor {} is not a number", i));
    ev.factors.values[i] = factors[i].get<double>();
  }

  if (const auto it = obj.find("return_rate"); it != obj.end() && !it->is_null()) {
    ev.return_rate = it->get<double>();
  }
  if (const auto it = obj.find("label"); it != obj.end() && !it->is_null()) {
    ev.label = parse_label(it->get<std::string>());
  }
  check_frame_indices(ev);
  return ev;
}

ordered_json event_to_json(const NewsEvent& ev) {
  ordered_json obj;
  obj["event_id"] = ev.event_id;
  obj["stock_id"] = ev.stock_id;
  obj["published_at"] = ev.published_at.to_string();
  ordered_json sentences = ordered_json::array();
  for (const auto& s : ev.sentences) {
    ordered_json js;
    js["tokens"] = s.tokens;
    ordered_json frames = ordered_json::array();
    for (const auto& f : s.frames) {
      ordered_json jf;
      jf["v"] = f.v;
      jf["a0"] = f.a0;
      jf["a1"] = f.a1;
      frames.push_back(std::move(jf));
    }
    js["frames"] = std::move(frames);
    sentences.push_back(std::move(js));
  }
  obj["sentences"] = std::move(sentences);
  ordered_json factors = ordered_json::array();
  for (const auto& v : ev.factors.values) {
    if (v) {
      factors.push_back(*v);
    } else {
      factors.push_back(nullptr);
    }
  }
  obj["factors"] = std::move(factors);
  if (ev.return_rate) obj["return_rate"] = *ev.return_rate;
  if (ev.label) obj["label"] = std::string(to_string(*ev.label));
  return obj;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) fail(ErrorCode::Io, fmt::format("cannot open '{}'", path.string()));
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  return out;
}

}  // namespace

std::string_view to_string(Label label) noexcept {
  switch (label) {
    case Label::Outperforming: return "outperforming";
    case Label::Neutral: return "neutral";
    case Label::Underperforming: return "underperforming";
  }
  return "unknown";
}

Label parse_label(std::string_view text) {
  if (text == "outperforming") return Label::Outperforming;
  if (text == "neutral") return Label::Neutral;
  if (text == "underperforming") return Label::Underperforming;
  fail(ErrorCode::Parse, fmt::format("unknown label '{}'", text));
}

const std::array<std::string_view, kFactorCount>& factor_names() noexcept { return kFactorNames; }

std::size_t FactorVector::missing_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](const auto& v) { return !v; }));
}

std::size_t NewsEvent::complete_frame_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sentences) {
    n += static_cast<std::size_t>(std::count_if(s.frames.begin(), s.frames.end(),
                                                [](const SrlFrame& f) { return f.complete(); }));
  }
  return n;
}

void sort_canonical(Corpus& corpus) {
  std::stable_sort(corpus.begin(), corpus.end(), [](const NewsEvent& a, const NewsEvent& b) {
    if (a.published_at != b.published_at) return a.published_at < b.published_at;
    return a.event_id < b.event_id;
  });
}

Corpus read_events_jsonl(std::istream& in, std::string_view source) {
  Corpus corpus;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      NewsEvent ev = event_from_json(ordered_json::parse(line));
      if (!seen.insert(ev.event_id).second) {
        fail(ErrorCode::Validation, fmt::format("duplicate event_id '{}'", ev.event_id));
      }
      corpus.push_back(std::move(ev));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Parse, fmt::format("{}:{}: malformed record: {}", source, line_no, e.what()));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
  }
  return corpus;
}

Corpus read_events_jsonl(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_events_jsonl(in, path.string());
}

void write_events_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const auto& ev : corpus) out << event_to_json(ev).dump() << '\n';
}

void write_events_jsonl(const std::filesystem::path& path, const Corpus& corpus) {
  auto out = open_out(path);
  write_events_jsonl(out, corpus);
}

std::size_t attach_embeddings(Corpus& corpus, std::istream& in) {
  if (!detail::read_magic(in, kEmbeddingsMagic)) {
    fail(ErrorCode::Parse, "embeddings file: bad magic (expected SRLPEMB1)");
  }
  const std::uint32_t d_tok = detail::read_u32(in, "d_tok");
  if (d_tok == 0) fail(ErrorCode::Parse, "embeddings file: d_tok is zero");

  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < corpus.size(); ++i) index.emplace(corpus[i].event_id, i);
  std::set<std::pair<std::size_t, std::size_t>> filled;

  std::size_t record = 0;
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::streamoff offset = in.tellg();
    const std::string id = detail::read_string(in, "event id");
    const std::uint32_t sentence_idx = detail::read_u32(in, "sentence index");
    const std::uint32_t token_count = detail::read_u32(in, "token count");

    const auto it = index.find(id);
    if (it == index.end()) {
      fail(ErrorCode::Validation,
           fmt::format("embeddings record {} (offset {}) references unknown event '{}'", record, offset, id));
    }
    NewsEvent& ev = corpus[it->second];
    if (sentence_idx >= ev.sentences.size()) {
      fail(ErrorCode::Validation, fmt::format("embeddings for event '{}' reference sentence {} of {}", id,
                                              sentence_idx, ev.sentences.size()));
    }
    auto& sentence = ev.sentences[sentence_idx];
    if (token_count != sentence.tokens.size()) {
      fail(ErrorCode::ShapeMismatch,
           fmt::format("embeddings for event '{}' sentence {} have {} rows but the sentence has {} tokens", id,
                       sentence_idx, token_count, sentence.tokens.size()));
    }
    if (!filled.emplace(it->second, sentence_idx).second) {
      fail(ErrorCode::Validation,
           fmt::format("duplicate embeddings for event '{}' sentence {}", id, sentence_idx));
    }
    sentence.embeddings.resize(token_count, d_tok);
    for (std::uint32_t r = 0; r < token_count; ++r) {
      for (std::uint32_t c = 0; c < d_tok; ++c) {
        sentence.embeddings(r, c) = static_cast<double>(detail::read_f32(in, "embedding value"));
      }
    }
    ++record;
  }

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (std::size_t s = 0; s < corpus[i].sentences.size(); ++s) {
      if (!filled.contains({i, s})) {
        fail(ErrorCode::Validation,
             fmt::format("event '{}' sentence {} has no embeddings", corpus[i].event_id, s));
      }
    }
  }
  return d_tok;
}

std::size_t attach_embeddings(Corpus& corpus, const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  return attach_embeddings(corpus, in);
}

void write_embeddings(std::ostream& out, const Corpus& corpus, std::size_t d_tok) {
  detail::write_magic(out, kEmbeddingsMagic);
  detail::write_u32(out, static_cast<std::uint32_t>(d_tok));
  for (const auto& ev : corpus) {
    for (std::size_t s = 0; s < ev.sentences.size(); ++s) {
      const auto& emb = ev.sentences[s].embeddings;
      if (static_cast<std::size_t>(emb.cols()) != d_tok ||
          static_cast<std::size_t>(emb.rows()) != ev.sentences[s].tokens.size()) {
        fail(ErrorCode::ShapeMismatch,
             fmt::format("event '{}' sentence {}: embeddings are {}x{}, expected {}x{}", ev.event_id, s,
                         emb.rows(), emb.cols(), ev.sentences[s].tokens.size(), d_tok));
      }
      detail::write_string(out, ev.event_id);
      detail::write_u32(out, static_cast<std::uint32_t>(s));
      detail::write_u32(out, static_cast<std::uint32_t>(emb.rows()));
      for (Eigen::Index r = 0; r < emb.rows(); ++r) {
        for (Eigen::Index c = 0; c < emb.cols(); ++c) detail::write_f32(out, static_cast<float>(emb(r, c)));
      }
    }
  }
}

void write_embeddings(const std::filesystem::path& path, const Corpus& corpus, std::size_t d_tok) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  write_embeddings(out, corpus, d_tok);
}

Corpus parse_events(const std::filesystem::path& events_path, const std::filesystem::path& embeddings_path) {
  Corpus corpus = read_events_jsonl(events_path);
  attach_embeddings(corpus, embeddings_path);
  sort_canonical(corpus);
  return corpus;
}

void validate_corpus(const Corpus& corpus, bool require_embeddings) {
  std::set<std::string_view> ids;
  std::size_t d_tok = 0;
  for (const auto& ev : corpus) {
    if (!ids.insert(ev.event_id).second) {
      fail(ErrorCode::Validation, fmt::format("duplicate event_id '{}'", ev.event_id));
    }
    check_frame_indices(ev);
    if (!require_embeddings) continue;
    for (std::size_t s = 0; s < ev.sentences.size(); ++s) {
      const auto& emb = ev.sentences[s].embeddings;
      if (static_cast<std::size_t>(emb.rows()) != ev.sentences[s].tokens.size()) {
        fail(ErrorCode::ShapeMismatch, fmt::format("event '{}' sentence {}: {} embedding rows for {} tokens",
                                                   ev.event_id, s, emb.rows(), ev.sentences[s].tokens.size()));
      }
      if (emb.rows() == 0) continue;
      if (d_tok == 0) d_tok = static_cast<std::size_t>(emb.cols());
      if (static_cast<std::size_t>(emb.cols()) != d_tok) {
        fail(ErrorCode::ShapeMismatch,
             fmt::format("event '{}': embedding width {} differs from corpus width {}", ev.event_id, emb.cols(), d_tok));
      }
      if (!emb.allFinite()) fail(ErrorCode::NonFinite, fmt::format("event '{}': non-finite embedding", ev.event_id));
    }
  }
}

std::size_t embedding_dim(const Corpus& corpus) noexcept {
  for (const auto& ev : corpus) {
    for (const auto& s : ev.sentences) {
      if (s.embeddings.size() > 0) return static_cast<std::size_t>(s.embeddings.cols());
    }
  }
  return 0;
}

}  // namespace srlp
