#include <sstream>

#include <gtest/gtest.h>

#include <srlp/error.hpp>
#include <srlp/events.hpp>

#include "testkit.hpp"

using namespace srlp;

namespace {

std::string one_event_line(std::string_view frames = R"([{"v":[1],"a0":[0],"a1":[2]}])") {
  std::string factors = "[";
  for (std::size_t k = 0; k < kFactorCount; ++k) factors += (k ? "," : "") + std::to_string(k);
  factors += "]";
  return std::string(R"({"event_id":"e1","stock_id":"600000","published_at":"2021-01-04T10:15:00+08:00",)") +
         R"("sentences":[{"tokens":["A","buys","B"],"frames":)" + std::string(frames) + "}],\"factors\":" + factors +
         "}\n";
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Events, EmptyFileIsEmptyCorpus) {
  std::istringstream in("");
  EXPECT_TRUE(read_events_jsonl(in).empty());
}

TEST(Events, FactorNamesAreTwentyFourAndUnique) {
  const auto& names = factor_names();
  std::set<std::string_view> unique(names.begin(), names.end());
  EXPECT_EQ(unique.size(), kFactorCount);
  EXPECT_EQ(names.front(), "dividend_yield");
  EXPECT_EQ(names.back(), "volume_ratio");
}

TEST(Events, SingleEventWithEmbeddingsRoundTrips) {
  std::istringstream in(one_event_line());
  auto corpus = read_events_jsonl(in);
  ASSERT_EQ(corpus.size(), 1u);
  auto& s = corpus[0].sentences[0];
  s.embeddings = Eigen::MatrixXd(3, 4);
  s.embeddings << 1, 2, 3, 4, 5, 6, 7, 8, 0.5, 0.25, -1, -2;

  std::stringstream bin;
  write_embeddings(bin, corpus, 4);
  auto reread = read_events_jsonl(*std::make_unique<std::istringstream>(one_event_line()));
  EXPECT_EQ(attach_embeddings(reread, bin), 4u);
  EXPECT_EQ(reread[0].sentences[0].embeddings.rows(), 3);
  EXPECT_EQ(reread[0].sentences[0].embeddings.cols(), 4);
  EXPECT_EQ(reread[0].sentences[0].embeddings, s.embeddings);
  EXPECT_NO_THROW(validate_corpus(reread, true));
  EXPECT_EQ(embedding_dim(reread), 4u);
}

TEST(Events, EmbeddingsHeaderLayout) {
  std::istringstream in(one_event_line());
  auto corpus = read_events_jsonl(in);
  corpus[0].sentences[0].embeddings = Eigen::MatrixXd::Zero(3, 2);
  std::ostringstream bin;
  write_embeddings(bin, corpus, 2);
  const auto bytes = bin.str();
  // magic, d_tok, id length, "e1", sentence, token count, 3*2 f32
  ASSERT_EQ(bytes.size(), 8u + 4 + 4 + 2 + 4 + 4 + 6 * 4);
  EXPECT_EQ(bytes.substr(0, 8), "SRLPEMB1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2);
  EXPECT_EQ(bytes.substr(16, 2), "e1");
}

TEST(Events, FrameIndexOutOfRangeNamesTheEvent) {
  std::istringstream in(one_event_line(R"([{"v":[1],"a0":[7],"a1":[2]}])"));
  try {
    read_events_jsonl(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("e1"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("7"), std::string::npos) << e.what();
  }
}

TEST(Events, MalformedLineNamesTheLine) {
  std::istringstream in(one_event_line() + "{not json\n");
  try {
    read_events_jsonl(in, "events.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Parse);
    EXPECT_NE(std::string(e.what()).find("events.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(Events, RejectsWrongFactorCountAndEmptyVerb) {
  auto line = one_event_line();
  const auto pos = line.find("\"factors\":[0,");
  auto short_factors = line;
  short_factors.replace(pos, 13, "\"factors\":[");
  std::istringstream a(short_factors);
  EXPECT_THROW(read_events_jsonl(a), Error);
  std::istringstream b(one_event_line(R"([{"v":[],"a0":[0],"a1":[2]}])"));
  EXPECT_THROW(read_events_jsonl(b), Error);
}

TEST(Events, DuplicateIdsRejected) {
  std::istringstream in(one_event_line() + one_event_line());
  EXPECT_THROW(validate_corpus(read_events_jsonl(in), false), Error);
}

TEST(Events, EmbeddingErrors) {
  std::istringstream in(one_event_line());
  auto corpus = read_events_jsonl(in);
  corpus[0].sentences[0].embeddings = Eigen::MatrixXd::Zero(3, 2);
  std::ostringstream ok;
  write_embeddings(ok, corpus, 2);

  // Token-count mismatch names the event.
  auto wrong = corpus;
  wrong[0].sentences[0].tokens.pop_back();
  wrong[0].sentences[0].frames.clear();
  wrong[0].sentences[0].embeddings = Eigen::MatrixXd::Zero(2, 2);
  std::ostringstream bad_rows;
  write_embeddings(bad_rows, wrong, 2);
  auto target = read_events_jsonl(*std::make_unique<std::istringstream>(one_event_line()));
  std::istringstream bad_in(bad_rows.str());
  try {
    attach_embeddings(target, bad_in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("e1"), std::string::npos);
  }

  // Dangling reference.
  auto other = corpus;
  other[0].event_id = "ghost";
  std::ostringstream dangling;
  write_embeddings(dangling, other, 2);
  auto target2 = read_events_jsonl(*std::make_unique<std::istringstream>(one_event_line()));
  std::istringstream dangling_in(dangling.str());
  EXPECT_EQ(code_of([&] { attach_embeddings(target2, dangling_in); }), ErrorCode::Validation);

  // Bad magic.
  auto target3 = read_events_jsonl(*std::make_unique<std::istringstream>(one_event_line()));
  std::string bytes = ok.str();
  bytes[0] = 'X';
  std::istringstream bad_magic(bytes);
  EXPECT_THROW(attach_embeddings(target3, bad_magic), Error);

  // Missing block.
  auto target4 = read_events_jsonl(*std::make_unique<std::istringstream>(one_event_line()));
  std::istringstream header_only(ok.str().substr(0, 12));
  EXPECT_THROW(attach_embeddings(target4, header_only), Error);
}

TEST(Events, CanonicalWriteIsByteStable) {
  testkit::SyntheticOptions o;
  o.events = 30;
  auto corpus = testkit::make_synthetic_corpus(o);
  std::ostringstream first;
  write_events_jsonl(first, corpus);
  std::istringstream in(first.str());
  const auto parsed = read_events_jsonl(in);
  std::ostringstream second;
  write_events_jsonl(second, parsed);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_EQ(parsed[3].label, corpus[3].label);
  EXPECT_EQ(parsed[3].return_rate, corpus[3].return_rate);
  EXPECT_EQ(parsed[3].factors.values, corpus[3].factors.values);
}

TEST(Events, ParseEventsSortsCanonically) {
  testkit::SyntheticOptions o;
  o.events = 12;
  auto corpus = testkit::make_synthetic_corpus(o);
  std::reverse(corpus.begin(), corpus.end());
  const auto dir = testkit::temp_dir("events_sort");
  write_events_jsonl(dir / "e.jsonl", corpus);
  write_embeddings(dir / "e.bin", corpus, o.d_tok);
  const auto parsed = parse_events(dir / "e.jsonl", dir / "e.bin");
  ASSERT_EQ(parsed.size(), 12u);
  for (std::size_t i = 1; i < parsed.size(); ++i) EXPECT_LT(parsed[i - 1].published_at, parsed[i].published_at);
  // f32 narrowing on the way through the binary file.
  EXPECT_NEAR(parsed[0].sentences[0].embeddings(0, 0), corpus.back().sentences[0].embeddings(0, 0), 1e-6);
}

TEST(Events, CompleteFrameCountIgnoresPartialFrames) {
  std::istringstream in(one_event_line(R"([{"v":[1],"a0":[0],"a1":[2]},{"v":[1],"a0":[],"a1":[2]}])"));
  const auto corpus = read_events_jsonl(in);
  EXPECT_EQ(corpus[0].sentences[0].frames.size(), 2u);
  EXPECT_EQ(corpus[0].complete_frame_count(), 1u);
}

TEST(Labels, TextRoundTrip) {
  for (const auto l : {Label::Outperforming, Label::Neutral, Label::Underperforming}) {
    EXPECT_EQ(parse_label(to_string(l)), l);
  }
  EXPECT_THROW(parse_label("bullish"), Error);
}
