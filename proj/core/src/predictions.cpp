#include "srlp/predictions.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "srlp/error.hpp"

namespace srlp {

void write_predictions_csv(std::ostream& out, const std::vector<PredictionRow>& rows) {
  out << kPredictionsHeader << '\n';
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{:.12f},{:.12f},{:.12f}\n", r.event_id, r.stock_id, r.published_at.to_string(),
                       to_string(r.predicted), r.probabilities[0], r.probabilities[1], r.probabilities[2]);
  }
}

void write_predictions_csv(const std::filesystem::path& path, const std::vector<PredictionRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  write_predictions_csv(out, rows);
}

std::vector<PredictionRow> read_predictions_csv(std::istream& in, std::string_view source) {
  std::vector<PredictionRow> rows;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::Parse, fmt::format("{}: missing header", source));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kPredictionsHeader) fail(ErrorCode::Parse, fmt::format("{}: unexpected header '{}'", source, line));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7) {
      fail(ErrorCode::Parse, fmt::format("{}:{}: expected 7 columns, got {}", source, line_no, fields.size()));
    }
    try {
      PredictionRow r;
      r.event_id = fields[0];
      r.stock_id = fields[1];
      r.published_at = Timestamp::parse(fields[2]);
      r.predicted = parse_label(fields[3]);
      for (std::size_t k = 0; k < kLabelCount; ++k) {
        const auto& f = fields[4 + k];
        const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), r.probabilities[k]);
        if (ec != std::errc{} || ptr != f.data() + f.size()) fail(ErrorCode::Parse, fmt::format("bad probability '{}'", f));
      }
      rows.push_back(std::move(r));
    } catch (const Error& e) {
      fail(ErrorCode::Parse, fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
  }
  return rows;
}

std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, fmt::format("cannot open '{}'", path.string()));
  return read_predictions_csv(in, path.string());
}

void write_skipped_csv(std::ostream& out, const std::vector<SkippedEvent>& skipped) {
  out << "event_id,reason\n";
  for (const auto& s : skipped) out << s.event_id << ',' << s.reason << '\n';
}

}  // namespace srlp
