#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "srlp/events.hpp"

namespace srlp {

struct PredictionRow {
  std::string event_id;
  std::string stock_id;
  Timestamp published_at;
  Label predicted = Label::Neutral;
  /// Indexed by Label: outperform, neutral, underperform.
  std::array<double, kLabelCount> probabilities{};
};

struct SkippedEvent {
  std::string event_id;
  std::string reason;
};

struct Predictions {
  std::vector<PredictionRow> rows;
  std::vector<SkippedEvent> skipped;
};

inline constexpr std::string_view kPredictionsHeader =
    "event_id,stock_id,published_at,pred_label,p_outperform,p_neutral,p_underperform";

void write_predictions_csv(std::ostream& out, const std::vector<PredictionRow>& rows);
void write_predictions_csv(const std::filesystem::path& path, const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions_csv(std::istream& in, std::string_view source = "<predictions>");
std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path);

void write_skipped_csv(std::ostream& out, const std::vector<SkippedEvent>& skipped);

}  // namespace srlp
