#include "config.hpp"

#include <charconv>
#include <fstream>
#include <istream>

#include <fmt/format.h>

#include <srlp/error.hpp>

namespace srlp::cli {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T number(const Settings& s, const std::string& key) {
  const auto& text = s.at(key);
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    fail(ErrorCode::InvalidArgument, fmt::format("setting {} = '{}' is not a valid number", key, text));
  }
  return v;
}

bool flag(const Settings& s, const std::string& key) {
  const auto& v = s.at(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::InvalidArgument, fmt::format("setting {} = '{}' is not a boolean", key, v));
}

}  // namespace

Settings default_settings() {
  Settings s = TrainConfig{}.entries();
  for (const auto& [k, v] : StrategyConfig{}.entries()) s[k] = v;
  s["train.mask_seed"] = "";
  const LabelThresholds t;
  s["label.a"] = fmt::format("{}", t.a);
  s["label.b"] = fmt::format("{}", t.b);
  s["label.c"] = fmt::format("{}", t.c);
  s["label.d"] = fmt::format("{}", t.d);
  s["label.horizon"] = ReturnHorizon::next_close().to_string();
  s["split.scheme"] = "in";
  s["split.seed"] = "0";
  s["split.cutoff"] = "";
  return s;
}

Settings parse_config(std::istream& in, std::string_view source) {
  Settings out;
  std::optional<std::string> top_seed;
  std::string section, line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    if (view.front() == '[') {
      if (view.back() != ']') fail(ErrorCode::Parse, fmt::format("{}:{}: unterminated section header", source, line_no));
      section = std::string(trim(view.substr(1, view.size() - 2)));
      continue;
    }
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) fail(ErrorCode::Parse, fmt::format("{}:{}: expected key = value", source, line_no));
    const auto key = trim(view.substr(0, eq));
    auto value = trim(view.substr(eq + 1));
    if (key.empty()) fail(ErrorCode::Parse, fmt::format("{}:{}: empty key", source, line_no));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (full == "seed") {
      top_seed = std::string(value);
      continue;
    }
    out[full] = std::string(value);
  }
  if (top_seed) {
    out.try_emplace("train.seed", *top_seed);
    out.try_emplace("split.seed", *top_seed);
  }
  return out;
}

Settings load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, fmt::format("cannot open config file {}", path.string()));
  return parse_config(in, path.string());
}

void merge_settings(Settings& base, const Settings& layer, std::string_view origin) {
  for (const auto& [k, v] : layer) {
    const auto it = base.find(k);
    if (it == base.end()) fail(ErrorCode::InvalidArgument, fmt::format("{}: unknown setting '{}'", origin, k));
    it->second = v;
  }
}

TrainConfig train_config(const Settings& s) {
  TrainConfig c;
  c.seed = number<std::uint64_t>(s, "train.seed");
  if (!s.at("train.mask_seed").empty()) c.mask_seed = number<std::uint64_t>(s, "train.mask_seed");
  c.epochs = number<std::size_t>(s, "train.epochs");
  c.batch_size = number<std::size_t>(s, "train.batch_size");
  c.learning_rate = number<double>(s, "train.learning_rate");
  c.schedule = parse_lr_schedule(s.at("train.schedule"));
  c.warmup_steps = number<std::size_t>(s, "train.warmup_steps");
  c.alpha = number<double>(s, "train.alpha");
  c.mask_roles = MaskRoleDistribution::parse(s.at("train.mask_roles"));
  c.patience = number<std::size_t>(s, "train.patience");
  c.adam.beta1 = number<double>(s, "adam.beta1");
  c.adam.beta2 = number<double>(s, "adam.beta2");
  c.adam.epsilon = number<double>(s, "adam.epsilon");
  c.adam.weight_decay = number<double>(s, "adam.weight_decay");
  c.model.d_model = number<std::size_t>(s, "model.d_model");
  c.model.n_layers = number<std::size_t>(s, "model.n_layers");
  c.model.n_heads = number<std::size_t>(s, "model.n_heads");
  c.model.ffn_ratio = number<std::size_t>(s, "model.ffn_ratio");
  c.model.max_frames = number<std::size_t>(s, "model.max_frames");
  c.model.dropout = number<double>(s, "model.dropout");
  c.model.layer_norm_eps = number<double>(s, "model.layer_norm_eps");
  c.validate();
  return c;
}

StrategyConfig strategy_config(const Settings& s) {
  StrategyConfig c;
  c.allow_short = flag(s, "strategy.allow_short");
  c.horizon = ReturnHorizon::parse(s.at("strategy.horizon"));
  c.capital_fraction = number<double>(s, "strategy.capital_fraction");
  c.max_positions = number<std::size_t>(s, "strategy.max_positions");
  c.cost_bps = number<double>(s, "strategy.cost_bps");
  c.confidence_threshold = number<double>(s, "strategy.confidence_threshold");
  c.initial_equity = number<double>(s, "strategy.initial_equity");
  c.clock.offset_minutes = number<std::int32_t>(s, "strategy.utc_offset_minutes");
  c.clock.close_minute_of_day = number<int>(s, "strategy.session_close_minute");
  c.validate();
  return c;
}

LabelThresholds label_thresholds(const Settings& s) {
  LabelThresholds t;
  t.a = number<double>(s, "label.a");
  t.b = number<double>(s, "label.b");
  t.c = number<double>(s, "label.c");
  t.d = number<double>(s, "label.d");
  t.validate();
  return t;
}

ReturnHorizon label_horizon(const Settings& s) { return ReturnHorizon::parse(s.at("label.horizon")); }

std::uint64_t split_seed(const Settings& s) { return number<std::uint64_t>(s, "split.seed"); }

}  // namespace srlp::cli
