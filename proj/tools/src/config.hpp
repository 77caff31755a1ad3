#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <srlp/backtest.hpp>
#include <srlp/dataset.hpp>
#include <srlp/trainer.hpp>

namespace srlp::cli {

/// Effective settings as dotted keys ("train.alpha", "strategy.cost_bps").
/// Layers are merged lowest first: built-in defaults, config file, flags.
using Settings = std::map<std::string, std::string>;

/// Every key the tool understands, with its built-in default.
Settings default_settings();

/// TOML-style document: `key = value` lines, `[section]` headers that prefix
/// the following keys, `#` comments, optional double quotes around values.
/// A top-level `seed` fills train.seed and split.seed unless they are set.
Settings parse_config(std::istream& in, std::string_view source);
Settings load_config(const std::filesystem::path& path);

/// Overlays `layer` onto `base`; unknown keys are an InvalidArgument error.
void merge_settings(Settings& base, const Settings& layer, std::string_view origin);

TrainConfig train_config(const Settings& s);
StrategyConfig strategy_config(const Settings& s);
LabelThresholds label_thresholds(const Settings& s);
ReturnHorizon label_horizon(const Settings& s);
std::uint64_t split_seed(const Settings& s);

}  // namespace srlp::cli
