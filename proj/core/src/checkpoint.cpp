#include "srlp/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "srlp/detail/binary_io.hpp"
#include "srlp/error.hpp"

namespace srlp {
namespace {

constexpr std::string_view kModelPrefix = "model.";
constexpr std::string_view kScalerMean = "factor_scaler.mean";
constexpr std::string_view kScalerStd = "factor_scaler.std";

template <class T>
T parse_number(const std::map<std::string, std::string>& entries, const std::string& key) {
  const auto it = entries.find(key);
  if (it == entries.end()) fail(ErrorCode::Parse, fmt::format("checkpoint config lacks '{}'", key));
  T value{};
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    fail(ErrorCode::Parse, fmt::format("checkpoint config '{}' has bad value '{}'", key, s));
  }
  return value;
}

template <class Tensor>
void write_tensor(std::ostream& out, std::string_view name, const Tensor& t, bool is_vector) {
  detail::write_string(out, name);
  if (is_vector) {
    detail::write_u32(out, 1);
    detail::write_u32(out, static_cast<std::uint32_t>(t.size()));
  } else {
    detail::write_u32(out, 2);
    detail::write_u32(out, static_cast<std::uint32_t>(t.rows()));
    detail::write_u32(out, static_cast<std::uint32_t>(t.cols()));
  }
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.cols(); ++j) detail::write_f64(out, t(i, j));
  }
}

struct RawTensor {
  std::vector<std::uint32_t> dims;
  std::vector<double> data;
};

template <class Tensor>
void assign_tensor(const std::string& name, const RawTensor& raw, Tensor& t, bool is_vector) {
  const bool shape_ok = is_vector ? (raw.dims.size() == 1 && raw.dims[0] == static_cast<std::uint32_t>(t.size()))
                                  : (raw.dims.size() == 2 && raw.dims[0] == static_cast<std::uint32_t>(t.rows()) &&
                                     raw.dims[1] == static_cast<std::uint32_t>(t.cols()));
  if (!shape_ok) {
    std::string got;
    for (auto d : raw.dims) got += (got.empty() ? "" : "x") + std::to_string(d);
    fail(ErrorCode::ShapeMismatch, fmt::format("checkpoint tensor '{}' has shape [{}], config expects {}x{}", name,
                                               got, t.rows(), t.cols()));
  }
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = raw.data[k++];
  }
}

template <class T>
constexpr bool is_vector_v = T::ColsAtCompileTime == 1;

}  // namespace

std::map<std::string, std::string> model_config_entries(const ModelConfig& c) {
  std::map<std::string, std::string> m;
  const std::string p(kModelPrefix);
  m[p + "d_tok"] = std::to_string(c.d_tok);
  m[p + "d_factors"] = std::to_string(c.d_factors);
  m[p + "d_model"] = std::to_string(c.d_model);
  m[p + "n_layers"] = std::to_string(c.n_layers);
  m[p + "n_heads"] = std::to_string(c.n_heads);
  m[p + "ffn_ratio"] = std::to_string(c.ffn_ratio);
  m[p + "max_frames"] = std::to_string(c.max_frames);
  m[p + "dropout"] = fmt::format("{}", c.dropout);
  m[p + "layer_norm_eps"] = fmt::format("{}", c.layer_norm_eps);
  return m;
}

ModelConfig model_config_from_entries(const std::map<std::string, std::string>& entries) {
  const std::string p(kModelPrefix);
  ModelConfig c;
  c.d_tok = parse_number<std::size_t>(entries, p + "d_tok");
  c.d_factors = parse_number<std::size_t>(entries, p + "d_factors");
  c.d_model = parse_number<std::size_t>(entries, p + "d_model");
  c.n_layers = parse_number<std::size_t>(entries, p + "n_layers");
  c.n_heads = parse_number<std::size_t>(entries, p + "n_heads");
  c.ffn_ratio = parse_number<std::size_t>(entries, p + "ffn_ratio");
  c.max_frames = parse_number<std::size_t>(entries, p + "max_frames");
  c.dropout = parse_number<double>(entries, p + "dropout");
  c.layer_norm_eps = parse_number<double>(entries, p + "layer_norm_eps");
  c.validate();
  return c;
}

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  detail::write_magic(out, kCheckpointMagic);
  auto entries = ckpt.metadata;
  for (auto& [k, v] : model_config_entries(ckpt.params.config)) entries[k] = v;
  detail::write_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [k, v] : entries) {
    detail::write_string(out, k);
    detail::write_string(out, v);
  }

  std::uint32_t count = 0;
  for_each_tensor([&](const std::string&, const auto&) { ++count; }, ckpt.params);
  if (ckpt.scaler) count += 2;
  detail::write_u32(out, count);
  for_each_tensor(
      [&](const std::string& name, const auto& t) {
        write_tensor(out, name, t, is_vector_v<std::decay_t<decltype(t)>>);
      },
      ckpt.params);
  if (ckpt.scaler) {
    write_tensor(out, kScalerMean, ckpt.scaler->mean(), true);
    write_tensor(out, kScalerStd, ckpt.scaler->stddev(), true);
  }
  if (!out) fail(ErrorCode::Io, "failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  save_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(std::istream& in) {
  if (!detail::read_magic(in, kCheckpointMagic)) fail(ErrorCode::Parse, "checkpoint: bad magic (expected SRLPCKPT)");
  std::map<std::string, std::string> entries;
  const std::uint32_t n_entries = detail::read_u32(in, "config entry count");
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    std::string key = detail::read_string(in, "config key");
    entries[key] = detail::read_string(in, "config value");
  }

  Checkpoint ckpt;
  ckpt.params = ModelParams::zeros(model_config_from_entries(entries));
  for (const auto& [k, v] : entries) {
    if (!k.starts_with(kModelPrefix)) ckpt.metadata[k] = v;
  }

  std::map<std::string, RawTensor> raw;
  const std::uint32_t n_tensors = detail::read_u32(in, "tensor count");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = detail::read_string(in, "tensor name");
    RawTensor t;
    const std::uint32_t rank = detail::read_u32(in, "tensor rank");
    if (rank == 0 || rank > 2) fail(ErrorCode::Parse, fmt::format("checkpoint tensor '{}' has rank {}", name, rank));
    std::uint64_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(detail::read_u32(in, "tensor dim"));
      total *= t.dims.back();
    }
    if (total > (1ULL << 30)) fail(ErrorCode::Parse, fmt::format("checkpoint tensor '{}' is implausibly large", name));
    t.data.resize(total);
    for (auto& x : t.data) x = detail::read_f64(in, "tensor data");
    if (!raw.emplace(name, std::move(t)).second) {
      fail(ErrorCode::Parse, fmt::format("checkpoint tensor '{}' appears twice", name));
    }
  }

  std::set<std::string> used;
  for_each_tensor(
      [&](const std::string& name, auto& t) {
        const auto it = raw.find(name);
        if (it == raw.end()) fail(ErrorCode::Parse, fmt::format("checkpoint lacks tensor '{}'", name));
        assign_tensor(name, it->second, t, is_vector_v<std::decay_t<decltype(t)>>);
        used.insert(name);
      },
      ckpt.params);

  const auto mean_it = raw.find(std::string(kScalerMean));
  const auto std_it = raw.find(std::string(kScalerStd));
  if ((mean_it == raw.end()) != (std_it == raw.end())) {
    fail(ErrorCode::Parse, "checkpoint has only half of the factor scaler");
  }
  if (mean_it != raw.end()) {
    Eigen::VectorXd mean(static_cast<Eigen::Index>(kFactorCount));
    Eigen::VectorXd stddev(static_cast<Eigen::Index>(kFactorCount));
    assign_tensor(std::string(kScalerMean), mean_it->second, mean, true);
    assign_tensor(std::string(kScalerStd), std_it->second, stddev, true);
    ckpt.scaler = FactorScaler::from_moments(std::move(mean), std::move(stddev));
    used.insert(std::string(kScalerMean));
    used.insert(std::string(kScalerStd));
  }
  for (const auto& [name, _] : raw) {
    if (!used.contains(name)) fail(ErrorCode::Parse, fmt::format("checkpoint has unexpected tensor '{}'", name));
  }
  if (!ckpt.params.all_finite()) fail(ErrorCode::NonFinite, "checkpoint holds non-finite parameters");
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, fmt::format("cannot open '{}'", path.string()));
  return load_checkpoint(in);
}

}  // namespace srlp
