#include "manifest.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <memory>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <srlp/error.hpp>

namespace srlp::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, fmt::format("cannot read {} for hashing", path.string()));
  const std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) fail(ErrorCode::Io, "sha256 init failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)),
      argv_(std::move(argv)),
      started_(std::chrono::system_clock::now()),
      started_steady_(std::chrono::steady_clock::now()) {}

void RunManifest::add_input(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(path)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    inputs_.insert(inputs_.end(), files.begin(), files.end());
  } else {
    inputs_.push_back(path);
  }
}

void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path); }

void RunManifest::write(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["argv"] = argv_;
  j["seed"] = seed_ ? nlohmann::ordered_json(*seed_) : nlohmann::ordered_json(nullptr);
  j["config"] = config_;
  auto digests = [](const std::vector<std::filesystem::path>& files) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& f : files) list.push_back({{"path", f.string()}, {"sha256", sha256_file(f)}});
    return list;
  };
  j["inputs"] = digests(inputs_);
  j["outputs"] = digests(outputs_);
  const auto elapsed = std::chrono::steady_clock::now() - started_steady_;
  j["timing"] = {
      {"started_utc", fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", std::chrono::floor<std::chrono::seconds>(started_))},
      {"elapsed_seconds", std::chrono::duration<double>(elapsed).count()}};
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorCode::Io, fmt::format("cannot write {}", path.string()));
}

}  // namespace srlp::cli
