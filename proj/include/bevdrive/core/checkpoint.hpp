#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "bevdrive/core/nn.hpp"

namespace bevdrive {

/// Checkpoint container: a JSON header (metadata + tensor index) followed by
/// raw little-endian float32 data. Tensors are stored under their ParamStore
/// names.
struct Checkpoint {
  nlohmann::json meta;
  std::map<std::string, Tensor<float>> tensors;

  static constexpr char kMagic[5] = "BVD1";

  void save(const std::string& path) const {
    nlohmann::json index = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
      index.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
      offset += static_cast<std::uint64_t>(t.numel()) * sizeof(float);
    }
    nlohmann::json header = {{"meta", meta}, {"tensors", index}};
    const std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    f.write(kMagic, 4);
    const std::uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : tensors)
      f.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint not found: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
      throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    nlohmann::json header = nlohmann::json::parse(hs);

    Checkpoint ck;
    ck.meta = header.at("meta");
    for (const auto& e : header.at("tensors")) {
      std::vector<int> shape = e.at("shape").get<std::vector<int>>();
      Tensor<float> t(shape);
      f.read(reinterpret_cast<char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(float)));
      ck.tensors.emplace(e.at("name").get<std::string>(), std::move(t));
    }
    if (!f) throw std::runtime_error("checkpoint: truncated file: " + path);
    return ck;
  }
};

/// Copy a parameter store into a checkpoint tensor map (cast to float).
template <typename S>
void storeParams(Checkpoint& ck, const nn::ParamStore<S>& ps, const std::string& prefix) {
  for (const auto& [name, v] : ps.all())
    ck.tensors.emplace(prefix + name, v.value().template cast<float>());
}

/// Load named tensors back into an existing store; shapes must match.
template <typename S>
void loadParams(const Checkpoint& ck, nn::ParamStore<S>& ps, const std::string& prefix) {
  for (auto& [name, v] : ps.all()) {
    auto it = ck.tensors.find(prefix + name);
    if (it == ck.tensors.end())
      throw std::runtime_error("checkpoint: missing tensor " + prefix + name);
    if (it->second.shape() != v.value().shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + prefix + name);
    v.value() = it->second.template cast<S>();
  }
}

}  // namespace bevdrive
