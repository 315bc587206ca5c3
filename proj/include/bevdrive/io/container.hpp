#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>

#include <nlohmann/json.hpp>

#include "bevdrive/core/tensor.hpp"

namespace bevdrive::io {

/// Self-describing record stream: each record is one CBOR document preceded
/// by a little-endian u32 byte length. Field names inside records are the
/// on-disk contract.
class RecordWriter {
 public:
  explicit RecordWriter(const std::filesystem::path& path)
      : f_(path, std::ios::binary) {
    if (!f_) throw std::runtime_error("record writer: cannot open " + path.string());
  }

  void write(const nlohmann::json& j) {
    const std::vector<std::uint8_t> buf = nlohmann::json::to_cbor(j);
    const std::uint32_t len = static_cast<std::uint32_t>(buf.size());
    f_.write(reinterpret_cast<const char*>(&len), sizeof(len));
    f_.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size()));
    if (!f_) throw std::runtime_error("record writer: write failed");
  }

  void close() { f_.close(); }

 private:
  std::ofstream f_;
};

class RecordReader {
 public:
  explicit RecordReader(const std::filesystem::path& path)
      : f_(path, std::ios::binary) {
    if (!f_) throw std::runtime_error("record reader: cannot open " + path.string());
  }

  std::optional<nlohmann::json> next() {
    std::uint32_t len = 0;
    f_.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (f_.gcount() == 0) return std::nullopt;
    if (!f_) throw std::runtime_error("record reader: truncated length prefix");
    std::vector<std::uint8_t> buf(len);
    f_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(len));
    if (!f_) throw std::runtime_error("record reader: truncated record");
    return nlohmann::json::from_cbor(buf);
  }

 private:
  std::ifstream f_;
};

// Binary blob helpers: tensors travel as {"shape": [...], "data": <bytes>}.

inline nlohmann::json tensorBlob(const Tensor<float>& t) {
  std::vector<std::uint8_t> bytes(t.numel() * sizeof(float));
  std::memcpy(bytes.data(), t.data(), bytes.size());
  return {{"shape", t.shape()}, {"data", nlohmann::json::binary(std::move(bytes))}};
}

inline Tensor<float> tensorFromBlob(const nlohmann::json& j) {
  std::vector<int> shape = j.at("shape").get<std::vector<int>>();
  Tensor<float> t(shape);
  const auto& bin = j.at("data").get_binary();
  if (bin.size() != static_cast<std::size_t>(t.numel()) * sizeof(float))
    throw std::runtime_error("tensor blob: size mismatch");
  std::memcpy(t.data(), bin.data(), bin.size());
  return t;
}

inline nlohmann::json floatsBlob(const std::vector<float>& v) {
  std::vector<std::uint8_t> bytes(v.size() * sizeof(float));
  std::memcpy(bytes.data(), v.data(), bytes.size());
  return {{"n", v.size()}, {"data", nlohmann::json::binary(std::move(bytes))}};
}

inline std::vector<float> floatsFromBlob(const nlohmann::json& j) {
  std::vector<float> v(j.at("n").get<std::size_t>());
  const auto& bin = j.at("data").get_binary();
  std::memcpy(v.data(), bin.data(), bin.size());
  return v;
}

}  // namespace bevdrive::io
