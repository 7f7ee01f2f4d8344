#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "isf/common.hpp"
#include "isf/sha256.hpp"

namespace isf {

inline constexpr const char* kSchemaVersion = "isfgan/1";

// Tensor serialization: <base>.f32 is a flat little-endian 32-bit float
// buffer; <base>.json lists tensor names, shapes and byte offsets into it.

namespace io_detail {

inline void write_f32_le(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  const uint8_t bytes[4] = {uint8_t(bits), uint8_t(bits >> 8),
                            uint8_t(bits >> 16), uint8_t(bits >> 24)};
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

inline float read_f32_le(const uint8_t* p) {
  const uint32_t bits = uint32_t(p[0]) | (uint32_t(p[1]) << 8) |
                        (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CorruptDataset("cannot open " + path.string());
  is.seekg(0, std::ios::end);
  const std::streamoff len = is.tellg();
  is.seekg(0);
  std::vector<uint8_t> buf(static_cast<size_t>(len));
  is.read(reinterpret_cast<char*>(buf.data()), len);
  if (!is) throw CorruptDataset("short read on " + path.string());
  return buf;
}

}  // namespace io_detail

// Writes <base>.f32 + <base>.json; returns the sha256 of the binary file.
template <class T>
std::string save_tensors(const std::filesystem::path& base,
                         const std::vector<TensorRef<T>>& refs) {
  const std::filesystem::path bin_path = base.string() + ".f32";
  const std::filesystem::path hdr_path = base.string() + ".json";

  std::string payload;
  payload.reserve(size_t(total_size(refs)) * 4);
  nlohmann::json tensors = nlohmann::json::array();
  int64_t offset = 0;
  for (const auto& r : refs) {
    tensors.push_back({{"name", r.name},
                       {"shape", {r.rows, r.cols}},
                       {"byte_offset", offset}});
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const float v = float(r.data[i]);
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      payload.push_back(char(bits & 0xff));
      payload.push_back(char((bits >> 8) & 0xff));
      payload.push_back(char((bits >> 16) & 0xff));
      payload.push_back(char((bits >> 24) & 0xff));
    }
    offset += r.size() * 4;
  }

  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw std::runtime_error("cannot write " + bin_path.string());
  bin.write(payload.data(), std::streamsize(payload.size()));
  bin.flush();
  if (!bin) throw std::runtime_error("write failed: " + bin_path.string());

  nlohmann::json header = {{"schema_version", kSchemaVersion},
                           {"dtype", "f32"},
                           {"byte_order", "little"},
                           {"total_bytes", offset},
                           {"tensors", tensors}};
  std::ofstream hdr(hdr_path, std::ios::trunc);
  hdr << header.dump(2) << "\n";
  hdr.flush();
  if (!hdr) throw std::runtime_error("write failed: " + hdr_path.string());

  return sha256_hex(payload.data(), payload.size());
}

// Loads into pre-shaped refs; names and shapes must match the header.
template <class T>
void load_tensors(const std::filesystem::path& base,
                  const std::vector<TensorRef<T>>& refs) {
  const std::filesystem::path bin_path = base.string() + ".f32";
  const std::filesystem::path hdr_path = base.string() + ".json";

  std::ifstream hdr(hdr_path);
  if (!hdr) throw InvalidCheckpoint("missing header " + hdr_path.string());
  nlohmann::json header;
  hdr >> header;

  const auto buf = io_detail::read_file(bin_path);
  if (int64_t(buf.size()) != header.at("total_bytes").get<int64_t>()) {
    throw InvalidCheckpoint("tensor buffer size mismatch: " +
                            bin_path.string());
  }

  const auto& tensors = header.at("tensors");
  if (tensors.size() != refs.size()) {
    throw InvalidCheckpoint("tensor count mismatch: " + hdr_path.string());
  }
  for (size_t ti = 0; ti < refs.size(); ++ti) {
    const auto& meta = tensors[ti];
    const auto& r = refs[ti];
    if (meta.at("name").get<std::string>() != r.name) {
      throw InvalidCheckpoint("tensor name mismatch: expected " + r.name);
    }
    const auto shape = meta.at("shape").get<std::vector<int64_t>>();
    if (shape.size() != 2 || shape[0] != r.rows || shape[1] != r.cols) {
      throw InvalidCheckpoint("tensor shape mismatch: " + r.name);
    }
    const int64_t off = meta.at("byte_offset").get<int64_t>();
    if (off < 0 || off + r.size() * 4 > int64_t(buf.size())) {
      throw InvalidCheckpoint("tensor offset out of range: " + r.name);
    }
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      r.data[i] = T(io_detail::read_f32_le(buf.data() + off + i * 4));
    }
  }
}

// Raw row-major f32 matrix files (dataset codes/labels).
template <class T>
std::string save_f32_matrix(const std::filesystem::path& path,
                            const Mat<T>& m) {
  std::string payload;
  payload.reserve(size_t(m.size()) * 4);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const float v = float(m(i, j));
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      payload.push_back(char(bits & 0xff));
      payload.push_back(char((bits >> 8) & 0xff));
      payload.push_back(char((bits >> 16) & 0xff));
      payload.push_back(char((bits >> 24) & 0xff));
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(payload.data(), std::streamsize(payload.size()));
  os.flush();
  if (!os) throw std::runtime_error("write failed: " + path.string());
  return sha256_hex(payload.data(), payload.size());
}

template <class T>
Mat<T> load_f32_matrix(const std::filesystem::path& path, Eigen::Index rows,
                       Eigen::Index cols,
                       const std::string& expected_sha256 = "") {
  const auto buf = io_detail::read_file(path);
  if (int64_t(buf.size()) != int64_t(rows) * cols * 4) {
    throw CorruptDataset("file size does not match declared shape: " +
                         path.string());
  }
  if (!expected_sha256.empty()) {
    if (sha256_hex(buf.data(), buf.size()) != expected_sha256) {
      throw CorruptDataset("digest mismatch: " + path.string());
    }
  }
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = T(io_detail::read_f32_le(buf.data() + (i * cols + j) * 4));
    }
  }
  return m;
}

}  // namespace isf
