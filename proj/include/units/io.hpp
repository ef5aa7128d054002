#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "units/grid.hpp"
#include "units/mask.hpp"

namespace units {

// Raw grid format: one-line JSON header {shape, dtype, layout}, newline,
// then the payload. Complex grids store little-endian float32 interleaved
// (re, im); masks store one byte per location.

namespace io_detail {

inline void write_f32_le(std::string& buf, float v) {
  std::uint32_t u;
  static_assert(sizeof(u) == sizeof(v));
  std::memcpy(&u, &v, 4);
  buf.push_back(static_cast<char>(u & 0xff));
  buf.push_back(static_cast<char>((u >> 8) & 0xff));
  buf.push_back(static_cast<char>((u >> 16) & 0xff));
  buf.push_back(static_cast<char>((u >> 24) & 0xff));
}

inline float read_f32_le(const unsigned char* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                          (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for read: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

inline std::pair<nlohmann::json, std::size_t> split_header(
    const std::string& bytes, const std::string& context) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos)
    throw std::runtime_error(context + ": missing header line");
  return {nlohmann::json::parse(bytes.substr(0, nl)), nl + 1};
}

}  // namespace io_detail

inline std::string serialize_grid(const ComplexGrid& g) {
  const GridShape s = g.shape();
  nlohmann::json header = {
      {"shape", {s.nx, s.ny, s.nt, s.nc}},
      {"dtype", "complex64"},
      {"layout", "row-major"},
  };
  std::string bytes = header.dump();
  bytes.push_back('\n');
  bytes.reserve(bytes.size() + g.size() * 8);
  for (std::size_t i = 0; i < g.size(); ++i) {
    io_detail::write_f32_le(bytes, static_cast<float>(g[i].real()));
    io_detail::write_f32_le(bytes, static_cast<float>(g[i].imag()));
  }
  return bytes;
}

inline ComplexGrid deserialize_grid(const std::string& bytes) {
  auto [header, offset] = io_detail::split_header(bytes, "grid");
  if (header.at("dtype").get<std::string>() != "complex64")
    throw std::runtime_error("grid: unexpected dtype");
  const auto shape = header.at("shape");
  ComplexGrid g(shape.at(0).get<int>(), shape.at(1).get<int>(),
                shape.at(2).get<int>(), shape.at(3).get<int>());
  if (bytes.size() - offset != g.size() * 8)
    throw std::runtime_error("grid: payload size mismatch");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const float re = io_detail::read_f32_le(p + 8 * i);
    const float im = io_detail::read_f32_le(p + 8 * i + 4);
    g[i] = {re, im};
  }
  return g;
}

inline std::string serialize_mask(const SamplingMask& m) {
  nlohmann::json header = {
      {"shape", {m.nx(), m.ny(), m.nt()}},
      {"dtype", "u8"},
      {"layout", "row-major"},
  };
  std::string bytes = header.dump();
  bytes.push_back('\n');
  bytes.append(reinterpret_cast<const char*>(m.bits().data()), m.size());
  return bytes;
}

inline SamplingMask deserialize_mask(const std::string& bytes) {
  auto [header, offset] = io_detail::split_header(bytes, "mask");
  if (header.at("dtype").get<std::string>() != "u8")
    throw std::runtime_error("mask: unexpected dtype");
  const auto shape = header.at("shape");
  SamplingMask m(shape.at(0).get<int>(), shape.at(1).get<int>(),
                 shape.at(2).get<int>());
  if (bytes.size() - offset != m.size())
    throw std::runtime_error("mask: payload size mismatch");
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = static_cast<std::uint8_t>(bytes[offset + i] != 0);
  return m;
}

inline void save_grid(const std::filesystem::path& path,
                      const ComplexGrid& g) {
  io_detail::write_file(path, serialize_grid(g));
}

inline ComplexGrid load_grid(const std::filesystem::path& path) {
  return deserialize_grid(io_detail::read_file(path));
}

inline void save_mask(const std::filesystem::path& path,
                      const SamplingMask& m) {
  io_detail::write_file(path, serialize_mask(m));
}

inline SamplingMask load_mask(const std::filesystem::path& path) {
  return deserialize_mask(io_detail::read_file(path));
}

/// Fixed-format float for CSV cells; identical doubles always render to
/// identical text, which is what the byte-determinism contract needs.
inline std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns)
      : columns_(std::move(columns)) {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) text_ += ',';
      text_ += columns_[i];
    }
    text_ += '\n';
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size())
      throw std::invalid_argument("CsvWriter: cell count mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  const std::string& text() const { return text_; }

  void save(const std::filesystem::path& path) const {
    io_detail::write_file(path, text_);
  }

 private:
  std::vector<std::string> columns_;
  std::string text_;
};

}  // namespace units
