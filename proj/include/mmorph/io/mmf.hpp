#pragma once

// MMF container: "MMF1" | u32 LE header length | UTF-8 JSON header |
// f32 LE payload, row-major, channel-interleaved.
//
// Header: {"kind": "image"|"field"|"transform", "shape": [...],
//          "channels": n, "spacing": [...], "meta": {...}}

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmorph/error.hpp"
#include "mmorph/grid.hpp"
#include "mmorph/log.hpp"

namespace mmorph::io {

enum class MmfKind { Image, Field, Transform };

inline std::string to_string(MmfKind k) {
  switch (k) {
    case MmfKind::Image: return "image";
    case MmfKind::Field: return "field";
    case MmfKind::Transform: return "transform";
  }
  return "?";
}

inline MmfKind parse_kind(const std::string& s) {
  if (s == "image") return MmfKind::Image;
  if (s == "field") return MmfKind::Field;
  if (s == "transform") return MmfKind::Transform;
  throw DataError("corrupt container: unknown kind '" + s + "'");
}

struct MmfContainer {
  MmfKind kind = MmfKind::Image;
  std::vector<int> shape;
  int channels = 1;
  std::vector<double> spacing;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<float> payload;

  std::size_t expected_values() const {
    std::size_t n = static_cast<std::size_t>(channels);
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }

  friend bool operator==(const MmfContainer&, const MmfContainer&) = default;
};

inline constexpr std::array<char, 4> kMmfMagic{'M', 'M', 'F', '1'};

inline std::string header_json(const MmfContainer& c) {
  nlohmann::json h;
  h["kind"] = to_string(c.kind);
  h["shape"] = c.shape;
  h["channels"] = c.channels;
  h["spacing"] = c.spacing;
  h["meta"] = c.meta;
  return h.dump();
}

inline std::string encode_mmf(const MmfContainer& c) {
  if (c.payload.size() != c.expected_values()) throw DataError("payload size does not match shape");
  const std::string header = header_json(c);
  std::string out;
  out.reserve(8 + header.size() + 4 * c.payload.size());
  out.append(kMmfMagic.data(), kMmfMagic.size());
  const auto len = static_cast<std::uint32_t>(header.size());
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((len >> (8 * b)) & 0xFF));
  out += header;
  for (float f : c.payload) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
  return out;
}

inline MmfContainer decode_mmf(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMmfMagic.data(), 4) != 0) throw DataError("not an MMF file");
  if (bytes.size() < 8) throw DataError("corrupt container");
  std::uint32_t len = 0;
  for (int b = 0; b < 4; ++b) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 + b])) << (8 * b);
  if (bytes.size() < 8 + static_cast<std::size_t>(len)) throw DataError("corrupt container");

  MmfContainer c;
  try {
    const auto h = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
    c.kind = parse_kind(h.at("kind").get<std::string>());
    c.shape = h.at("shape").get<std::vector<int>>();
    c.channels = h.at("channels").get<int>();
    c.spacing = h.at("spacing").get<std::vector<double>>();
    c.meta = h.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt container: ") + e.what());
  }
  for (int d : c.shape) {
    if (d <= 0) throw DataError("corrupt container: non-positive dimension");
  }
  if (c.channels <= 0) throw DataError("corrupt container: non-positive channel count");

  const std::size_t n = c.expected_values();
  const std::size_t offset = 8 + static_cast<std::size_t>(len);
  if (bytes.size() - offset != 4 * n) throw DataError("corrupt container");
  c.payload.resize(n);
  bool has_nan = false;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 4 * i + b])) << (8 * b);
    }
    c.payload[i] = std::bit_cast<float>(bits);
    has_nan = has_nan || std::isnan(c.payload[i]);
  }
  if (has_nan) warn("MMF payload contains NaN values");
  return c;
}

inline void write_mmf(const MmfContainer& c, const std::filesystem::path& path) {
  const std::string bytes = encode_mmf(c);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write failed for '" + path.string() + "'");
}

inline MmfContainer read_mmf(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_mmf(bytes);
}

// Typed conversions. Values are narrowed to float on the way out.

template <int D>
MmfContainer to_container(const GridShape<D>& shape, int channels, std::span<const double> values, MmfKind kind) {
  MmfContainer c;
  c.kind = kind;
  c.shape.assign(shape.dims.begin(), shape.dims.end());
  c.spacing.assign(shape.spacing.begin(), shape.spacing.end());
  c.channels = channels;
  c.payload.reserve(values.size());
  for (double v : values) c.payload.push_back(static_cast<float>(v));
  return c;
}

template <int D>
MmfContainer to_container(const ScalarImage<D>& img) {
  return to_container<D>(img.shape(), img.channels(), img.values(), MmfKind::Image);
}

template <int D>
MmfContainer to_container(const VectorField<D>& f) {
  return to_container<D>(f.shape(), D, f.values(), MmfKind::Field);
}

template <int D>
MmfContainer to_container(const Transform<D>& t) {
  auto c = to_container<D>(t.shape(), D, t.displacement.values(), MmfKind::Transform);
  c.meta["transform_kind"] = t.kind == TransformKind::Lagrangian ? "lagrangian" : "eulerian";
  return c;
}

template <int D>
GridShape<D> shape_of(const MmfContainer& c) {
  if (c.shape.size() != static_cast<std::size_t>(D)) throw DataError("container has the wrong dimensionality");
  Index<D> dims;
  Vec<D> spacing;
  for (int a = 0; a < D; ++a) {
    dims[a] = c.shape[static_cast<std::size_t>(a)];
    spacing[a] = c.spacing.size() == static_cast<std::size_t>(D) ? c.spacing[static_cast<std::size_t>(a)] : 1.0;
  }
  return GridShape<D>(dims, spacing);
}

template <int D>
ScalarImage<D> image_from(const MmfContainer& c) {
  ScalarImage<D> img(shape_of<D>(c), c.channels);
  auto v = img.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = c.payload[i];
  return img;
}

template <int D>
VectorField<D> field_from(const MmfContainer& c) {
  if (c.channels != D) throw DataError("vector field needs one channel per axis");
  VectorField<D> f(shape_of<D>(c));
  auto v = f.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = c.payload[i];
  return f;
}

template <int D>
Transform<D> transform_from(const MmfContainer& c) {
  Transform<D> t{field_from<D>(c), TransformKind::Eulerian};
  if (c.meta.value("transform_kind", std::string()) == "lagrangian") t.kind = TransformKind::Lagrangian;
  return t;
}

}  // namespace mmorph::io
