#pragma once

// Flat binary signal files.
//
//   offset  size  field
//   0       4     magic "FGPS"
//   4       4     u32 row count (little-endian)
//   8       4     u32 row length n (little-endian)
//   12      4     reserved, zero
//   16      8*count*n  rows of little-endian IEEE-754 binary64
//
// Used for prior ensembles and recorded sampler trajectories.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "fgps/error.hpp"
#include "fgps/spectral_prior.hpp"

namespace fgps {

inline constexpr std::array<char, 4> kSignalMagic{'F', 'G', 'P', 'S'};
inline constexpr std::size_t kSignalHeaderBytes = 16;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return v;
}

}  // namespace detail

inline std::string encode_signals(const SignalEnsemble& ensemble) {
  if (ensemble.count > std::numeric_limits<std::uint32_t>::max() ||
      ensemble.n > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidParameter("encode_signals: dimensions exceed u32");
  }
  std::string out;
  out.reserve(kSignalHeaderBytes + 8 * ensemble.values.size());
  out.append(kSignalMagic.data(), kSignalMagic.size());
  detail::put_u32(out, static_cast<std::uint32_t>(ensemble.count));
  detail::put_u32(out, static_cast<std::uint32_t>(ensemble.n));
  detail::put_u32(out, 0);
  for (double v : ensemble.values) detail::put_f64(out, v);
  return out;
}

inline SignalEnsemble decode_signals(const std::string& bytes) {
  if (bytes.size() < kSignalHeaderBytes || std::memcmp(bytes.data(), kSignalMagic.data(), 4) != 0) {
    throw IoError("decode_signals: missing FGPS header");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto count = static_cast<std::size_t>(detail::get_le(p + 4, 4));
  const auto n = static_cast<std::size_t>(detail::get_le(p + 8, 4));
  if (bytes.size() != kSignalHeaderBytes + 8 * count * n) {
    throw IoError("decode_signals: payload size does not match header (" + std::to_string(count) + " x " +
                  std::to_string(n) + ")");
  }
  SignalEnsemble ensemble(count, n);
  for (std::size_t i = 0; i < count * n; ++i) {
    ensemble.values[i] = std::bit_cast<double>(detail::get_le(p + kSignalHeaderBytes + 8 * i, 8));
  }
  return ensemble;
}

inline void write_signals(const std::filesystem::path& path, const SignalEnsemble& ensemble) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_signals(ensemble);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline SignalEnsemble read_signals(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_signals(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace fgps
