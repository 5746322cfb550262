#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "trafficaug/pcap.hpp"
#include "trafficaug/types.hpp"

namespace trafficaug {

/// Every packet becomes a vector of exactly this many byte slots unless the
/// caller overrides it.
inline constexpr int kDefaultFixedLen = 1480;

struct PreprocessConfig {
  int fixed_len = kDefaultFixedLen;
  /// When set, the 14-byte Ethernet header is dropped before truncation, so
  /// the vector starts at the IP layer. Off by default: the full frame is
  /// part of the traffic's signature.
  bool strip_ethernet_header = false;
};

/// Truncates to `fixed_len` bytes or right-pads with zeros. Keeps the prefix.
Bytes fix_length(std::span<const std::uint8_t> bytes, int fixed_len);

/// Maps bytes to doubles in [0, 1] by dividing by 255.
Vector normalize_bytes(std::span<const std::uint8_t> bytes);

/// Inverse of normalize_bytes for values produced by it (round to nearest).
Bytes denormalize(const Vector& values);

/// Full packet-to-vector path: optional header strip, fix_length, normalize.
Vector packet_to_pbv(const RawPacket& packet, const PreprocessConfig& config);

/// Stacks packets row-wise into an N x fixed_len matrix.
Matrix packets_to_pbm(std::span<const LabeledPacket> packets,
                      const PreprocessConfig& config);

// ---------------------------------------------------------------------------
// CSV persistence. One row per vector: fixed_len doubles then an integer
// class label, comma-separated, no header. Doubles are written with
// shortest-round-trip formatting, so read-after-write is exact.
// ---------------------------------------------------------------------------

struct CsvData {
  Matrix pbm;
  std::vector<int> labels;
};

void write_csv(std::ostream& os, const Matrix& pbm, std::span<const int> labels);
void write_csv_file(const std::filesystem::path& path, const Matrix& pbm,
                    std::span<const int> labels);

/// Parses a full CSV stream. Ragged rows, non-numeric fields, or a
/// non-integer label column raise ParseError carrying the 1-based line.
CsvData read_csv(std::istream& is);
CsvData read_csv_file(const std::filesystem::path& path);

}  // namespace trafficaug
