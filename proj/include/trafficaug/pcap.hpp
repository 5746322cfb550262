#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trafficaug/types.hpp"

namespace trafficaug {

// ---------------------------------------------------------------------------
// Classic pcap container (the fixed-header format, not pcapng).
//
// Layout: one 24-byte global header, then records, each a 16-byte record
// header followed by `incl_len` capture bytes. All integers share one byte
// order for the whole file; the magic number reveals which. A reader that
// sees the magic as 0xA1B2C3D4 is reading integers in the writer's order;
// seeing 0xD4C3B2A1 means every following integer must be byte-swapped.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kPcapMagic = 0xA1B2C3D4u;
inline constexpr std::uint32_t kPcapMagicSwapped = 0xD4C3B2A1u;
inline constexpr std::uint32_t kPcapMagicNanos = 0xA1B23C4Du;
inline constexpr std::uint32_t kPcapMagicNanosSwapped = 0x4D3CB2A1u;
inline constexpr std::uint32_t kPcapngBlockType = 0x0A0D0D0Au;

/// Link-layer type codes (global header `network` field).
inline constexpr std::uint32_t kLinkTypeEthernet = 1;

struct PcapGlobalHeader {
  std::uint32_t magic = kPcapMagic;  ///< As read: kPcapMagic or kPcapMagicSwapped.
  std::uint16_t version_major = 2;
  std::uint16_t version_minor = 4;
  std::int32_t thiszone = 0;
  std::uint32_t sigfigs = 0;
  std::uint32_t snaplen = 65535;
  std::uint32_t network = kLinkTypeEthernet;

  /// True when the file's integers are byte-swapped relative to this reader.
  bool swapped() const { return magic == kPcapMagicSwapped; }
};

struct RawPacket {
  std::uint32_t ts_sec = 0;
  std::uint32_t ts_usec = 0;
  std::uint32_t incl_len = 0;  ///< Captured byte count; always == bytes.size().
  std::uint32_t orig_len = 0;  ///< On-the-wire length.
  Bytes bytes;
};

struct PcapFile {
  PcapGlobalHeader header;
  std::vector<RawPacket> packets;
};

/// Parses a complete classic-pcap stream. Detects and honours both byte
/// orders. Rejects pcapng and nanosecond-precision captures by name; any
/// other unknown magic is a plain bad-magic error. Truncation anywhere set
/// the error offset to where the incomplete item began.
PcapFile parse_pcap(std::span<const std::uint8_t> stream);
PcapFile read_pcap_file(const std::filesystem::path& path);

/// Serialises a PcapFile. The byte order is taken from header.magic, so a
/// parse/write round trip reproduces the input bytes exactly. Packet
/// incl_len fields must equal their payload sizes and respect snaplen.
Bytes write_pcap(const PcapFile& file);
void write_pcap_file(const std::filesystem::path& path, const PcapFile& file);

// ---------------------------------------------------------------------------
// Protocol filter. Traffic destined for the dataset should be application
// traffic, so address-resolution and address-assignment chatter (ARP,
// DHCPv4) is dropped, as are frames too short or too mangled to decide.
// ---------------------------------------------------------------------------

enum class FilterReason { Kept, Arp, DhcpV4, TooShort, Malformed };

struct FilterVerdict {
  FilterReason reason = FilterReason::Kept;
  bool kept() const { return reason == FilterReason::Kept; }
};

struct FilterRules {
  bool drop_arp = true;
  bool drop_dhcpv4 = true;
};

/// Decides a single Ethernet frame. Never throws: undecodable input maps to
/// TooShort or Malformed.
FilterVerdict classify_for_filter(const RawPacket& packet,
                                  const FilterRules& rules = {});

// ---------------------------------------------------------------------------
// Directory/file ingest: many pcap files, one class label per file.
// ---------------------------------------------------------------------------

struct IngestEntry {
  std::filesystem::path path;
  std::string class_name;
};

struct LabeledPacket {
  RawPacket packet;
  int label = 0;  ///< Index into IngestResult::class_names.
};

struct FileIngestStats {
  std::filesystem::path path;
  std::string class_name;
  int label = 0;
  std::uint64_t total = 0;
  std::uint64_t kept = 0;
  std::uint64_t dropped_arp = 0;
  std::uint64_t dropped_dhcpv4 = 0;
  std::uint64_t dropped_too_short = 0;
  std::uint64_t dropped_malformed = 0;
};

struct IngestReport {
  std::vector<FileIngestStats> files;
  FileIngestStats totals;  ///< path empty, class_name "all".

  /// Key-value text rendering, one block per file plus a totals block.
  std::string to_text() const;
};

struct IngestResult {
  std::vector<LabeledPacket> packets;        ///< Kept packets, file order.
  std::vector<std::string> class_names;      ///< Distinct labels, first-seen order.
  IngestReport report;
};

/// Reads every entry in order, filters, and assigns labels. Entries sharing
/// a class name share a label. Files must exist, parse, and carry Ethernet
/// link type; violations raise DataError/ParseError naming the file.
IngestResult ingest_files(std::span<const IngestEntry> entries,
                          const FilterRules& rules = {});

}  // namespace trafficaug
