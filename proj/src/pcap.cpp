#include "trafficaug/pcap.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "trafficaug/binio.hpp"

namespace trafficaug {

namespace {

constexpr std::size_t kGlobalHeaderSize = 24;
constexpr std::size_t kRecordHeaderSize = 16;

// Ethernet / IPv4 / UDP offsets used by the filter.
constexpr std::size_t kEthHeaderSize = 14;
constexpr std::size_t kEthTypeOffset = 12;
constexpr std::uint16_t kEthTypeIpv4 = 0x0800;
constexpr std::uint16_t kEthTypeArp = 0x0806;
constexpr std::uint8_t kIpProtoUdp = 17;
constexpr std::uint16_t kDhcpServerPort = 67;
constexpr std::uint16_t kDhcpClientPort = 68;

ByteOrder stream_order(std::uint32_t magic_as_le) {
  return magic_as_le == kPcapMagic ? ByteOrder::Little : ByteOrder::Big;
}

}  // namespace

PcapFile parse_pcap(std::span<const std::uint8_t> stream) {
  if (stream.size() < 4)
    throw ParseError("pcap stream too short for a magic number",
                     static_cast<long long>(stream.size()));

  const std::uint32_t magic = load_u32(stream.data(), ByteOrder::Little);
  if (magic == kPcapngBlockType)
    throw ParseError("pcapng input is not supported; expected classic pcap", 0);
  if (magic == kPcapMagicNanos || magic == kPcapMagicNanosSwapped)
    throw ParseError("nanosecond-precision pcap is not supported", 0);
  if (magic != kPcapMagic && magic != kPcapMagicSwapped) {
    std::ostringstream msg;
    msg << "bad pcap magic 0x" << std::hex << magic;
    throw ParseError(msg.str(), 0);
  }
  if (stream.size() < kGlobalHeaderSize)
    throw ParseError("pcap stream truncated inside the global header", 0);

  const ByteOrder order = stream_order(magic);
  PcapFile file;
  file.header.magic = magic;
  file.header.version_major = load_u16(stream.data() + 4, order);
  file.header.version_minor = load_u16(stream.data() + 6, order);
  file.header.thiszone =
      static_cast<std::int32_t>(load_u32(stream.data() + 8, order));
  file.header.sigfigs = load_u32(stream.data() + 12, order);
  file.header.snaplen = load_u32(stream.data() + 16, order);
  file.header.network = load_u32(stream.data() + 20, order);

  std::size_t pos = kGlobalHeaderSize;
  while (pos < stream.size()) {
    const std::size_t record_start = pos;
    if (stream.size() - pos < kRecordHeaderSize)
      throw ParseError("pcap stream truncated inside a record header",
                       static_cast<long long>(record_start));
    RawPacket pkt;
    pkt.ts_sec = load_u32(stream.data() + pos, order);
    pkt.ts_usec = load_u32(stream.data() + pos + 4, order);
    pkt.incl_len = load_u32(stream.data() + pos + 8, order);
    pkt.orig_len = load_u32(stream.data() + pos + 12, order);
    pos += kRecordHeaderSize;

    if (pkt.incl_len > file.header.snaplen) {
      std::ostringstream msg;
      msg << "record at offset " << record_start << " claims " << pkt.incl_len
          << " captured bytes, above snaplen " << file.header.snaplen;
      throw ParseError(msg.str(), static_cast<long long>(record_start));
    }
    if (stream.size() - pos < pkt.incl_len)
      throw ParseError("pcap stream truncated inside record data",
                       static_cast<long long>(record_start));

    pkt.bytes.assign(stream.begin() + static_cast<std::ptrdiff_t>(pos),
                     stream.begin() + static_cast<std::ptrdiff_t>(pos + pkt.incl_len));
    pos += pkt.incl_len;
    file.packets.push_back(std::move(pkt));
  }
  return file;
}

PcapFile read_pcap_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open pcap file: " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)),
             std::istreambuf_iterator<char>());
  try {
    return parse_pcap(data);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset);
  }
}

Bytes write_pcap(const PcapFile& file) {
  const auto& h = file.header;
  if (h.magic != kPcapMagic && h.magic != kPcapMagicSwapped)
    throw DataError("refusing to write pcap with unknown magic");
  const ByteOrder order = stream_order(h.magic);

  Bytes out;
  // The magic always serialises as the byte sequence the chosen order makes
  // read back as 0xA1B2C3D4 in that order.
  store_u32(kPcapMagic, out, order);
  store_u16(h.version_major, out, order);
  store_u16(h.version_minor, out, order);
  store_u32(static_cast<std::uint32_t>(h.thiszone), out, order);
  store_u32(h.sigfigs, out, order);
  store_u32(h.snaplen, out, order);
  store_u32(h.network, out, order);

  for (std::size_t i = 0; i < file.packets.size(); ++i) {
    const RawPacket& p = file.packets[i];
    if (p.bytes.size() != p.incl_len)
      throw DataError("packet " + std::to_string(i) + " incl_len " +
                      std::to_string(p.incl_len) + " does not match payload size " +
                      std::to_string(p.bytes.size()));
    if (p.incl_len > h.snaplen)
      throw DataError("packet " + std::to_string(i) + " exceeds snaplen");
    store_u32(p.ts_sec, out, order);
    store_u32(p.ts_usec, out, order);
    store_u32(p.incl_len, out, order);
    store_u32(p.orig_len, out, order);
    out.insert(out.end(), p.bytes.begin(), p.bytes.end());
  }
  return out;
}

void write_pcap_file(const std::filesystem::path& path, const PcapFile& file) {
  const Bytes data = write_pcap(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw DataError("short write to " + path.string());
}

FilterVerdict classify_for_filter(const RawPacket& packet,
                                  const FilterRules& rules) {
  const Bytes& b = packet.bytes;
  if (b.size() < kEthHeaderSize) return {FilterReason::TooShort};

  const std::uint16_t ethertype = load_u16(b.data() + kEthTypeOffset, ByteOrder::Big);
  if (ethertype == kEthTypeArp)
    return rules.drop_arp ? FilterVerdict{FilterReason::Arp}
                          : FilterVerdict{FilterReason::Kept};
  if (ethertype != kEthTypeIpv4) return {FilterReason::Kept};

  // IPv4: need at least the 20-byte minimum header to judge the packet.
  if (b.size() < kEthHeaderSize + 20) return {FilterReason::TooShort};
  const std::uint8_t version = b[kEthHeaderSize] >> 4;
  const std::uint8_t ihl = b[kEthHeaderSize] & 0x0f;
  if (version != 4 || ihl < 5) return {FilterReason::Malformed};
  const std::size_t ip_header_len = static_cast<std::size_t>(ihl) * 4;
  if (b.size() < kEthHeaderSize + ip_header_len) return {FilterReason::TooShort};

  const std::uint8_t protocol = b[kEthHeaderSize + 9];
  if (protocol == kIpProtoUdp && rules.drop_dhcpv4) {
    const std::size_t udp_offset = kEthHeaderSize + ip_header_len;
    if (b.size() < udp_offset + 4) return {FilterReason::TooShort};
    const std::uint16_t src = load_u16(b.data() + udp_offset, ByteOrder::Big);
    const std::uint16_t dst = load_u16(b.data() + udp_offset + 2, ByteOrder::Big);
    const auto is_dhcp = [](std::uint16_t port) {
      return port == kDhcpServerPort || port == kDhcpClientPort;
    };
    if (is_dhcp(src) || is_dhcp(dst)) return {FilterReason::DhcpV4};
  }
  return {FilterReason::Kept};
}

namespace {

void tally(FileIngestStats& stats, FilterReason reason) {
  ++stats.total;
  switch (reason) {
    case FilterReason::Kept: ++stats.kept; break;
    case FilterReason::Arp: ++stats.dropped_arp; break;
    case FilterReason::DhcpV4: ++stats.dropped_dhcpv4; break;
    case FilterReason::TooShort: ++stats.dropped_too_short; break;
    case FilterReason::Malformed: ++stats.dropped_malformed; break;
  }
}

void render(std::ostringstream& os, const FileIngestStats& s) {
  if (!s.path.empty()) os << "file " << s.path.string() << "\n";
  os << "class " << s.class_name << "\n"
     << "total " << s.total << "\n"
     << "kept " << s.kept << "\n"
     << "dropped_arp " << s.dropped_arp << "\n"
     << "dropped_dhcpv4 " << s.dropped_dhcpv4 << "\n"
     << "dropped_too_short " << s.dropped_too_short << "\n"
     << "dropped_malformed " << s.dropped_malformed << "\n";
}

}  // namespace

std::string IngestReport::to_text() const {
  std::ostringstream os;
  for (const FileIngestStats& s : files) {
    render(os, s);
    os << "\n";
  }
  render(os, totals);
  return os.str();
}

IngestResult ingest_files(std::span<const IngestEntry> entries,
                          const FilterRules& rules) {
  IngestResult result;
  result.report.totals.class_name = "all";
  std::unordered_map<std::string, int> label_of;

  for (const IngestEntry& entry : entries) {
    if (!std::filesystem::exists(entry.path))
      throw DataError("input pcap does not exist: " + entry.path.string());

    const auto [it, inserted] = label_of.try_emplace(
        entry.class_name, static_cast<int>(result.class_names.size()));
    if (inserted) result.class_names.push_back(entry.class_name);
    const int label = it->second;

    PcapFile file = read_pcap_file(entry.path);
    if (file.header.network != kLinkTypeEthernet)
      throw DataError(entry.path.string() + ": link type " +
                      std::to_string(file.header.network) +
                      " is not Ethernet; only Ethernet captures are supported");

    FileIngestStats stats;
    stats.path = entry.path;
    stats.class_name = entry.class_name;
    stats.label = label;
    for (RawPacket& pkt : file.packets) {
      const FilterVerdict verdict = classify_for_filter(pkt, rules);
      tally(stats, verdict.reason);
      tally(result.report.totals, verdict.reason);
      if (verdict.kept())
        result.packets.push_back({std::move(pkt), label});
    }
    result.report.files.push_back(std::move(stats));
  }
  return result;
}

}  // namespace trafficaug
