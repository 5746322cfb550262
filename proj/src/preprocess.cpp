#include "trafficaug/preprocess.hpp"

#include <charconv>
#include <fstream>
#include <string>
#include <system_error>

namespace trafficaug {

Bytes fix_length(std::span<const std::uint8_t> bytes, int fixed_len) {
  if (fixed_len < 0) throw DataError("fixed_len must be non-negative");
  const auto n = static_cast<std::size_t>(fixed_len);
  Bytes out(n, 0);
  const std::size_t copy = std::min(bytes.size(), n);
  std::copy_n(bytes.begin(), copy, out.begin());
  return out;
}

Vector normalize_bytes(std::span<const std::uint8_t> bytes) {
  Vector v(static_cast<Index>(bytes.size()));
  for (std::size_t i = 0; i < bytes.size(); ++i)
    v[static_cast<Index>(i)] = static_cast<double>(bytes[i]) / 255.0;
  return v;
}

Bytes denormalize(const Vector& values) {
  Bytes out(static_cast<std::size_t>(values.size()));
  for (Index i = 0; i < values.size(); ++i) {
    const double scaled = values[i] * 255.0;
    const double clamped = std::min(255.0, std::max(0.0, scaled));
    out[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(std::lround(clamped));
  }
  return out;
}

Vector packet_to_pbv(const RawPacket& packet, const PreprocessConfig& config) {
  std::span<const std::uint8_t> payload(packet.bytes);
  if (config.strip_ethernet_header && payload.size() >= 14)
    payload = payload.subspan(14);
  return normalize_bytes(fix_length(payload, config.fixed_len));
}

Matrix packets_to_pbm(std::span<const LabeledPacket> packets,
                      const PreprocessConfig& config) {
  Matrix pbm(static_cast<Index>(packets.size()), config.fixed_len);
  for (std::size_t i = 0; i < packets.size(); ++i)
    pbm.row(static_cast<Index>(i)) =
        packet_to_pbv(packets[i].packet, config).transpose();
  return pbm;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view field, std::size_t line) {
  double v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw ParseError("line " + std::to_string(line) +
                         ": not a number: '" + std::string(field) + "'",
                     static_cast<long long>(line));
  return v;
}

int parse_label(std::string_view field, std::size_t line) {
  int v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw ParseError("line " + std::to_string(line) +
                         ": label is not an integer: '" + std::string(field) + "'",
                     static_cast<long long>(line));
  return v;
}

}  // namespace

void write_csv(std::ostream& os, const Matrix& pbm, std::span<const int> labels) {
  if (static_cast<std::size_t>(pbm.rows()) != labels.size())
    throw DataError("write_csv: " + std::to_string(pbm.rows()) + " rows but " +
                    std::to_string(labels.size()) + " labels");
  std::string line;
  for (Index r = 0; r < pbm.rows(); ++r) {
    line.clear();
    for (Index c = 0; c < pbm.cols(); ++c) {
      append_double(line, pbm(r, c));
      line.push_back(',');
    }
    line += std::to_string(labels[static_cast<std::size_t>(r)]);
    line.push_back('\n');
    os << line;
  }
}

void write_csv_file(const std::filesystem::path& path, const Matrix& pbm,
                    std::span<const int> labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path.string());
  write_csv(out, pbm, labels);
  if (!out) throw DataError("short write to " + path.string());
}

CsvData read_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  Index width = -1;

  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const std::size_t comma = rest.find(',');
      if (comma == std::string_view::npos) {
        fields.push_back(rest);
        break;
      }
      fields.push_back(rest.substr(0, comma));
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() < 2)
      throw ParseError("line " + std::to_string(line_no) +
                           ": expected at least one value and a label",
                       static_cast<long long>(line_no));

    const auto this_width = static_cast<Index>(fields.size()) - 1;
    if (width < 0) width = this_width;
    if (this_width != width)
      throw ParseError("line " + std::to_string(line_no) + ": row has " +
                           std::to_string(this_width) + " values, expected " +
                           std::to_string(width),
                       static_cast<long long>(line_no));

    std::vector<double> row(static_cast<std::size_t>(this_width));
    for (std::size_t i = 0; i + 1 < fields.size(); ++i)
      row[i] = parse_double(fields[i], line_no);
    labels.push_back(parse_label(fields.back(), line_no));
    rows.push_back(std::move(row));
  }

  CsvData data;
  data.pbm.resize(static_cast<Index>(rows.size()), width < 0 ? 0 : width);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      data.pbm(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  data.labels = std::move(labels);
  return data;
}

CsvData read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CSV file: " + path.string());
  try {
    return read_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset);
  }
}

}  // namespace trafficaug
