#include "fcnbc/record_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "fcnbc/json_config.hpp"

namespace fcnbc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kRecordMagic[8] = {'F', 'C', 'N', 'B', 'C', 'R', 'E', 'C'};

std::string encode_metadata(const SimulationRecord& r) {
  std::string m;
  detail::put_field<std::uint32_t>(m, static_cast<std::uint32_t>(r.height()));
  detail::put_field<std::uint32_t>(m, static_cast<std::uint32_t>(r.width()));
  detail::put_field<std::uint32_t>(m, static_cast<std::uint32_t>(r.frame_count()));
  detail::put_field<std::uint8_t>(m, static_cast<std::uint8_t>(r.physics));
  detail::put_field<std::uint8_t>(m, static_cast<std::uint8_t>(r.bc));
  detail::put_field<double>(m, r.dx);
  detail::put_field<double>(m, r.dt_frame);
  detail::put_field<double>(m, r.c0_or_alpha);
  detail::put<std::uint32_t>(m, static_cast<std::uint32_t>(sizeof(std::uint32_t) + r.pulses.size() * 4 * sizeof(double)));
  detail::put<std::uint32_t>(m, static_cast<std::uint32_t>(r.pulses.size()));
  for (const auto& p : r.pulses) {
    detail::put(m, p.x0);
    detail::put(m, p.y0);
    detail::put(m, p.amplitude);
    detail::put(m, p.half_width);
  }
  detail::put_field<std::uint64_t>(m, r.seed);
  return m;
}

}  // namespace

std::string detail::read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_record(const SimulationRecord& record, const fs::path& path) {
  validate_record(record, 1);
  const std::string meta = encode_metadata(record);

  std::string header(kRecordMagic, sizeof(kRecordMagic));
  detail::put<std::uint32_t>(header, kRecordFormatVersion);
  detail::put<std::uint32_t>(header, static_cast<std::uint32_t>(meta.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  for (const auto& f : record.frames) {
    detail::put_floats(out, std::span<const float>(f.data(), static_cast<std::size_t>(f.size())));
  }
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

std::size_t record_payload_offset(const fs::path& path) {
  const std::string bytes = detail::read_file(path);
  detail::ByteReader rd(bytes.data(), bytes.size(), path.string());
  rd.get_bytes(8);
  rd.get<std::uint32_t>();
  return kRecordHeaderBytes + rd.get<std::uint32_t>();
}

SimulationRecord read_record(const fs::path& path) {
  const std::string bytes = detail::read_file(path);
  const std::string what = path.string();
  detail::ByteReader rd(bytes.data(), bytes.size(), what);

  if (rd.get_bytes(8) != std::string(kRecordMagic, 8)) throw FormatError(what + ": bad magic");
  const auto version = rd.get<std::uint32_t>();
  if (version != kRecordFormatVersion) {
    throw FormatError(what + ": unsupported format version " + std::to_string(version) + " (expected " +
                      std::to_string(kRecordFormatVersion) + ")");
  }
  const auto meta_len = rd.get<std::uint32_t>();
  if (rd.remaining() < meta_len) throw FormatError(what + ": truncated metadata block");
  detail::ByteReader meta(bytes.data() + kRecordHeaderBytes, meta_len, what);

  SimulationRecord r;
  const auto h = meta.get_field<std::uint32_t>();
  const auto w = meta.get_field<std::uint32_t>();
  const auto t = meta.get_field<std::uint32_t>();
  r.physics = static_cast<Physics>(meta.get_field<std::uint8_t>());
  r.bc = static_cast<BoundaryKind>(meta.get_field<std::uint8_t>());
  if (static_cast<unsigned>(r.physics) > 1 || static_cast<unsigned>(r.bc) > 3) {
    throw FormatError(what + ": invalid physics/bc code");
  }
  r.dx = meta.get_field<double>();
  r.dt_frame = meta.get_field<double>();
  r.c0_or_alpha = meta.get_field<double>();
  const auto pulse_bytes = meta.get<std::uint32_t>();
  const auto pulse_count = meta.get<std::uint32_t>();
  if (pulse_bytes != sizeof(std::uint32_t) + pulse_count * 4 * sizeof(double)) {
    throw FormatError(what + ": pulse list length does not match its count");
  }
  for (std::uint32_t i = 0; i < pulse_count; ++i) {
    PulseSpec p;
    p.x0 = meta.get<double>();
    p.y0 = meta.get<double>();
    p.amplitude = meta.get<double>();
    p.half_width = meta.get<double>();
    r.pulses.push_back(p);
  }
  r.seed = meta.get_field<std::uint64_t>();
  if (meta.remaining() != 0) throw FormatError(what + ": trailing bytes in metadata block");

  const std::size_t payload_offset = kRecordHeaderBytes + meta_len;
  const std::size_t expected = payload_offset + std::size_t{t} * h * w * sizeof(float);
  if (bytes.size() != expected) {
    throw FormatError(what + ": payload " + (bytes.size() < expected ? "truncated" : "too long") +
                      ", expected " + std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()));
  }
  detail::ByteReader payload(bytes.data() + payload_offset, bytes.size() - payload_offset, what);
  r.frames.reserve(t);
  for (std::uint32_t i = 0; i < t; ++i) {
    Field2F f(h, w);
    payload.get_floats(std::span<float>(f.data(), static_cast<std::size_t>(f.size())));
    r.frames.push_back(std::move(f));
  }
  validate_record(r, 1);
  return r;
}

// ---------------------------------------------------------------------------
// Manifest

std::vector<Index> DatasetManifest::indices(Split split) const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == split) out.push_back(static_cast<Index>(i));
  }
  return out;
}

SimulationRecord DatasetManifest::load(Index i) const {
  return read_record(directory / records.at(static_cast<std::size_t>(i)).path);
}

std::vector<SimulationRecord> DatasetManifest::load_split(Split split) const {
  std::vector<SimulationRecord> out;
  for (Index i : indices(split)) out.push_back(load(i));
  return out;
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  json records = json::array();
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& e = m.records[i];
    json pulses = json::array();
    for (const auto& p : e.pulses) {
      pulses.push_back({{"x0", p.x0}, {"y0", p.y0}, {"amplitude", p.amplitude}, {"half_width", p.half_width}});
    }
    records.push_back({{"index", i},
                       {"path", e.path},
                       {"split", e.split == Split::train ? "train" : "validation"},
                       {"frames", e.frames},
                       {"height", e.height},
                       {"width", e.width},
                       {"seed", e.seed},
                       {"pulses", pulses}});
  }
  const json doc{{"format_version", m.format_version}, {"generator", json(m.spec)}, {"records", records}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.format_version = doc.at("format_version").get<std::uint32_t>();
    if (m.format_version != kManifestFormatVersion) {
      throw FormatError(path.string() + ": unsupported manifest version " + std::to_string(m.format_version));
    }
    m.spec = doc.at("generator").get<DatasetSpec>();
    for (const auto& r : doc.at("records")) {
      ManifestEntry e;
      e.path = r.at("path").get<std::string>();
      const auto split = r.at("split").get<std::string>();
      if (split != "train" && split != "validation") throw FormatError("unknown split label '" + split + "'");
      e.split = split == "train" ? Split::train : Split::validation;
      e.frames = r.at("frames").get<Index>();
      e.height = r.at("height").get<Index>();
      e.width = r.at("width").get<Index>();
      e.seed = r.at("seed").get<std::uint64_t>();
      for (const auto& p : r.at("pulses")) {
        e.pulses.push_back({p.at("x0").get<double>(), p.at("y0").get<double>(), p.at("amplitude").get<double>(),
                            p.at("half_width").get<double>()});
      }
      m.records.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  m.directory = path.parent_path();
  return m;
}

}  // namespace fcnbc
