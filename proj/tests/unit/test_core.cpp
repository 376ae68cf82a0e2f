#include <cstring>
#include <fstream>

#include "doctest.h"

#include "fcnbc/record_io.hpp"
#include "test_support.hpp"

using namespace fcnbc;
using fcnbc::testing::Gen;
namespace fs = std::filesystem;

namespace {

SimulationRecord random_record(Gen& g, Index frames, Index h, Index w) {
  SimulationRecord r;
  for (Index t = 0; t < frames; ++t) r.frames.push_back(g.field<float>(h, w));
  r.dx = g.uniform(0.1, 1.0);
  r.dt_frame = g.uniform(0.1, 1.0);
  r.c0_or_alpha = g.uniform(0.5, 2.0);
  r.pulses.push_back({g.uniform(3, 5), g.uniform(3, 5), 0.001, 2.0});
  r.seed = static_cast<std::uint64_t>(g.integer(0, 1 << 30)) * 977;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("sample_window returns consecutive frames and the next one as target") {
  SimulationRecord r;
  for (int t = 0; t < 6; ++t) r.frames.push_back(Field2F::Constant(8, 8, static_cast<float>(t)));

  Window w = sample_window(r, 0, 4);
  REQUIRE(w.inputs.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(w.inputs[static_cast<std::size_t>(i)](0, 0) == static_cast<float>(i));
  CHECK(w.target(0, 0) == 4.0f);

  w = sample_window(r, 1, 4);
  CHECK(w.inputs.front()(3, 3) == 1.0f);
  CHECK(w.target(3, 3) == 5.0f);

  CHECK_THROWS_AS(sample_window(r, 2, 4), std::out_of_range);
  CHECK(window_count(r, 4) == 2);

  // The window owns its data.
  w.inputs[0](0, 0) = 99.0f;
  CHECK(r.frames[1](0, 0) == 1.0f);
}

TEST_CASE("record validation") {
  SimulationRecord r;
  r.frames.assign(2, Field2F::Zero(8, 8));
  CHECK_NOTHROW(validate_record(r));
  CHECK_THROWS_AS(validate_record(r, 5), ConfigError);

  r.frames[1] = Field2F::Zero(8, 9);
  CHECK_THROWS_AS(validate_record(r), ConfigError);

  r.frames[1] = Field2F::Zero(8, 8);
  r.frames[1](2, 2) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(validate_record(r), NumericError);

  r.frames[1](2, 2) = 0.0f;
  r.bc = BoundaryKind::adiabatic;
  CHECK_THROWS_AS(validate_record(r), ConfigError);
  r.physics = Physics::heat;
  CHECK_NOTHROW(validate_record(r));

  r.frames.assign(2, Field2F::Zero(4, 8));
  CHECK_THROWS_AS(validate_record(r), ConfigError);
}

TEST_CASE("physics and boundary compatibility") {
  CHECK(compatible(Physics::wave, BoundaryKind::reflecting));
  CHECK(compatible(Physics::wave, BoundaryKind::periodic));
  CHECK(compatible(Physics::wave, BoundaryKind::absorbing));
  CHECK_FALSE(compatible(Physics::wave, BoundaryKind::adiabatic));
  CHECK(compatible(Physics::heat, BoundaryKind::adiabatic));
  CHECK_FALSE(compatible(Physics::heat, BoundaryKind::periodic));
  CHECK(parse_boundary("absorbing") == BoundaryKind::absorbing);
  CHECK_THROWS_AS(parse_physics("plasma"), ConfigError);
}

TEST_CASE("pulse placement") {
  CHECK_NOTHROW(validate_pulse({10, 10, 0.001, 4}, 32, 32));
  CHECK_THROWS_AS(validate_pulse({2, 10, 0.001, 4}, 32, 32), ConfigError);
  CHECK_THROWS_AS(validate_pulse({10, 10, 0.001, 0}, 32, 32), ConfigError);
}

TEST_CASE("zero 8x8 frame has a payload of 256 zero bytes") {
  const auto dir = fcnbc::testing::scratch_dir("zero_payload");
  SimulationRecord r;
  r.frames.push_back(Field2F::Zero(8, 8));
  write_record(r, dir / "z.rec");
  const std::string bytes = slurp(dir / "z.rec");
  const std::size_t off = record_payload_offset(dir / "z.rec");
  REQUIRE(bytes.size() == off + 256);
  CHECK(bytes.substr(0, 8) == "FCNBCREC");
  for (std::size_t i = off; i < bytes.size(); ++i) CHECK(bytes[i] == '\0');
}

TEST_CASE("payload size is frames x H x W x 4 bytes") {
  const auto dir = fcnbc::testing::scratch_dir("payload_size");
  Gen g(3);
  for (auto [t, h, w] : {std::tuple{1, 8, 8}, {3, 16, 16}, {5, 8, 24}, {2, 12, 9}}) {
    const SimulationRecord r = random_record(g, t, h, w);
    write_record(r, dir / "r.rec");
    const auto size = fs::file_size(dir / "r.rec");
    CHECK(size - record_payload_offset(dir / "r.rec") == static_cast<std::uintmax_t>(t * h * w * 4));
  }
  // Full-scale acoustic record: 231 frames of 200 x 200.
  CHECK(231ull * 200 * 200 * 4 == 36'960'000ull);
}

TEST_CASE("record round-trip is bitwise") {
  const auto dir = fcnbc::testing::scratch_dir("roundtrip");
  Gen g(11);
  for (int trial = 0; trial < 25; ++trial) {
    const Index t = g.integer(1, 6);
    const Index h = g.integer(8, 20);
    const Index w = g.integer(8, 20);
    SimulationRecord r = random_record(g, t, h, w);
    if (trial % 2) {
      r.physics = Physics::heat;
      r.bc = BoundaryKind::adiabatic;
    }
    // Exercise awkward float bit patterns as well.
    r.frames[0](0, 0) = -0.0f;
    r.frames[0](0, 1) = std::numeric_limits<float>::denorm_min();
    r.frames[0](1, 0) = std::numeric_limits<float>::max();
    write_record(r, dir / "r.rec");
    const SimulationRecord back = read_record(dir / "r.rec");
    CHECK(back == r);
    CHECK(back.pulses == r.pulses);
    CHECK(back.seed == r.seed);
    CHECK(std::signbit(back.frames[0](0, 0)));
  }
}

TEST_CASE("3-frame 16x16 record survives a round trip") {
  const auto dir = fcnbc::testing::scratch_dir("three_frames");
  Gen g(5);
  const SimulationRecord r = random_record(g, 3, 16, 16);
  write_record(r, dir / "r.rec");
  CHECK(read_record(dir / "r.rec") == r);
}

TEST_CASE("truncated files report expected and actual sizes") {
  const auto dir = fcnbc::testing::scratch_dir("truncated");
  Gen g(9);
  const SimulationRecord r = random_record(g, 2, 8, 8);
  write_record(r, dir / "r.rec");
  const std::string bytes = slurp(dir / "r.rec");
  {
    std::ofstream out(dir / "cut.rec", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 100));
  }
  try {
    read_record(dir / "cut.rec");
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("truncated") != std::string::npos);
    CHECK(msg.find(std::to_string(bytes.size())) != std::string::npos);
    CHECK(msg.find(std::to_string(bytes.size() - 100)) != std::string::npos);
  }
  {
    std::ofstream out(dir / "long.rec", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.put('x');
  }
  CHECK_THROWS_AS(read_record(dir / "long.rec"), FormatError);
}

TEST_CASE("foreign magic and version are rejected") {
  const auto dir = fcnbc::testing::scratch_dir("version");
  Gen g(1);
  write_record(random_record(g, 1, 8, 8), dir / "r.rec");
  std::string bytes = slurp(dir / "r.rec");

  std::string bad_version = bytes;
  bad_version[8] = 7;
  {
    std::ofstream out(dir / "v.rec", std::ios::binary);
    out << bad_version;
  }
  try {
    read_record(dir / "v.rec");
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  {
    std::ofstream out(dir / "m.rec", std::ios::binary);
    out << bad_magic;
  }
  CHECK_THROWS_AS(read_record(dir / "m.rec"), FormatError);
}

TEST_CASE("invalid records are rejected before anything is written") {
  const auto dir = fcnbc::testing::scratch_dir("reject");
  SimulationRecord r;
  r.frames.push_back(Field2F::Zero(8, 8));
  r.frames[0](1, 1) = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(write_record(r, dir / "bad.rec"), NumericError);
  CHECK_FALSE(fs::exists(dir / "bad.rec"));
}

TEST_CASE("manifest round-trip and split partition") {
  const auto dir = fcnbc::testing::scratch_dir("manifest");
  DatasetManifest m;
  m.spec.count = 3;
  m.spec.train_count = 2;
  for (int i = 0; i < 3; ++i) {
    ManifestEntry e;
    e.path = "sim_" + std::to_string(i) + ".rec";
    e.split = i == 1 ? Split::validation : Split::train;
    e.frames = 5;
    e.height = e.width = 8;
    e.seed = 100u + static_cast<unsigned>(i);
    e.pulses.push_back({4.0, 4.0, 0.001, 2.0});
    m.records.push_back(e);
  }
  write_manifest(m, dir / "manifest.json");
  const DatasetManifest back = read_manifest(dir / "manifest.json");
  REQUIRE(back.records.size() == 3);
  CHECK(back.indices(Split::train) == std::vector<Index>{0, 2});
  CHECK(back.indices(Split::validation) == std::vector<Index>{1});
  CHECK(back.records[2].seed == 102u);
  CHECK(back.records[0].pulses == m.records[0].pulses);
  CHECK(back.spec.count == 3);
  CHECK(back.directory == dir);
}
