#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "doctest.h"
#include "ubss/error.hpp"
#include "ubss/frame.hpp"

using namespace ubss;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "ubss_frame_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, std::size_t n, std::uint8_t fill_base = 0) {
  std::ofstream f(p, std::ios::binary);
  for (std::size_t i = 0; i < n; ++i) f.put(static_cast<char>((fill_base + i) & 0xFF));
}

Frame random_frame(std::mt19937& rng, std::size_t w, std::size_t h) {
  std::uniform_int_distribution<int> d(0, 255);
  std::vector<std::uint8_t> s(w * h);
  for (auto& v : s) v = static_cast<std::uint8_t>(d(rng));
  return Frame(w, h, std::move(s));
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected ubss::Error");
  return Errc::invalid_header;
}

}  // namespace

TEST_CASE("frame invariants") {
  CHECK(code_of([] { Frame(0, 4); }) == Errc::dimensions_zero);
  CHECK(code_of([] { Frame(2, 2, std::vector<std::uint8_t>(3)); }) == Errc::dimension_mismatch);
  CHECK(code_of([] { ResidualFrame(1, 1, {300}); }) == Errc::invalid_shape);
}

TEST_CASE("load_raw_sequence") {
  SUBCASE("gray8") {
    const auto p = temp_file("g.raw");
    write_bytes(p, 176 * 144 * 5);
    const auto frames = load_raw_sequence(p, 176, 144, 5, RawFormat::gray8);
    REQUIRE(frames.size() == 5);
    CHECK(frames[0].width() == 176);
    CHECK(frames[0].height() == 144);
    CHECK(frames[1].samples()[0] == static_cast<std::uint8_t>((176 * 144) & 0xFF));
  }
  SUBCASE("yuv420p keeps luma only") {
    const auto p = temp_file("y.yuv");
    const std::size_t luma = 176 * 144, frame = luma * 3 / 2;
    write_bytes(p, frame * 2);
    const auto frames = load_raw_sequence(p, 176, 144, 2, RawFormat::yuv420p);
    REQUIRE(frames.size() == 2);
    // second frame starts right after the first frame's chroma
    CHECK(frames[1].samples()[0] == static_cast<std::uint8_t>(frame & 0xFF));
    CHECK(frames[1].samples()[luma - 1] == static_cast<std::uint8_t>((frame + luma - 1) & 0xFF));
  }
  SUBCASE("short file") {
    const auto p = temp_file("short.raw");
    write_bytes(p, 100);
    CHECK(code_of([&] { load_raw_sequence(p, 176, 144, 1, RawFormat::gray8); }) == Errc::file_too_short);
  }
  SUBCASE("bad arguments") {
    const auto p = temp_file("short.raw");
    write_bytes(p, 100);
    CHECK(code_of([&] { load_raw_sequence(p, 0, 144, 1, RawFormat::gray8); }) == Errc::dimensions_zero);
    CHECK(code_of([] { parse_raw_format("rgb24"); }) == Errc::unknown_format);
  }
}

TEST_CASE("segment_gops") {
  std::vector<Frame> frames;
  for (int i = 0; i < 12; ++i) frames.emplace_back(4, 4, std::vector<std::uint8_t>(16, static_cast<std::uint8_t>(i)));

  auto ten = segment_gops(std::span(frames).first(10), 4);
  CHECK(ten.gops.size() == 2);
  CHECK(ten.trailing.empty());

  auto twelve = segment_gops(frames, 4);
  CHECK(twelve.gops.size() == 2);
  CHECK(twelve.trailing.size() == 2);
  CHECK(twelve.gops[1].index == 1);

  auto three = segment_gops(std::span(frames).first(3), 4);
  CHECK(three.gops.empty());
  CHECK(three.trailing.size() == 3);

  // partition: concatenation reproduces the input order
  std::vector<Frame> joined;
  for (const auto& g : twelve.gops) {
    joined.push_back(g.key);
    joined.insert(joined.end(), g.ubss.begin(), g.ubss.end());
  }
  joined.insert(joined.end(), twelve.trailing.begin(), twelve.trailing.end());
  CHECK(joined == frames);

  CHECK(code_of([&] { segment_gops(frames, 5); }) == Errc::n_not_perfect_square);
  CHECK(code_of([&] { segment_gops(frames, 1); }) == Errc::n_not_perfect_square);
  frames.emplace_back(8, 4);
  CHECK(code_of([&] { segment_gops(frames, 4); }) == Errc::inconsistent_dimensions);
}

TEST_CASE("segment_gops partition property, n = 9") {
  std::mt19937 rng(3);
  for (std::size_t count = 0; count < 40; ++count) {
    std::vector<Frame> frames;
    for (std::size_t i = 0; i < count; ++i) frames.push_back(random_frame(rng, 3, 2));
    const auto seg = segment_gops(frames, 9);
    CHECK(seg.gops.size() == count / 10);
    std::vector<Frame> joined;
    for (const auto& g : seg.gops) {
      CHECK(g.ubss.size() == 9);
      joined.push_back(g.key);
      joined.insert(joined.end(), g.ubss.begin(), g.ubss.end());
    }
    joined.insert(joined.end(), seg.trailing.begin(), seg.trailing.end());
    CHECK(joined == frames);
  }
}

TEST_CASE("psnr") {
  Frame a(8, 8, std::vector<std::uint8_t>(64, 10));
  CHECK(std::isinf(psnr(a, a)));

  Frame b(8, 8, std::vector<std::uint8_t>(64, 11));
  CHECK(psnr(a, b) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-12));
  CHECK(psnr(a, b) == doctest::Approx(48.1308).epsilon(1e-6));

  Frame zeros(4, 4), full(4, 4, std::vector<std::uint8_t>(16, 255));
  CHECK(psnr(zeros, full) == doctest::Approx(0.0));

  CHECK(code_of([&] { psnr(a, zeros); }) == Errc::dimension_mismatch);
}

TEST_CASE("psnr matches a double-loop MSE oracle and is symmetric") {
  std::mt19937 rng(11);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_frame(rng, 13, 7);
    const auto b = random_frame(rng, 13, 7);
    double sum = 0.0;
    for (std::size_t y = 0; y < 7; ++y)
      for (std::size_t x = 0; x < 13; ++x) {
        const double d = double(a.at(x, y)) - double(b.at(x, y));
        sum += d * d;
      }
    const double expected = 10.0 * std::log10(255.0 * 255.0 / (sum / 91.0));
    CHECK(std::abs(psnr(a, b) - expected) <= 1e-9);
    CHECK(psnr(a, b) == psnr(b, a));
  }
}

TEST_CASE("pgm output") {
  const Frame f(2, 2, {0, 128, 255, 7});
  const auto p = temp_file("tiny.pgm");
  save_frame_pgm(f, p);
  std::ifstream in(p, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  CHECK(bytes == std::string("P5\n2 2\n255\n\x00\x80\xFF\x07", 15));

  std::vector<std::uint8_t> all(256);
  for (int i = 0; i < 256; ++i) all[i] = static_cast<std::uint8_t>(i);
  const Frame every(16, 16, all);
  save_frame_pgm(every, p);
  CHECK(load_frame_pgm(p) == every);

  CHECK(code_of([&] { save_frame_pgm(f, "/nonexistent-dir/x.pgm"); }) == Errc::io_failure);
}

TEST_CASE("block grid") {
  const BlockGrid g(176, 144, 16);
  CHECK(g.cols() == 11);
  CHECK(g.rows() == 9);
  CHECK(g.count() == 99);
  CHECK(g.position(12) == BlockPos{1, 1});
  CHECK(code_of([] { BlockGrid(170, 144, 16); }) == Errc::dimension_not_divisible);
}
