#include <cmath>
#include <random>

#include "doctest.h"
#include "ubss/error.hpp"
#include "ubss/mixing.hpp"

using namespace ubss;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected ubss::Error");
  return Errc::invalid_header;
}

std::vector<ResidualFrame> random_residuals(std::mt19937_64& rng, std::size_t n, std::size_t w, std::size_t h) {
  std::uniform_int_distribution<int> d(-255, 255);
  std::vector<ResidualFrame> out;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::int16_t> s(w * h);
    for (auto& v : s) v = static_cast<std::int16_t>(d(rng));
    out.emplace_back(w, h, std::move(s));
  }
  return out;
}

MixingMatrix identity(std::size_t k) {
  std::vector<double> e(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) e[i * k + i] = 1.0;
  return MixingMatrix::from_entries(k, k, std::move(e));
}

}  // namespace

TEST_CASE("gen_mixing_matrix") {
  const auto a = MixingMatrix::generate(42, 256, 1024);
  const auto b = MixingMatrix::generate(42, 256, 1024);
  REQUIRE(a.entries().size() == 256u * 1024u);
  CHECK(std::equal(a.entries().begin(), a.entries().end(), b.entries().begin()));

  const auto c = MixingMatrix::generate(43, 256, 1024);
  CHECK_FALSE(std::equal(a.entries().begin(), a.entries().end(), c.entries().begin()));

  // moments of 262144 draws from N(0, 1/256)
  double sum = 0.0, sq = 0.0;
  for (double v : a.entries()) sum += v;
  const double n = static_cast<double>(a.entries().size());
  const double mean = sum / n;
  for (double v : a.entries()) sq += (v - mean) * (v - mean);
  const double var = sq / (n - 1.0);
  const double se = std::sqrt((1.0 / 256.0) / n);
  CHECK(std::abs(mean) <= 4.0 * se);
  CHECK(std::abs(var - 1.0 / 256.0) <= 0.05 / 256.0);

  CHECK(code_of([] { MixingMatrix::generate(1, 0, 16); }) == Errc::invalid_shape);
  CHECK(code_of([] { MixingMatrix::generate(1, 17, 16); }) == Errc::invalid_shape);
}

TEST_CASE("compute_residual") {
  const Frame key(4, 4, std::vector<std::uint8_t>(16, 255));
  const auto same = compute_residual(key, key);
  for (auto v : same.samples()) CHECK(v == 0);
  const auto dark = compute_residual(Frame(4, 4), key);
  for (auto v : dark.samples()) CHECK(v == -255);
  CHECK(code_of([&] { compute_residual(Frame(4, 2), key); }) == Errc::dimension_mismatch);

  std::mt19937 rng(5);
  std::uniform_int_distribution<int> d(0, 255);
  for (int t = 0; t < 1000; ++t) {
    std::vector<std::uint8_t> fs(12), ks(12);
    for (auto& v : fs) v = static_cast<std::uint8_t>(d(rng));
    for (auto& v : ks) v = static_cast<std::uint8_t>(d(rng));
    const Frame f(4, 3, fs), k(4, 3, ks);
    REQUIRE(add_residual(k, compute_residual(f, k)) == f);
  }
}

TEST_CASE("assemble_composite layout") {
  const std::size_t bs = 16;
  std::vector<ResidualFrame> frames;
  for (int j = 0; j < 4; ++j)
    frames.emplace_back(48, 32, std::vector<std::int16_t>(48 * 32, static_cast<std::int16_t>(j)));

  const auto block = assemble_composite(frames, {2, 1}, bs);
  CHECK(block.side == 32);
  CHECK(block.tiles_per_side() == 2);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x) {
      // tile (tx, ty) holds frame tx + 2*ty
      const double expected = static_cast<double>((x / bs) + 2 * (y / bs));
      REQUIRE(block.values[y * 32 + x] == expected);
    }

  const std::vector<ResidualFrame> zeros(4, ResidualFrame(32, 32));
  for (double v : assemble_composite(zeros, {1, 1}, bs).values) CHECK(v == 0.0);

  CHECK(code_of([&] { assemble_composite(frames, {3, 0}, bs); }) == Errc::out_of_grid);
  CHECK(code_of([&] { assemble_composite(std::span(frames).first(3), {0, 0}, bs); }) ==
        Errc::n_not_perfect_square);
}

TEST_CASE("composite layout is a bijection (de-assembly oracle)") {
  std::mt19937_64 rng(17);
  for (std::size_t n : {4u, 9u}) {
    const std::size_t bs = 8, w = 24, h = 16;
    const auto residuals = random_residuals(rng, n, w, h);
    const BlockGrid grid(w, h, bs);
    std::vector<std::vector<double>> rebuilt(n, std::vector<double>(w * h, 1e9));
    for (std::size_t b = 0; b < grid.count(); ++b) {
      const auto block = assemble_composite(residuals, grid.position(b), bs);
      for (std::size_t j = 0; j < n; ++j) scatter_tile(block, j, rebuilt[j], w);
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < w * h; ++i) REQUIRE(rebuilt[j][i] == residuals[j].samples()[i]);
  }
}

TEST_CASE("mix_batch") {
  const std::size_t bs = 4, k = 4 * bs * bs;
  const auto a = MixingMatrix::generate(9, 20, k);
  CompositeBlock zero{8, bs, {0, 0}, std::vector<double>(k, 0.0)};
  for (double v : mix_batch(a, zero).values) CHECK(v == 0.0);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 50.0);
  for (int t = 0; t < 20; ++t) {
    CompositeBlock u = zero, v = zero, combo = zero;
    const double alpha = g(rng) / 50.0, beta = g(rng) / 50.0;
    for (std::size_t i = 0; i < k; ++i) {
      u.values[i] = g(rng);
      v.values[i] = g(rng);
      combo.values[i] = alpha * u.values[i] + beta * v.values[i];
    }
    const auto mu = mix_batch(a, u), mv = mix_batch(a, v), mc = mix_batch(a, combo);
    for (std::size_t i = 0; i < mc.values.size(); ++i) {
      const double expected = alpha * mu.values[i] + beta * mv.values[i];
      CHECK(std::abs(mc.values[i] - expected) <= 1e-9 * std::max(1.0, std::abs(expected)));
    }
  }

  CompositeBlock filled = zero;
  for (std::size_t i = 0; i < k; ++i) filled.values[i] = static_cast<double>(i) - 17.5;
  const auto same = mix_batch(identity(k), filled);
  CHECK(same.values == filled.values);

  const auto wrong = MixingMatrix::generate(9, 20, k + 1);
  CHECK(code_of([&] { mix_batch(wrong, filled); }) == Errc::shape_mismatch);
}

TEST_CASE("stream accumulator") {
  const std::size_t bs = 16, w = 48, h = 32, n = 4;
  const BlockGrid grid(w, h, bs);
  const auto a = MixingMatrix::generate(3, 100, n * bs * bs);

  SUBCASE("zeros in, zeros out") {
    StreamAccumulator acc(a, grid, n);
    for (std::size_t j = 0; j < n; ++j) acc.push(ResidualFrame(w, h), j);
    const auto out = std::move(acc).finish();
    CHECK(out.size() == grid.count());
    for (const auto& mv : out) {
      CHECK(mv.values.size() == 100);
      for (double v : mv.values) CHECK(v == 0.0);
    }
  }
  SUBCASE("ordering and completeness") {
    StreamAccumulator acc(a, grid, n);
    CHECK(code_of([&] { acc.push(ResidualFrame(w, h), 2); }) == Errc::out_of_order);
    for (std::size_t j = 0; j < 3; ++j) acc.push(ResidualFrame(w, h), j);
    CHECK(code_of([&] { acc.push(ResidualFrame(w, h), 1); }) == Errc::out_of_order);
    CHECK(code_of([&] { acc.push(ResidualFrame(w, 16), 3); }) == Errc::dimension_mismatch);
    CHECK(acc.frames_pushed() == 3);
    CHECK(code_of([&] { std::move(acc).finish(); }) == Errc::incomplete_group);
  }
  SUBCASE("holds only blocks * m running sums") {
    StreamAccumulator acc(a, grid, n);
    CHECK(acc.partial_bytes() == grid.count() * 100 * sizeof(double));
  }
  SUBCASE("matrix shape must match composite") {
    const auto small = MixingMatrix::generate(3, 10, 100);
    CHECK(code_of([&] { StreamAccumulator(small, grid, n); }) == Errc::shape_mismatch);
  }
}

TEST_CASE("streamed mixing equals batch mixing, serial and parallel") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = t % 3 == 0 ? 9 : 4;
    const std::size_t bs = 8, w = 48, h = 24;
    const BlockGrid grid(w, h, bs);
    const auto a = MixingMatrix::generate(rng(), 1 + rng() % (n * bs * bs), n * bs * bs);
    const auto residuals = random_residuals(rng, n, w, h);

    const auto batch = mix_group(a, residuals, grid, Exec::serial);
    const auto batch_par = mix_group(a, residuals, grid, Exec::parallel);
    StreamAccumulator serial(a, grid, n), parallel(a, grid, n);
    for (std::size_t j = 0; j < n; ++j) {
      serial.push(residuals[j], j, Exec::serial);
      parallel.push(residuals[j], j, Exec::parallel);
    }
    const auto s = std::move(serial).finish();
    const auto p = std::move(parallel).finish();
    REQUIRE(s.size() == batch.size());
    for (std::size_t b = 0; b < s.size(); ++b) {
      CHECK(s[b].position == batch[b].position);
      double worst = 0.0;
      for (std::size_t i = 0; i < s[b].values.size(); ++i)
        worst = std::max(worst, std::abs(s[b].values[i] - batch[b].values[i]));
      CHECK(worst <= 1e-9);
      CHECK(s[b].values == p[b].values);
      CHECK(batch[b].values == batch_par[b].values);
    }
  }
}
