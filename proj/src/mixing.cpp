#include "ubss/mixing.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "ubss/error.hpp"

namespace ubss {

namespace {

// 53-bit uniform in (0, 1]; never zero so log() below is finite.
double uniform_open0(std::mt19937_64& rng) {
  return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

std::size_t tiles_per_side_for(std::size_t n) {
  std::size_t r = 0;
  if (!perfect_square_root(n, &r)) throw Error(Errc::n_not_perfect_square, "n = " + std::to_string(n));
  return r;
}

// sum over one tile of A[row, col(tile, x, y)] * v(x, y)
template <typename Sample>
double tile_dot(const double* row, std::size_t tile, std::size_t block_size, std::size_t tps,
                const Sample* src, std::size_t src_stride) {
  double acc = 0.0;
  for (std::size_t y = 0; y < block_size; ++y) {
    const double* a = row + composite_index(tile, 0, y, block_size, tps);
    const Sample* s = src + y * src_stride;
    for (std::size_t x = 0; x < block_size; ++x) acc += a[x] * static_cast<double>(s[x]);
  }
  return acc;
}

}  // namespace

MixingMatrix MixingMatrix::generate(std::uint64_t seed, std::size_t m, std::size_t k) {
  if (m == 0 || m > k)
    throw Error(Errc::invalid_shape, "m = " + std::to_string(m) + ", k = " + std::to_string(k));
  std::mt19937_64 rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  std::vector<double> entries(m * k);
  for (std::size_t i = 0; i < entries.size(); i += 2) {
    const double r = std::sqrt(-2.0 * std::log(uniform_open0(rng)));
    const double theta = 2.0 * std::numbers::pi * uniform_open0(rng);
    entries[i] = scale * r * std::cos(theta);
    if (i + 1 < entries.size()) entries[i + 1] = scale * r * std::sin(theta);
  }
  return MixingMatrix(seed, m, k, std::move(entries));
}

MixingMatrix MixingMatrix::from_entries(std::size_t m, std::size_t k, std::vector<double> entries) {
  if (m == 0 || m > k || entries.size() != m * k)
    throw Error(Errc::invalid_shape, "m = " + std::to_string(m) + ", k = " + std::to_string(k));
  return MixingMatrix(0, m, k, std::move(entries));
}

void MixingMatrix::apply(std::span<const double> x, std::span<double> out) const {
  if (x.size() != k_ || out.size() != m_) throw Error(Errc::shape_mismatch, "A x");
  const double* a = entries_.data();
  for (std::size_t i = 0; i < m_; ++i, a += k_) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k_; ++j) acc += a[j] * x[j];
    out[i] = acc;
  }
}

void MixingMatrix::apply_transpose(std::span<const double> y, std::span<double> out) const {
  if (y.size() != m_ || out.size() != k_) throw Error(Errc::shape_mismatch, "A^T y");
  std::fill(out.begin(), out.end(), 0.0);
  const double* a = entries_.data();
  for (std::size_t i = 0; i < m_; ++i, a += k_) {
    const double yi = y[i];
    if (yi == 0.0) continue;
    for (std::size_t j = 0; j < k_; ++j) out[j] += a[j] * yi;
  }
}

ResidualFrame compute_residual(const Frame& frame, const Frame& key) {
  if (!frame.same_shape(key)) throw Error(Errc::dimension_mismatch, "residual operands");
  auto f = frame.samples();
  auto k = key.samples();
  std::vector<std::int16_t> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    out[i] = static_cast<std::int16_t>(static_cast<int>(f[i]) - static_cast<int>(k[i]));
  return ResidualFrame(frame.width(), frame.height(), std::move(out));
}

ResidualFrame as_residual(const Frame& frame) {
  auto f = frame.samples();
  return ResidualFrame(frame.width(), frame.height(), std::vector<std::int16_t>(f.begin(), f.end()));
}

Frame add_residual(const Frame& key, const ResidualFrame& residual) {
  if (key.width() != residual.width() || key.height() != residual.height())
    throw Error(Errc::dimension_mismatch, "residual operands");
  auto k = key.samples();
  auto r = residual.samples();
  std::vector<std::uint8_t> out(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) {
    const int v = static_cast<int>(k[i]) + r[i];
    if (v < 0 || v > 255) throw Error(Errc::invalid_shape, "residual leaves 8-bit range");
    out[i] = static_cast<std::uint8_t>(v);
  }
  return Frame(key.width(), key.height(), std::move(out));
}

CompositeBlock assemble_composite(std::span<const ResidualFrame> residuals, BlockPos position,
                                  std::size_t block_size) {
  const std::size_t tps = tiles_per_side_for(residuals.size());
  const auto& first = residuals.front();
  for (const auto& r : residuals)
    if (r.width() != first.width() || r.height() != first.height())
      throw Error(Errc::inconsistent_dimensions, "residuals differ in size");
  const BlockGrid grid(first.width(), first.height(), block_size);
  if (!grid.contains(position))
    throw Error(Errc::out_of_grid, "(" + std::to_string(position.col) + ", " +
                                       std::to_string(position.row) + ")");

  CompositeBlock block;
  block.side = tps * block_size;
  block.block_size = block_size;
  block.position = position;
  block.values.resize(block.side * block.side);
  const std::size_t x0 = position.col * block_size;
  const std::size_t y0 = position.row * block_size;
  for (std::size_t j = 0; j < residuals.size(); ++j)
    for (std::size_t y = 0; y < block_size; ++y)
      for (std::size_t x = 0; x < block_size; ++x)
        block.values[composite_index(j, x, y, block_size, tps)] = residuals[j].at(x0 + x, y0 + y);
  return block;
}

void scatter_tile(const CompositeBlock& block, std::size_t tile, std::span<double> raster,
                  std::size_t raster_width) {
  const std::size_t bs = block.block_size;
  const std::size_t tps = block.tiles_per_side();
  const std::size_t x0 = block.position.col * bs;
  const std::size_t y0 = block.position.row * bs;
  for (std::size_t y = 0; y < bs; ++y)
    for (std::size_t x = 0; x < bs; ++x)
      raster[(y0 + y) * raster_width + x0 + x] = block.values[composite_index(tile, x, y, bs, tps)];
}

MeasurementVector mix_batch(const MixingMatrix& matrix, const CompositeBlock& block) {
  if (matrix.cols() != block.values.size() || block.values.size() != block.side * block.side)
    throw Error(Errc::shape_mismatch, "matrix has " + std::to_string(matrix.cols()) +
                                          " columns, block has " + std::to_string(block.values.size()) + " samples");
  const std::size_t bs = block.block_size;
  const std::size_t tps = block.tiles_per_side();
  MeasurementVector out{block.position, std::vector<double>(matrix.rows(), 0.0)};
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const double* row = matrix.row(i).data();
    double acc = 0.0;
    for (std::size_t j = 0; j < tps * tps; ++j) {
      const double* src = block.values.data() + composite_index(j, 0, 0, bs, tps);
      acc += tile_dot(row, j, bs, tps, src, block.side);
    }
    out.values[i] = acc;
  }
  return out;
}

std::vector<MeasurementVector> mix_group(const MixingMatrix& matrix,
                                         std::span<const ResidualFrame> residuals,
                                         const BlockGrid& grid, Exec exec) {
  std::vector<MeasurementVector> out(grid.count());
  const auto count = static_cast<std::ptrdiff_t>(grid.count());
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
  for (std::ptrdiff_t b = 0; b < count; ++b) {
    const auto pos = grid.position(static_cast<std::size_t>(b));
    out[static_cast<std::size_t>(b)] =
        mix_batch(matrix, assemble_composite(residuals, pos, grid.block_size()));
  }
  return out;
}

StreamAccumulator::StreamAccumulator(const MixingMatrix& matrix, const BlockGrid& grid, std::size_t n)
    : matrix_(&matrix), grid_(grid), n_(n), tiles_per_side_(tiles_per_side_for(n)) {
  const std::size_t k = n * grid.block_size() * grid.block_size();
  if (matrix.cols() != k)
    throw Error(Errc::shape_mismatch, "matrix has " + std::to_string(matrix.cols()) +
                                          " columns, composite has " + std::to_string(k));
  partial_.assign(grid.count() * matrix.rows(), 0.0);
}

void StreamAccumulator::push(const ResidualFrame& residual, std::size_t frame_index_in_group,
                             Exec exec) {
  if (frame_index_in_group != pushed_ || pushed_ >= n_)
    throw Error(Errc::out_of_order, "expected frame " + std::to_string(pushed_) + ", got " +
                                        std::to_string(frame_index_in_group));
  if (residual.width() != grid_.width() || residual.height() != grid_.height())
    throw Error(Errc::dimension_mismatch, "residual does not match block grid");

  const std::size_t m = matrix_->rows();
  const std::size_t bs = grid_.block_size();
  const std::size_t tile = pushed_;
  const std::size_t width = residual.width();
  const std::int16_t* samples = residual.samples().data();
  const auto count = static_cast<std::ptrdiff_t>(grid_.count());
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t b = 0; b < count; ++b) {
    const auto pos = grid_.position(static_cast<std::size_t>(b));
    const std::int16_t* src = samples + pos.row * bs * width + pos.col * bs;
    double* acc = partial_.data() + static_cast<std::size_t>(b) * m;
    for (std::size_t i = 0; i < m; ++i)
      acc[i] += tile_dot(matrix_->row(i).data(), tile, bs, tiles_per_side_, src, width);
  }
  ++pushed_;
}

std::vector<MeasurementVector> StreamAccumulator::finish() && {
  if (pushed_ != n_)
    throw Error(Errc::incomplete_group, std::to_string(pushed_) + " of " + std::to_string(n_) + " frames");
  const std::size_t m = matrix_->rows();
  std::vector<MeasurementVector> out;
  out.reserve(grid_.count());
  for (std::size_t b = 0; b < grid_.count(); ++b) {
    auto first = partial_.begin() + static_cast<std::ptrdiff_t>(b * m);
    out.push_back({grid_.position(b), std::vector<double>(first, first + static_cast<std::ptrdiff_t>(m))});
  }
  partial_ = {};
  return out;
}

}  // namespace ubss
