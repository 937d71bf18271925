#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ubss/exec.hpp"
#include "ubss/frame.hpp"

namespace ubss {

/// Generator ID written to the bitstream header: std::mt19937_64 seeded
/// with the 64-bit seed, 53-bit uniforms in (0, 1], Box-Muller pairs
/// (cosine branch first), scaled by 1/sqrt(m).
inline constexpr std::uint8_t kGeneratorMt19937BoxMuller = 1;

/// Dense m x k Gaussian measurement matrix, row-major.
class MixingMatrix {
 public:
  /// Entries i.i.d. N(0, 1/m), fully determined by (seed, m, k).
  static MixingMatrix generate(std::uint64_t seed, std::size_t m, std::size_t k);

  /// Arbitrary entries; used for identity and hand-built test operators.
  static MixingMatrix from_entries(std::size_t m, std::size_t k, std::vector<double> entries);

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t rows() const noexcept { return m_; }
  std::size_t cols() const noexcept { return k_; }
  std::span<const double> entries() const noexcept { return entries_; }
  std::span<const double> row(std::size_t i) const noexcept {
    return std::span<const double>(entries_).subspan(i * k_, k_);
  }
  double operator()(std::size_t i, std::size_t j) const noexcept { return entries_[i * k_ + j]; }

  /// out = A x
  void apply(std::span<const double> x, std::span<double> out) const;
  /// out = A^T y
  void apply_transpose(std::span<const double> y, std::span<double> out) const;

 private:
  MixingMatrix(std::uint64_t seed, std::size_t m, std::size_t k, std::vector<double> entries)
      : seed_(seed), m_(m), k_(k), entries_(std::move(entries)) {}

  std::uint64_t seed_;
  std::size_t m_;
  std::size_t k_;
  std::vector<double> entries_;
};

/// n co-located blocks laid out as a sqrt(n) x sqrt(n) arrangement of tiles.
/// Frame j occupies tile (j mod sqrt(n), j div sqrt(n)).
struct CompositeBlock {
  std::size_t side = 0;        // sqrt(n) * block_size
  std::size_t block_size = 0;  // tile side
  BlockPos position;
  std::vector<double> values;  // row-major side x side

  std::size_t tiles_per_side() const noexcept { return block_size ? side / block_size : 0; }
};

struct MeasurementVector {
  BlockPos position;
  std::vector<double> values;
};

/// Index into a row-major composite of pixel (x, y) of tile `tile`.
constexpr std::size_t composite_index(std::size_t tile, std::size_t x, std::size_t y,
                                      std::size_t block_size, std::size_t tiles_per_side) noexcept {
  const std::size_t side = block_size * tiles_per_side;
  const std::size_t tx = tile % tiles_per_side;
  const std::size_t ty = tile / tiles_per_side;
  return (ty * block_size + y) * side + tx * block_size + x;
}

/// frame - key, unclipped.
ResidualFrame compute_residual(const Frame& frame, const Frame& key);

/// Raw samples promoted to the signed residual type (non-residual ablation).
ResidualFrame as_residual(const Frame& frame);

/// Inverse of compute_residual: key + residual, exact.
Frame add_residual(const Frame& key, const ResidualFrame& residual);

CompositeBlock assemble_composite(std::span<const ResidualFrame> residuals, BlockPos position,
                                  std::size_t block_size);

/// Copies tile `tile` of a composite into block `position` of a real raster
/// of the given width.
void scatter_tile(const CompositeBlock& block, std::size_t tile, std::span<double> raster,
                  std::size_t raster_width);

/// A times the row-major vectorized composite. Each row is accumulated tile
/// by tile (0..n-1), left to right within a tile, so the result is identical
/// to what StreamAccumulator produces.
MeasurementVector mix_batch(const MixingMatrix& matrix, const CompositeBlock& block);

/// Batch route for a whole group: assemble + mix every block position.
std::vector<MeasurementVector> mix_group(const MixingMatrix& matrix,
                                         std::span<const ResidualFrame> residuals,
                                         const BlockGrid& grid, Exec exec = Exec::parallel);

/// Streamed mixing: x = sum_j A'_j f_j, where A'_j holds the columns of A
/// belonging to tile j. Only the running sums (blocks * m doubles) are kept.
class StreamAccumulator {
 public:
  StreamAccumulator(const MixingMatrix& matrix, const BlockGrid& grid, std::size_t n);

  void push(const ResidualFrame& residual, std::size_t frame_index_in_group,
            Exec exec = Exec::parallel);

  /// Requires n pushes. Consumes the accumulator.
  std::vector<MeasurementVector> finish() &&;

  std::size_t frames_pushed() const noexcept { return pushed_; }
  std::size_t group_size() const noexcept { return n_; }
  std::size_t partial_bytes() const noexcept { return partial_.size() * sizeof(double); }

 private:
  const MixingMatrix* matrix_;
  BlockGrid grid_;
  std::size_t n_;
  std::size_t tiles_per_side_;
  std::size_t pushed_ = 0;
  std::vector<double> partial_;  // block-major, m per block
};

}  // namespace ubss
