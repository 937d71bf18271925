#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace ubss {

/// 8-bit luma raster, row-major.
class Frame {
 public:
  Frame(std::size_t width, std::size_t height);
  Frame(std::size_t width, std::size_t height, std::vector<std::uint8_t> samples);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return samples_.size(); }

  std::uint8_t at(std::size_t x, std::size_t y) const { return samples_[y * width_ + x]; }
  std::uint8_t& at(std::size_t x, std::size_t y) { return samples_[y * width_ + x]; }

  std::span<const std::uint8_t> samples() const noexcept { return samples_; }
  std::span<std::uint8_t> samples() noexcept { return samples_; }

  bool same_shape(const Frame& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<std::uint8_t> samples_;
};

/// Signed difference of two frames; every sample lies in [-255, 255].
class ResidualFrame {
 public:
  ResidualFrame(std::size_t width, std::size_t height);
  ResidualFrame(std::size_t width, std::size_t height, std::vector<std::int16_t> samples);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }

  std::int16_t at(std::size_t x, std::size_t y) const { return samples_[y * width_ + x]; }
  std::span<const std::int16_t> samples() const noexcept { return samples_; }

  friend bool operator==(const ResidualFrame&, const ResidualFrame&) = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<std::int16_t> samples_;
};

/// One key frame plus n UBSS frames.
struct Gop {
  Frame key;
  std::vector<Frame> ubss;
  std::size_t index = 0;
};

struct GopSegmentation {
  std::vector<Gop> gops;
  std::vector<Frame> trailing;  // coded key-only
};

struct BlockPos {
  std::size_t col = 0;
  std::size_t row = 0;
  friend bool operator==(const BlockPos&, const BlockPos&) = default;
};

/// Tiling of a frame into square blocks with no partial blocks.
class BlockGrid {
 public:
  BlockGrid(std::size_t width, std::size_t height, std::size_t block_size);

  std::size_t block_size() const noexcept { return block_size_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t count() const noexcept { return cols_ * rows_; }
  std::size_t width() const noexcept { return cols_ * block_size_; }
  std::size_t height() const noexcept { return rows_ * block_size_; }

  /// Row-major grid order.
  BlockPos position(std::size_t index) const noexcept { return {index % cols_, index / cols_}; }
  bool contains(BlockPos p) const noexcept { return p.col < cols_ && p.row < rows_; }

 private:
  std::size_t block_size_;
  std::size_t cols_;
  std::size_t rows_;
};

enum class RawFormat { gray8, yuv420p };

RawFormat parse_raw_format(std::string_view name);
std::size_t raw_frame_bytes(std::size_t width, std::size_t height, RawFormat format);

/// Reads `count` frames from a headerless raw file. Only luma is kept.
std::vector<Frame> load_raw_sequence(const std::filesystem::path& path, std::size_t width,
                                     std::size_t height, std::size_t count, RawFormat format);

void save_raw_sequence(std::span<const Frame> frames, const std::filesystem::path& path);

/// Returns true when n = r*r for some integer r >= 1; writes r.
bool perfect_square_root(std::size_t n, std::size_t* root = nullptr) noexcept;

/// Splits a sequence into groups of 1 key + n UBSS frames. Frames that
/// cannot fill a final group are returned as trailing key-only frames.
GopSegmentation segment_gops(std::span<const Frame> frames, std::size_t n);

/// 10*log10(255^2 / MSE); +inf for identical frames.
double psnr(const Frame& reference, const Frame& test);
double mse(const Frame& reference, const Frame& test);

void save_frame_pgm(const Frame& frame, const std::filesystem::path& path);
Frame load_frame_pgm(const std::filesystem::path& path);

}  // namespace ubss
