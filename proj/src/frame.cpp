#include "ubss/frame.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "ubss/error.hpp"

namespace ubss {

namespace {

void check_dims(std::size_t width, std::size_t height) {
  if (width == 0 || height == 0)
    throw Error(Errc::dimensions_zero, std::to_string(width) + "x" + std::to_string(height));
}

}  // namespace

Frame::Frame(std::size_t width, std::size_t height)
    : Frame(width, height, std::vector<std::uint8_t>(width * height, 0)) {}

Frame::Frame(std::size_t width, std::size_t height, std::vector<std::uint8_t> samples)
    : width_(width), height_(height), samples_(std::move(samples)) {
  check_dims(width, height);
  if (samples_.size() != width * height)
    throw Error(Errc::dimension_mismatch, "sample count does not match width*height");
}

ResidualFrame::ResidualFrame(std::size_t width, std::size_t height)
    : ResidualFrame(width, height, std::vector<std::int16_t>(width * height, 0)) {}

ResidualFrame::ResidualFrame(std::size_t width, std::size_t height,
                             std::vector<std::int16_t> samples)
    : width_(width), height_(height), samples_(std::move(samples)) {
  check_dims(width, height);
  if (samples_.size() != width * height)
    throw Error(Errc::dimension_mismatch, "sample count does not match width*height");
  for (auto v : samples_)
    if (v < -255 || v > 255) throw Error(Errc::invalid_shape, "residual sample out of [-255, 255]");
}

BlockGrid::BlockGrid(std::size_t width, std::size_t height, std::size_t block_size)
    : block_size_(block_size) {
  check_dims(width, height);
  if (block_size == 0 || width % block_size != 0 || height % block_size != 0)
    throw Error(Errc::dimension_not_divisible,
                std::to_string(width) + "x" + std::to_string(height) + " by block size " +
                    std::to_string(block_size));
  cols_ = width / block_size;
  rows_ = height / block_size;
}

RawFormat parse_raw_format(std::string_view name) {
  if (name == "gray8") return RawFormat::gray8;
  if (name == "yuv420p") return RawFormat::yuv420p;
  throw Error(Errc::unknown_format, std::string(name));
}

std::size_t raw_frame_bytes(std::size_t width, std::size_t height, RawFormat format) {
  const std::size_t luma = width * height;
  switch (format) {
    case RawFormat::gray8: return luma;
    case RawFormat::yuv420p: return luma + 2 * (((width + 1) / 2) * ((height + 1) / 2));
  }
  throw Error(Errc::unknown_format, "");
}

std::vector<Frame> load_raw_sequence(const std::filesystem::path& path, std::size_t width,
                                     std::size_t height, std::size_t count, RawFormat format) {
  check_dims(width, height);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());

  const std::size_t frame_bytes = raw_frame_bytes(width, height, format);
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  if (file_size < count * frame_bytes)
    throw Error(Errc::file_too_short, path.string() + " holds " + std::to_string(file_size) +
                                          " bytes, need " + std::to_string(count * frame_bytes));

  std::vector<Frame> frames;
  frames.reserve(count);
  const std::size_t luma = width * height;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<std::uint8_t> samples(luma);
    in.read(reinterpret_cast<char*>(samples.data()), static_cast<std::streamsize>(luma));
    // chroma planes are dropped
    in.seekg(static_cast<std::streamoff>(frame_bytes - luma), std::ios::cur);
    if (!in) throw Error(Errc::io_failure, "read failed on " + path.string());
    frames.emplace_back(width, height, std::move(samples));
  }
  return frames;
}

void save_raw_sequence(std::span<const Frame> frames, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, "cannot open " + path.string());
  for (const auto& f : frames)
    out.write(reinterpret_cast<const char*>(f.samples().data()),
              static_cast<std::streamsize>(f.size()));
  if (!out) throw Error(Errc::io_failure, "write failed on " + path.string());
}

bool perfect_square_root(std::size_t n, std::size_t* root) noexcept {
  if (n == 0) return false;
  auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  if (r * r != n) return false;
  if (root) *root = r;
  return true;
}

GopSegmentation segment_gops(std::span<const Frame> frames, std::size_t n) {
  if (n < 4 || !perfect_square_root(n))
    throw Error(Errc::n_not_perfect_square, "n = " + std::to_string(n));
  for (const auto& f : frames)
    if (!f.same_shape(frames.front()))
      throw Error(Errc::inconsistent_dimensions, "frames differ in size");

  GopSegmentation seg;
  const std::size_t group = n + 1;
  const std::size_t full = frames.size() / group;
  seg.gops.reserve(full);
  for (std::size_t g = 0; g < full; ++g) {
    auto first = frames.begin() + static_cast<std::ptrdiff_t>(g * group);
    seg.gops.push_back(Gop{*first, std::vector<Frame>(first + 1, first + static_cast<std::ptrdiff_t>(group)), g});
  }
  seg.trailing.assign(frames.begin() + static_cast<std::ptrdiff_t>(full * group), frames.end());
  return seg;
}

double mse(const Frame& reference, const Frame& test) {
  if (!reference.same_shape(test)) throw Error(Errc::dimension_mismatch, "psnr operands");
  auto a = reference.samples();
  auto b = test.samples();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double psnr(const Frame& reference, const Frame& test) {
  const double e = mse(reference, test);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / e);
}

void save_frame_pgm(const Frame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, "cannot open " + path.string());
  out << "P5\n" << frame.width() << ' ' << frame.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.samples().data()),
            static_cast<std::streamsize>(frame.size()));
  if (!out) throw Error(Errc::io_failure, "write failed on " + path.string());
}

Frame load_frame_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  std::string magic;
  std::size_t width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (magic != "P5" || maxval != 255) throw Error(Errc::unknown_format, "expected 8-bit P5 PGM");
  in.get();  // single whitespace before the raster
  std::vector<std::uint8_t> samples(width * height);
  in.read(reinterpret_cast<char*>(samples.data()), static_cast<std::streamsize>(samples.size()));
  if (!in) throw Error(Errc::file_too_short, path.string());
  return Frame(width, height, std::move(samples));
}

}  // namespace ubss
