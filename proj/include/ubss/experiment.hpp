#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ubss/codec.hpp"

namespace ubss {

/// Constant background, one bright square translating horizontally.
struct MovingSquareOptions {
  std::size_t width = 176;
  std::size_t height = 144;
  std::size_t frames = 10;
  std::size_t square = 40;
  std::uint8_t background = 0;
  std::uint8_t intensity = 100;
  std::size_t step = 2;  // pixels per frame
  std::size_t x0 = 16;
  std::size_t y0 = 52;
};

std::vector<Frame> moving_square_sequence(const MovingSquareOptions& options = {});

/// Per-frame PSNRs of lossless frames are counted at this value when they
/// are averaged with lossy ones.
inline constexpr double kPsnrCeilingDb = 100.0;

/// Mean PSNR over the UBSS-coded frames (key frames are lossless).
/// +inf when every UBSS frame decodes exactly.
double mean_ubss_psnr(std::span<const Frame> original, std::span<const Frame> decoded,
                      std::size_t n);

struct ExperimentRow {
  std::string sequence;
  double rate = 0.0;
  std::size_t block_size = 0;
  MixingMode mode = MixingMode::residual;
  double psnr_db = 0.0;
  double encode_s = 0.0;
  double decode_s = 0.0;
  double pixel_ratio = 0.0;
  double bit_ratio = 0.0;
  std::string error;  // kebab-case reason when the point failed

  bool ok() const noexcept { return error.empty(); }
};

const char* mode_name(MixingMode mode) noexcept;
MixingMode parse_mode(const std::string& name);

/// One full encode -> decode -> PSNR cycle. Failures become an error row.
ExperimentRow run_point(std::span<const Frame> frames, const std::string& sequence,
                        const CodecConfig& config, Exec exec = Exec::parallel);

/// Rows in (rate, mode) order.
std::vector<ExperimentRow> run_sweep(std::span<const Frame> frames, const std::string& sequence,
                                     std::span<const double> rates,
                                     std::span<const MixingMode> modes, const CodecConfig& base,
                                     Exec exec = Exec::parallel);

/// Rows per block size; decode_s holds mean decode seconds per composite.
std::vector<ExperimentRow> run_blockstudy(std::span<const Frame> frames,
                                          const std::string& sequence,
                                          std::span<const std::size_t> block_sizes,
                                          const CodecConfig& base, Exec exec = Exec::parallel);

struct TimingReport {
  std::size_t frames = 0;
  std::size_t runs = 0;
  double encode_s = 0.0;  // median wall time over runs
  double decode_s = 0.0;
  double psnr_db = 0.0;

  double encode_per_frame() const noexcept { return frames ? encode_s / static_cast<double>(frames) : 0.0; }
  double decode_per_frame() const noexcept { return frames ? decode_s / static_cast<double>(frames) : 0.0; }
};

TimingReport run_timing(std::span<const Frame> frames, const CodecConfig& config,
                        std::size_t runs = 3, Exec exec = Exec::parallel);

inline constexpr const char* kCsvHeader =
    "sequence,rate,block_size,mode,psnr_db,encode_s,decode_s,pixel_ratio,bit_ratio";

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const ExperimentRow& row);

}  // namespace ubss
