#include "ubss/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ubss/error.hpp"

namespace ubss {

std::size_t CodecConfig::measurements_per_block() const {
  const auto k = composite_length();
  const auto m = static_cast<std::size_t>(std::llround(sampling_rate * static_cast<double>(k)));
  return std::clamp<std::size_t>(m, 1, k);
}

void CodecConfig::validate() const {
  if (n < 4 || n > 255 || !perfect_square_root(n))
    throw Error(Errc::n_not_perfect_square, "n = " + std::to_string(n));
  if (block_size == 0 || block_size > 255) throw Error(Errc::invalid_config, "block size");
  if (!(sampling_rate > 0.0) || sampling_rate > 1.0)
    throw Error(Errc::invalid_config, "sampling rate must lie in (0, 1]");
  solver.validate();
}

namespace {

BitstreamHeader header_for(const CodecConfig& config, const Frame& first, std::size_t count) {
  if (first.width() > std::numeric_limits<std::uint16_t>::max() ||
      first.height() > std::numeric_limits<std::uint16_t>::max())
    throw Error(Errc::invalid_config, "frame dimensions exceed 16 bits");
  BitstreamHeader h;
  h.mode = config.mode;
  h.format = config.measurement_format;
  h.width = static_cast<std::uint16_t>(first.width());
  h.height = static_cast<std::uint16_t>(first.height());
  h.gop_n = static_cast<std::uint8_t>(config.n);
  h.block_size = static_cast<std::uint8_t>(config.block_size);
  h.frame_count = static_cast<std::uint32_t>(count);
  h.seed = config.seed;
  h.m_per_block = static_cast<std::uint32_t>(config.measurements_per_block());
  return h;
}

EncodedBlock encode_block(std::span<const double> values, MeasurementFormat format) {
  if (format == MeasurementFormat::q16) return quantize_q16(values);
  return std::vector<float>(values.begin(), values.end());
}

}  // namespace

GopPayload encode_gop(const Frame& key, std::span<const Frame> ubss_frames,
                      const MixingMatrix& matrix, const CodecConfig& config, Exec exec) {
  const BlockGrid grid(key.width(), key.height(), config.block_size);
  StreamAccumulator acc(matrix, grid, ubss_frames.size());
  for (std::size_t j = 0; j < ubss_frames.size(); ++j) {
    const ResidualFrame residual = config.mode == MixingMode::residual
                                       ? compute_residual(ubss_frames[j], key)
                                       : as_residual(ubss_frames[j]);
    acc.push(residual, j, exec);
  }
  GopPayload gop{key, {}};
  auto measurements = std::move(acc).finish();
  gop.blocks.reserve(measurements.size());
  for (const auto& mv : measurements) gop.blocks.push_back(encode_block(mv.values, config.measurement_format));
  return gop;
}

Bitstream encode_sequence(std::span<const Frame> frames, const CodecConfig& config, Exec exec) {
  config.validate();
  if (frames.empty()) throw Error(Errc::empty_input, "no frames to encode");
  const Frame& first = frames.front();
  for (const auto& f : frames)
    if (!f.same_shape(first)) throw Error(Errc::inconsistent_dimensions, "frames differ in size");
  if (first.width() % config.block_size != 0 || first.height() % config.block_size != 0)
    throw Error(Errc::dimension_not_divisible,
                std::to_string(first.width()) + "x" + std::to_string(first.height()) +
                    " by block size " + std::to_string(config.block_size));

  Bitstream bs;
  bs.header = header_for(config, first, frames.size());
  const auto matrix =
      MixingMatrix::generate(config.seed, bs.header.m_per_block, bs.header.composite_length());

  const std::size_t group = config.n + 1;
  const std::size_t gops = frames.size() / group;
  bs.gops.reserve(gops);
  for (std::size_t g = 0; g < gops; ++g) {
    const auto first_frame = g * group;
    bs.gops.push_back(encode_gop(frames[first_frame], frames.subspan(first_frame + 1, config.n), matrix, config, exec));
  }
  for (std::size_t i = gops * group; i < frames.size(); ++i) bs.trailing.push_back(frames[i]);
  return bs;
}

std::vector<Frame> decode_gop(const GopPayload& gop, const BitstreamHeader& header,
                              const MixingMatrix& matrix, const SolverParams& params, Exec exec) {
  const BlockGrid grid(header.width, header.height, header.block_size);
  const std::size_t n = header.gop_n;
  std::vector<MeasurementVector> measurements;
  measurements.reserve(gop.blocks.size());
  for (std::size_t b = 0; b < gop.blocks.size(); ++b)
    measurements.push_back({grid.position(b), dequantize(gop.blocks[b])});

  const auto composites =
      decode_composites(matrix, measurements, header.composite_side(), header.block_size, params, exec);

  const std::size_t pixels = std::size_t{header.width} * header.height;
  const bool add_key = header.mode == MixingMode::residual;
  std::vector<Frame> out;
  out.reserve(n);
  std::vector<double> raster(pixels);
  for (std::size_t j = 0; j < n; ++j) {
    for (const auto& c : composites) scatter_tile(c, j, raster, header.width);
    std::vector<std::uint8_t> samples(pixels);
    const auto key = gop.key.samples();
    for (std::size_t i = 0; i < pixels; ++i) {
      const double v = raster[i] + (add_key ? static_cast<double>(key[i]) : 0.0);
      samples[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    out.emplace_back(header.width, header.height, std::move(samples));
  }
  return out;
}

std::vector<Frame> decode_sequence(const Bitstream& bitstream, const SolverParams& params, Exec exec) {
  const auto& h = bitstream.header;
  if (bitstream.gops.size() != h.gop_count() || bitstream.trailing.size() != h.trailing_count())
    throw Error(Errc::truncated_payload, "payload does not match declared frame count");
  const auto matrix = MixingMatrix::generate(h.seed, h.m_per_block, h.composite_length());

  std::vector<Frame> frames;
  frames.reserve(h.frame_count);
  for (const auto& gop : bitstream.gops) {
    frames.push_back(gop.key);
    for (auto& f : decode_gop(gop, h, matrix, params, exec)) frames.push_back(std::move(f));
  }
  for (const auto& f : bitstream.trailing) frames.push_back(f);
  return frames;
}

}  // namespace ubss
