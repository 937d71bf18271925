#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "ubss/exec.hpp"
#include "ubss/frame.hpp"
#include "ubss/mixing.hpp"
#include "ubss/tv_solver.hpp"

namespace ubss {

enum class KeyMode : std::uint8_t { raw };
enum class MeasurementFormat : std::uint8_t { f32, q16 };
enum class MixingMode : std::uint8_t { residual, nonresidual };

struct CodecConfig {
  std::size_t n = 4;            // UBSS frames per GOP, perfect square
  std::size_t block_size = 16;  // tile side in pixels
  double sampling_rate = 0.25;  // m / k
  std::uint64_t seed = 1;
  SolverParams solver;
  KeyMode key_mode = KeyMode::raw;
  MeasurementFormat measurement_format = MeasurementFormat::f32;
  /// nonresidual mixes raw frames; only meant for ablation runs.
  MixingMode mode = MixingMode::residual;

  std::size_t composite_length() const noexcept { return n * block_size * block_size; }
  /// m = round(rate * k), at least 1.
  std::size_t measurements_per_block() const;
  void validate() const;
};

/// Per-block uniform scalar quantizer over [lo, hi].
struct Q16Block {
  float lo = 0.0f;
  float hi = 0.0f;
  std::vector<std::uint16_t> codes;
  friend bool operator==(const Q16Block&, const Q16Block&) = default;
};

using EncodedBlock = std::variant<std::vector<float>, Q16Block>;

Q16Block quantize_q16(std::span<const double> values);
std::vector<double> dequantize(const EncodedBlock& block);

inline constexpr std::uint8_t kBitstreamVersion = 1;
inline constexpr std::size_t kHeaderBytes = 30;

struct BitstreamHeader {
  std::uint8_t version = kBitstreamVersion;
  MixingMode mode = MixingMode::residual;
  MeasurementFormat format = MeasurementFormat::f32;
  std::uint8_t generator_id = kGeneratorMt19937BoxMuller;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint8_t gop_n = 4;
  std::uint8_t block_size = 16;
  std::uint32_t frame_count = 0;
  std::uint64_t seed = 0;
  std::uint32_t m_per_block = 0;

  std::size_t gop_count() const noexcept { return frame_count / (gop_n + 1u); }
  std::size_t trailing_count() const noexcept { return frame_count % (gop_n + 1u); }
  std::size_t blocks_per_frame() const noexcept;
  std::size_t composite_side() const noexcept;
  std::size_t composite_length() const noexcept { return composite_side() * composite_side(); }
  std::size_t block_record_bytes() const noexcept;
  std::size_t payload_bytes() const noexcept;

  friend bool operator==(const BitstreamHeader&, const BitstreamHeader&) = default;
};

struct GopPayload {
  Frame key;
  std::vector<EncodedBlock> blocks;  // row-major grid order
};

/// Container layout, all little-endian:
///   "UBS1" | version u8 | flags u8 (bit0 nonresidual, bit1 q16) | generator u8 | reserved u8
///   width u16 | height u16 | gop_n u8 | block_size u8 | frame_count u32 | seed u64 | m u32
///   per GOP: key (width*height bytes), then per block f32[m] or (lo f32, hi f32, u16[m])
///   trailing key-only frames, raw.
struct Bitstream {
  BitstreamHeader header;
  std::vector<GopPayload> gops;
  std::vector<Frame> trailing;

  std::vector<std::uint8_t> serialize() const;
  std::size_t serialized_size() const noexcept { return kHeaderBytes + header.payload_bytes(); }

  /// Validates everything before returning; never yields a partial stream.
  static Bitstream parse(std::span<const std::uint8_t> bytes);
  static BitstreamHeader parse_header(std::span<const std::uint8_t> bytes);
};

struct RateReport {
  std::size_t source_samples = 0;
  std::size_t measurement_count = 0;
  std::size_t key_samples = 0;
  std::size_t bitstream_bytes = 0;
  std::size_t measurement_bytes = 0;  // 4 or 2 bytes per measurement
  std::size_t side_info_bytes = 0;    // q16 per-block (lo, hi)
  double pixel_domain_ratio = 0.0;    // source / (measurements + key samples)
  double bit_domain_ratio = 0.0;      // raw bits / bitstream bits
};

RateReport rate_report(const BitstreamHeader& header);
inline RateReport rate_report(const Bitstream& bitstream) { return rate_report(bitstream.header); }

/// Encodes one group by streamed mixing: each UBSS frame is turned into its
/// residual, pushed, and dropped before the next one is formed.
GopPayload encode_gop(const Frame& key, std::span<const Frame> ubss_frames,
                      const MixingMatrix& matrix, const CodecConfig& config,
                      Exec exec = Exec::parallel);

Bitstream encode_sequence(std::span<const Frame> frames, const CodecConfig& config,
                          Exec exec = Exec::parallel);

/// Reconstructs the n UBSS frames of one group.
std::vector<Frame> decode_gop(const GopPayload& gop, const BitstreamHeader& header,
                              const MixingMatrix& matrix, const SolverParams& params = {},
                              Exec exec = Exec::parallel);

std::vector<Frame> decode_sequence(const Bitstream& bitstream, const SolverParams& params = {},
                                   Exec exec = Exec::parallel);

}  // namespace ubss
