#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "ubss/codec.hpp"
#include "ubss/error.hpp"

namespace ubss {

namespace {

constexpr std::uint8_t kMagic[4] = {'U', 'B', 'S', '1'};
constexpr std::uint8_t kFlagNonResidual = 0x01;
constexpr std::uint8_t kFlagQ16 = 0x02;

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t> take() && { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(Errc::truncated_payload, "stream ends early");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void validate_header(const BitstreamHeader& h) {
  if (h.version != kBitstreamVersion)
    throw Error(Errc::unsupported_version, std::to_string(h.version));
  if (h.generator_id != kGeneratorMt19937BoxMuller)
    throw Error(Errc::unknown_generator, std::to_string(h.generator_id));
  if (h.width == 0 || h.height == 0) throw Error(Errc::invalid_header, "zero dimensions");
  if (h.gop_n < 4 || !perfect_square_root(h.gop_n)) throw Error(Errc::invalid_header, "gop_n");
  if (h.block_size == 0 || h.width % h.block_size != 0 || h.height % h.block_size != 0)
    throw Error(Errc::invalid_header, "block size does not tile the frame");
  if (h.m_per_block == 0 || h.m_per_block > h.composite_length())
    throw Error(Errc::invalid_header, "measurement count");
}

}  // namespace

std::size_t BitstreamHeader::blocks_per_frame() const noexcept {
  if (block_size == 0) return 0;
  return (width / block_size) * (height / block_size);
}

std::size_t BitstreamHeader::composite_side() const noexcept {
  std::size_t r = 0;
  perfect_square_root(gop_n, &r);
  return r * block_size;
}

std::size_t BitstreamHeader::block_record_bytes() const noexcept {
  return format == MeasurementFormat::f32 ? 4u * m_per_block : 8u + 2u * m_per_block;
}

std::size_t BitstreamHeader::payload_bytes() const noexcept {
  const std::size_t frame_bytes = std::size_t{width} * height;
  return gop_count() * (frame_bytes + blocks_per_frame() * block_record_bytes()) +
         trailing_count() * frame_bytes;
}

Q16Block quantize_q16(std::span<const double> values) {
  Q16Block q;
  q.codes.resize(values.size(), 0);
  if (values.empty()) return q;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  q.lo = static_cast<float>(*lo);
  q.hi = static_cast<float>(*hi);
  const double range = static_cast<double>(q.hi) - static_cast<double>(q.lo);
  if (range <= 0.0) return q;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = (values[i] - static_cast<double>(q.lo)) / range * 65535.0;
    q.codes[i] = static_cast<std::uint16_t>(std::clamp(std::lround(t), 0L, 65535L));
  }
  return q;
}

std::vector<double> dequantize(const EncodedBlock& block) {
  if (const auto* f = std::get_if<std::vector<float>>(&block))
    return std::vector<double>(f->begin(), f->end());
  const auto& q = std::get<Q16Block>(block);
  const double lo = q.lo;
  const double step = (static_cast<double>(q.hi) - lo) / 65535.0;
  std::vector<double> out(q.codes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lo + step * q.codes[i];
  return out;
}

std::vector<std::uint8_t> Bitstream::serialize() const {
  const auto& h = header;
  validate_header(h);
  if (gops.size() != h.gop_count() || trailing.size() != h.trailing_count())
    throw Error(Errc::invalid_header, "frame count disagrees with payload");

  Writer w(serialized_size());
  for (auto c : kMagic) w.u8(c);
  w.u8(h.version);
  std::uint8_t flags = 0;
  if (h.mode == MixingMode::nonresidual) flags |= kFlagNonResidual;
  if (h.format == MeasurementFormat::q16) flags |= kFlagQ16;
  w.u8(flags);
  w.u8(h.generator_id);
  w.u8(0);
  w.u16(h.width);
  w.u16(h.height);
  w.u8(h.gop_n);
  w.u8(h.block_size);
  w.u32(h.frame_count);
  w.u64(h.seed);
  w.u32(h.m_per_block);

  for (const auto& gop : gops) {
    if (gop.key.width() != h.width || gop.key.height() != h.height || gop.blocks.size() != h.blocks_per_frame())
      throw Error(Errc::invalid_header, "GOP payload shape");
    w.bytes(gop.key.samples());
    for (const auto& block : gop.blocks) {
      if (h.format == MeasurementFormat::f32) {
        const auto& v = std::get<std::vector<float>>(block);
        if (v.size() != h.m_per_block) throw Error(Errc::invalid_header, "block length");
        for (float x : v) w.f32(x);
      } else {
        const auto& q = std::get<Q16Block>(block);
        if (q.codes.size() != h.m_per_block) throw Error(Errc::invalid_header, "block length");
        w.f32(q.lo);
        w.f32(q.hi);
        for (auto c : q.codes) w.u16(c);
      }
    }
  }
  for (const auto& f : trailing) {
    if (f.width() != h.width || f.height() != h.height) throw Error(Errc::invalid_header, "trailing frame shape");
    w.bytes(f.samples());
  }
  return std::move(w).take();
}

BitstreamHeader Bitstream::parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
    throw Error(Errc::bad_magic, "not a UBS1 stream");
  Reader r(bytes.subspan(4));
  BitstreamHeader h;
  h.version = r.u8();
  if (h.version != kBitstreamVersion) throw Error(Errc::unsupported_version, std::to_string(h.version));
  const std::uint8_t flags = r.u8();
  if (flags & ~(kFlagNonResidual | kFlagQ16)) throw Error(Errc::invalid_header, "unknown flag bits");
  h.mode = (flags & kFlagNonResidual) ? MixingMode::nonresidual : MixingMode::residual;
  h.format = (flags & kFlagQ16) ? MeasurementFormat::q16 : MeasurementFormat::f32;
  h.generator_id = r.u8();
  r.u8();  // reserved
  h.width = r.u16();
  h.height = r.u16();
  h.gop_n = r.u8();
  h.block_size = r.u8();
  h.frame_count = r.u32();
  h.seed = r.u64();
  h.m_per_block = r.u32();
  validate_header(h);
  return h;
}

Bitstream Bitstream::parse(std::span<const std::uint8_t> bytes) {
  Bitstream bs;
  bs.header = parse_header(bytes);
  const auto& h = bs.header;
  if (bytes.size() < bs.serialized_size())
    throw Error(Errc::truncated_payload, "have " + std::to_string(bytes.size()) + " bytes, header declares " +
                                             std::to_string(bs.serialized_size()));
  if (bytes.size() > bs.serialized_size())
    throw Error(Errc::invalid_header, std::to_string(bytes.size() - bs.serialized_size()) + " trailing bytes");

  Reader r(bytes.subspan(kHeaderBytes));
  const std::size_t frame_bytes = std::size_t{h.width} * h.height;
  auto read_frame = [&] {
    auto s = r.bytes(frame_bytes);
    return Frame(h.width, h.height, std::vector<std::uint8_t>(s.begin(), s.end()));
  };
  bs.gops.reserve(h.gop_count());
  for (std::size_t g = 0; g < h.gop_count(); ++g) {
    GopPayload gop{read_frame(), {}};
    gop.blocks.reserve(h.blocks_per_frame());
    for (std::size_t b = 0; b < h.blocks_per_frame(); ++b) {
      if (h.format == MeasurementFormat::f32) {
        std::vector<float> v(h.m_per_block);
        for (auto& x : v) x = r.f32();
        gop.blocks.emplace_back(std::move(v));
      } else {
        Q16Block q;
        q.lo = r.f32();
        q.hi = r.f32();
        q.codes.resize(h.m_per_block);
        for (auto& c : q.codes) c = r.u16();
        gop.blocks.emplace_back(std::move(q));
      }
    }
    bs.gops.push_back(std::move(gop));
  }
  for (std::size_t t = 0; t < h.trailing_count(); ++t) bs.trailing.push_back(read_frame());
  return bs;
}

RateReport rate_report(const BitstreamHeader& h) {
  validate_header(h);
  const std::size_t frame_samples = std::size_t{h.width} * h.height;
  RateReport r;
  r.source_samples = std::size_t{h.frame_count} * frame_samples;
  r.measurement_count = h.gop_count() * h.blocks_per_frame() * h.m_per_block;
  r.key_samples = (h.gop_count() + h.trailing_count()) * frame_samples;
  r.bitstream_bytes = kHeaderBytes + h.payload_bytes();
  r.measurement_bytes = r.measurement_count * (h.format == MeasurementFormat::f32 ? 4u : 2u);
  r.side_info_bytes = h.format == MeasurementFormat::q16 ? h.gop_count() * h.blocks_per_frame() * 8u : 0u;
  const std::size_t coded_samples = r.measurement_count + r.key_samples;
  r.pixel_domain_ratio = coded_samples ? static_cast<double>(r.source_samples) / static_cast<double>(coded_samples) : 0.0;
  r.bit_domain_ratio = static_cast<double>(r.source_samples) / static_cast<double>(r.bitstream_bytes);
  return r;
}

}  // namespace ubss
