#include "ubss/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "ubss/error.hpp"

namespace ubss {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

}  // namespace

std::vector<Frame> moving_square_sequence(const MovingSquareOptions& o) {
  std::vector<Frame> frames;
  frames.reserve(o.frames);
  for (std::size_t t = 0; t < o.frames; ++t) {
    Frame f(o.width, o.height, std::vector<std::uint8_t>(o.width * o.height, o.background));
    const std::size_t x0 = o.x0 + t * o.step;
    for (std::size_t y = o.y0; y < std::min(o.y0 + o.square, o.height); ++y)
      for (std::size_t x = x0; x < std::min(x0 + o.square, o.width); ++x) f.at(x, y) = o.intensity;
    frames.push_back(std::move(f));
  }
  return frames;
}

double mean_ubss_psnr(std::span<const Frame> original, std::span<const Frame> decoded, std::size_t n) {
  if (original.size() != decoded.size()) throw Error(Errc::dimension_mismatch, "frame counts differ");
  const std::size_t group = n + 1;
  const std::size_t coded = (original.size() / group) * group;
  double sum = 0.0;
  std::size_t count = 0;
  bool all_lossless = true;
  for (std::size_t i = 0; i < coded; ++i) {
    if (i % group == 0) continue;
    const double p = psnr(original[i], decoded[i]);
    if (std::isinf(p)) {
      sum += kPsnrCeilingDb;
    } else {
      sum += p;
      all_lossless = false;
    }
    ++count;
  }
  if (all_lossless) return std::numeric_limits<double>::infinity();
  return sum / static_cast<double>(count);
}

const char* mode_name(MixingMode mode) noexcept {
  return mode == MixingMode::residual ? "residual" : "nonresidual";
}

MixingMode parse_mode(const std::string& name) {
  if (name == "residual") return MixingMode::residual;
  if (name == "nonresidual" || name == "non-residual") return MixingMode::nonresidual;
  throw Error(Errc::invalid_config, "unknown mode " + name);
}

ExperimentRow run_point(std::span<const Frame> frames, const std::string& sequence,
                        const CodecConfig& config, Exec exec) {
  ExperimentRow row;
  row.sequence = sequence;
  row.rate = config.sampling_rate;
  row.block_size = config.block_size;
  row.mode = config.mode;
  try {
    auto t0 = Clock::now();
    const auto bitstream = encode_sequence(frames, config, exec);
    row.encode_s = seconds_since(t0);

    t0 = Clock::now();
    const auto decoded = decode_sequence(bitstream, config.solver, exec);
    row.decode_s = seconds_since(t0);

    row.psnr_db = mean_ubss_psnr(frames, decoded, config.n);
    const auto rate = rate_report(bitstream);
    row.pixel_ratio = rate.pixel_domain_ratio;
    row.bit_ratio = rate.bit_domain_ratio;
  } catch (const Error& e) {
    row.error = std::string(errc_name(e.code()));
  }
  return row;
}

std::vector<ExperimentRow> run_sweep(std::span<const Frame> frames, const std::string& sequence,
                                     std::span<const double> rates,
                                     std::span<const MixingMode> modes, const CodecConfig& base,
                                     Exec exec) {
  std::vector<ExperimentRow> rows;
  for (double rate : rates) {
    for (auto mode : modes) {
      CodecConfig config = base;
      config.sampling_rate = rate;
      config.mode = mode;
      rows.push_back(run_point(frames, sequence, config, exec));
    }
  }
  return rows;
}

std::vector<ExperimentRow> run_blockstudy(std::span<const Frame> frames,
                                          const std::string& sequence,
                                          std::span<const std::size_t> block_sizes,
                                          const CodecConfig& base, Exec exec) {
  std::vector<ExperimentRow> rows;
  for (auto size : block_sizes) {
    CodecConfig config = base;
    config.block_size = size;
    auto row = run_point(frames, sequence, config, exec);
    if (row.ok()) {
      const auto gops = frames.size() / (config.n + 1);
      const auto composites =
          gops * (frames.front().width() / size) * (frames.front().height() / size);
      row.decode_s = composites ? row.decode_s / static_cast<double>(composites) : 0.0;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

TimingReport run_timing(std::span<const Frame> frames, const CodecConfig& config, std::size_t runs,
                        Exec exec) {
  TimingReport report;
  report.frames = frames.size();
  report.runs = std::max<std::size_t>(runs, 1);
  std::vector<double> enc, dec;
  for (std::size_t r = 0; r < report.runs; ++r) {
    auto t0 = Clock::now();
    const auto bitstream = encode_sequence(frames, config, exec);
    enc.push_back(seconds_since(t0));
    t0 = Clock::now();
    const auto decoded = decode_sequence(bitstream, config.solver, exec);
    dec.push_back(seconds_since(t0));
    report.psnr_db = mean_ubss_psnr(frames, decoded, config.n);
  }
  report.encode_s = median(enc);
  report.decode_s = median(dec);
  return report;
}

void write_csv_header(std::ostream& out) { out << kCsvHeader << '\n'; }

void write_csv_row(std::ostream& out, const ExperimentRow& row) {
  out << row.sequence << ',' << fmt_double(row.rate) << ',' << row.block_size << ','
      << mode_name(row.mode) << ',';
  if (!row.ok()) {
    out << "error:" << row.error << ",,,,\n";
    return;
  }
  out << fmt_double(row.psnr_db) << ',' << fmt_double(row.encode_s) << ','
      << fmt_double(row.decode_s) << ',' << fmt_double(row.pixel_ratio) << ','
      << fmt_double(row.bit_ratio) << '\n';
}

}  // namespace ubss
