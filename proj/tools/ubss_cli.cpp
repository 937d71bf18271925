// ubss: encode / decode / evaluation front end for the compressive video codec.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ubss/codec.hpp"
#include "ubss/error.hpp"
#include "ubss/experiment.hpp"

namespace fs = std::filesystem;
using namespace ubss;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct InputOptions {
  std::string path;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t frames = 0;  // 0: infer from file size
  std::string format = "gray8";
};

struct ConfigOptions {
  double rate = 0.25;
  std::size_t gop_n = 4;
  std::size_t block_size = 16;
  std::uint64_t seed = 1;
  std::string mode = "residual";
  std::string meas = "f32";
  SolverParams solver;
};

void add_input_options(CLI::App* cmd, InputOptions& in, bool path_required) {
  auto* path = cmd->add_option("input", in.path, "raw gray8/yuv420p file (omit for the built-in moving-square sequence)");
  if (path_required) path->required();
  auto* w = cmd->add_option("--width", in.width, "frame width in pixels");
  auto* h = cmd->add_option("--height", in.height, "frame height in pixels");
  if (path_required) {
    w->required();
    h->required();
  }
  cmd->add_option("--frames", in.frames, "number of frames to read (default: whole file)");
  cmd->add_option("--format", in.format, "raw layout")->check(CLI::IsMember({"gray8", "yuv420p"}));
}

void add_config_options(CLI::App* cmd, ConfigOptions& c, bool with_rate) {
  if (with_rate) cmd->add_option("--rate", c.rate, "sampling rate m/k in (0, 1]");
  cmd->add_option("--gop-n", c.gop_n, "UBSS frames per GOP (perfect square)");
  cmd->add_option("--block-size", c.block_size, "tile size in pixels");
  cmd->add_option("--seed", c.seed, "mixing matrix seed");
  cmd->add_option("--mode", c.mode, "mixing mode")->check(CLI::IsMember({"residual", "nonresidual"}));
  cmd->add_option("--meas", c.meas, "measurement format")->check(CLI::IsMember({"f32", "q16"}));
  cmd->add_option("--mu", c.solver.mu, "solver fidelity penalty");
  cmd->add_option("--beta", c.solver.beta, "solver splitting penalty");
  cmd->add_option("--tol", c.solver.outer_tol, "solver relative-change tolerance");
  cmd->add_option("--max-outer", c.solver.max_outer, "solver outer iteration cap");
  cmd->add_option("--max-inner", c.solver.max_inner, "solver gradient steps per outer iteration");
}

CodecConfig make_config(const ConfigOptions& c) {
  CodecConfig config;
  config.sampling_rate = c.rate;
  config.n = c.gop_n;
  config.block_size = c.block_size;
  config.seed = c.seed;
  config.mode = parse_mode(c.mode);
  config.measurement_format = c.meas == "q16" ? MeasurementFormat::q16 : MeasurementFormat::f32;
  config.solver = c.solver;
  return config;
}

std::vector<Frame> load_input(const InputOptions& in, std::string& name) {
  if (in.path.empty()) {
    name = "moving-square";
    MovingSquareOptions opts;
    if (in.frames != 0) opts.frames = in.frames;
    return moving_square_sequence(opts);
  }
  if (in.width == 0 || in.height == 0) throw CLI::ValidationError("--width and --height are required with an input file");
  const auto format = parse_raw_format(in.format);
  std::size_t count = in.frames;
  if (count == 0) {
    std::error_code ec;
    const auto size = fs::file_size(in.path, ec);
    if (ec) throw Error(Errc::io_failure, "cannot stat " + in.path);
    count = size / raw_frame_bytes(in.width, in.height, format);
  }
  name = fs::path(in.path).filename().string();
  for (auto& ch : name)
    if (ch == ',' || ch == '"' || ch == '\n') ch = '_';
  return load_raw_sequence(in.path, in.width, in.height, count, format);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_failure, "cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), {});
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_failure, "cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::io_failure, "write failed on " + path);
}

void print_rate(const RateReport& r) {
  std::printf("source_samples %zu\nmeasurement_count %zu\nkey_samples %zu\nbitstream_bytes %zu\n"
              "measurement_bytes %zu\nside_info_bytes %zu\npixel_ratio %.6f\nbit_ratio %.6f\n",
              r.source_samples, r.measurement_count, r.key_samples, r.bitstream_bytes,
              r.measurement_bytes, r.side_info_bytes, r.pixel_domain_ratio, r.bit_domain_ratio);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string frame_path(const std::string& prefix, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%05zu.pgm", index);
  return prefix + buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressive video codec based on underdetermined mixing and TV recovery"};
  app.require_subcommand(1);

  InputOptions enc_in;
  ConfigOptions enc_cfg;
  std::string enc_out;
  auto* enc = app.add_subcommand("encode", "encode a raw sequence into a bitstream");
  add_input_options(enc, enc_in, true);
  add_config_options(enc, enc_cfg, true);
  enc->add_option("--out", enc_out, "output bitstream path")->required();

  std::string dec_in, dec_out;
  SolverParams dec_solver;
  auto* dec = app.add_subcommand("decode", "decode a bitstream into PGM frames");
  dec->add_option("bitstream", dec_in, "bitstream path")->required();
  dec->add_option("--out", dec_out, "output prefix; frames go to <prefix>_NNNNN.pgm")->required();
  dec->add_option("--mu", dec_solver.mu, "solver fidelity penalty");
  dec->add_option("--beta", dec_solver.beta, "solver splitting penalty");
  dec->add_option("--tol", dec_solver.outer_tol, "solver relative-change tolerance");
  dec->add_option("--max-outer", dec_solver.max_outer, "solver outer iteration cap");
  dec->add_option("--max-inner", dec_solver.max_inner, "solver gradient steps per outer iteration");

  InputOptions sw_in;
  ConfigOptions sw_cfg;
  std::vector<double> sw_rates{0.1, 0.2, 0.4, 0.8};
  std::vector<std::string> sw_modes{"residual", "nonresidual"};
  auto* sweep = app.add_subcommand("sweep", "rate-distortion sweep as CSV");
  add_input_options(sweep, sw_in, false);
  add_config_options(sweep, sw_cfg, false);
  sweep->add_option("--rates", sw_rates, "sampling rates")->delimiter(',');
  sweep->add_option("--modes", sw_modes, "mixing modes")->delimiter(',')
      ->check(CLI::IsMember({"residual", "nonresidual"}));

  InputOptions bs_in;
  ConfigOptions bs_cfg;
  std::vector<std::size_t> bs_sizes{4, 8, 16};
  auto* blocks = app.add_subcommand("blockstudy", "decode time and PSNR per block size as CSV");
  add_input_options(blocks, bs_in, false);
  add_config_options(blocks, bs_cfg, true);
  blocks->add_option("--block-sizes", bs_sizes, "tile sizes")->delimiter(',');

  InputOptions tm_in;
  ConfigOptions tm_cfg;
  std::size_t tm_runs = 3;
  auto* timing = app.add_subcommand("timing", "encode vs decode wall time");
  add_input_options(timing, tm_in, false);
  add_config_options(timing, tm_cfg, true);
  timing->add_option("--runs", tm_runs, "repetitions; the median is reported");

  std::string syn_out;
  MovingSquareOptions syn;
  auto* synth = app.add_subcommand("synth", "write the moving-square sequence as raw gray8");
  synth->add_option("--out", syn_out, "output path")->required();
  synth->add_option("--frames", syn.frames, "frame count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return kExitUsage;
  }

  try {
    if (*enc) {
      std::string name;
      const auto frames = load_input(enc_in, name);
      const auto config = make_config(enc_cfg);
      const auto t0 = std::chrono::steady_clock::now();
      const auto bitstream = encode_sequence(frames, config);
      const auto bytes = bitstream.serialize();
      const double secs = seconds_since(t0);
      write_file(enc_out, bytes);
      print_rate(rate_report(bitstream));
      std::printf("encode_s %.6f\nencode_s_per_frame %.6f\n", secs, secs / static_cast<double>(frames.size()));
    } else if (*dec) {
      const auto bytes = read_file(dec_in);
      const auto bitstream = Bitstream::parse(bytes);
      const auto t0 = std::chrono::steady_clock::now();
      const auto frames = decode_sequence(bitstream, dec_solver);
      const double secs = seconds_since(t0);
      for (std::size_t i = 0; i < frames.size(); ++i) save_frame_pgm(frames[i], frame_path(dec_out, i));
      std::printf("frames %zu\ndecode_s %.6f\ndecode_s_per_frame %.6f\n", frames.size(), secs,
                  secs / static_cast<double>(frames.size()));
    } else if (*sweep) {
      std::string name;
      const auto frames = load_input(sw_in, name);
      std::vector<MixingMode> modes;
      for (const auto& m : sw_modes) modes.push_back(parse_mode(m));
      for (double r : sw_rates)
        if (!(r > 0.0) || r > 1.0) throw CLI::ValidationError("--rates must lie in (0, 1]");
      write_csv_header(std::cout);
      for (const auto& row : run_sweep(frames, name, sw_rates, modes, make_config(sw_cfg)))
        write_csv_row(std::cout, row);
    } else if (*blocks) {
      std::string name;
      const auto frames = load_input(bs_in, name);
      write_csv_header(std::cout);
      for (const auto& row : run_blockstudy(frames, name, bs_sizes, make_config(bs_cfg)))
        write_csv_row(std::cout, row);
    } else if (*timing) {
      std::string name;
      const auto frames = load_input(tm_in, name);
      const auto config = make_config(tm_cfg);
      const auto report = run_timing(frames, config, tm_runs);
      std::printf("sequence %s\nframes %zu\nruns %zu\nrate %.6g\nencode_s %.6f\ndecode_s %.6f\n"
                  "encode_s_per_frame %.6f\ndecode_s_per_frame %.6f\ndecode_over_encode %.2f\npsnr_db %.4f\n",
                  name.c_str(), report.frames, report.runs, config.sampling_rate, report.encode_s,
                  report.decode_s, report.encode_per_frame(), report.decode_per_frame(),
                  report.encode_s > 0 ? report.decode_s / report.encode_s : 0.0, report.psnr_db);
    } else if (*synth) {
      save_raw_sequence(moving_square_sequence(syn), syn_out);
    }
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
