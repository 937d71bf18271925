#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Run ubss(const std::string& args) {
  static int counter = 0;
  const auto tag = std::to_string(++counter);
  const fs::path out = "cli_stdout_" + tag, err = "cli_stderr_" + tag;
  const std::string cmd = std::string(UBSS_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  fs::remove(out);
  fs::remove(err);
  return r;
}

std::size_t count_lines(const std::string& s) {
  std::istringstream in(s);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++n;
  return n;
}

const std::string kFast = " --max-outer 40";

}  // namespace

TEST_CASE("encode is deterministic and decode writes numbered frames") {
  const fs::path dir = fs::temp_directory_path() / "ubss_cli_roundtrip";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto raw = (dir / "square.yuv").string();

  REQUIRE(ubss("synth --out " + raw + " --frames 10").status == 0);
  CHECK(fs::file_size(raw) == 176u * 144u * 10u);

  const auto a = (dir / "a.ubs").string(), b = (dir / "b.ubs").string();
  const std::string enc = "encode " + raw + " --width 176 --height 144 --rate 0.25 --out ";
  REQUIRE(ubss(enc + a).status == 0);
  REQUIRE(ubss(enc + b).status == 0);
  CHECK(slurp(a) == slurp(b));

  const auto prefix = (dir / "frame").string();
  const auto dec = ubss("decode " + a + " --out " + prefix + kFast);
  REQUIRE(dec.status == 0);
  for (int i = 0; i < 10; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05d.pgm", i);
    CHECK(fs::exists(dir / name));
  }
  CHECK_FALSE(fs::exists(dir / "frame_00010.pgm"));
  CHECK(slurp(dir / "frame_00000.pgm").rfind("P5\n176 144\n255\n", 0) == 0);

  SUBCASE("corrupted magic is rejected") {
    auto bytes = slurp(a);
    bytes[0] = 'X';
    const auto bad = (dir / "bad.ubs").string();
    std::ofstream(bad, std::ios::binary) << bytes;
    const auto r = ubss("decode " + bad + " --out " + (dir / "never").string());
    CHECK(r.status == 1);
    CHECK(r.err.find("bad-magic") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "never_00000.pgm"));
  }
  fs::remove_all(dir);
}

TEST_CASE("usage errors exit with status 2") {
  CHECK(ubss("encode some.yuv --height 144 --out x.ubs").status == 2);
  CHECK(ubss("encode --rate 0.25").status == 2);
  CHECK(ubss("frobnicate").status == 2);
  CHECK(ubss("encode --rate 1.5 --out x.ubs").status != 0);
}

TEST_CASE("sweep prints one CSV row per (rate, mode)") {
  const auto r = ubss("sweep --frames 5 --rates 0.1,0.3 --modes residual,nonresidual" + kFast);
  REQUIRE(r.status == 0);
  CHECK(r.out.rfind("sequence,rate,block_size,mode,psnr_db,encode_s,decode_s,pixel_ratio,bit_ratio\n", 0) == 0);
  CHECK(count_lines(r.out) == 5);
}

TEST_CASE("input errors exit with status 1") {
  const auto r = ubss("encode does_not_exist.yuv --width 176 --height 144 --out x.ubs");
  CHECK(r.status == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
}
