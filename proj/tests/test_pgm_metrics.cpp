#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "sdit/metrics.hpp"
#include "sdit/pgm.hpp"

using namespace sdit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("sdit_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("pgm round-trip preserves byte-representable intensities") {
  TempDir tmp;
  auto file = (tmp.path / "img.pgm").string();
  std::vector<double> img(16 * 8);
  for (std::size_t i = 0; i < img.size(); ++i)
    img[i] = (double)(i * 2 % 256) / 255.0 * 2.0 - 1.0;
  write_pgm(file, img, 16, 8);
  int w = 0, h = 0;
  auto back = read_pgm(file, w, h);
  CHECK(w == 16);
  CHECK(h == 8);
  REQUIRE(back.size() == img.size());
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(back[i] == img[i]);
}

TEST_CASE("pgm write clamps out-of-range values") {
  TempDir tmp;
  auto file = (tmp.path / "clamp.pgm").string();
  write_pgm(file, {-5.0, 5.0}, 2, 1);
  int w, h;
  auto back = read_pgm(file, w, h);
  CHECK(back[0] == -1.0);
  CHECK(back[1] == 1.0);
}

TEST_CASE("pgm comments are written after the magic and skipped on read") {
  TempDir tmp;
  auto file = (tmp.path / "c.pgm").string();
  std::vector<double> img = {-1.0, 0.0, 1.0, -1.0};
  write_pgm(file, img, 2, 2, {"config = {}", "build = test"});
  auto text = slurp(file);
  CHECK(text.find("# config = {}") != std::string::npos);
  CHECK(text.find("# build = test") != std::string::npos);
  int w, h;
  auto back = read_pgm(file, w, h);
  CHECK(back[0] == -1.0);
  CHECK(back[2] == 1.0);
  CHECK_THROWS(write_pgm(file, img, 2, 2, {"evil\ncomment"}));
  CHECK_THROWS(write_pgm(file, img, 3, 2));  // size mismatch
}

TEST_CASE("pgm read rejects truncation and wrong magic") {
  TempDir tmp;
  auto file = (tmp.path / "bad.pgm").string();
  int w, h;
  {
    std::ofstream out(file, std::ios::binary);
    out << "P5\n2 2\n255\n";  // header promises 4 pixels, none present
  }
  CHECK_THROWS(read_pgm(file, w, h));
  {
    std::ofstream out(file, std::ios::binary);
    out << "P6\n1 1\n255\nx";
  }
  CHECK_THROWS(read_pgm(file, w, h));
  CHECK_THROWS(read_pgm((tmp.path / "absent.pgm").string(), w, h));
}

TEST_CASE("metrics writer emits the fixed header and comment lines") {
  TempDir tmp;
  auto file = (tmp.path / "m.csv").string();
  {
    MetricsWriter w(file, {"config = {\"a\":1}", "build = v0"});
    MetricsRow r;
    r.step = 1;
    r.loss_noise = 0.5;
    r.loss_total = 0.5;
    r.match_cost = 12;
    r.expert_evals = 32;
    r.gate_stable = 1;
    r.hamming_online_ema = 3;
    w.write(r);
  }
  auto text = slurp(file);
  CHECK(text.find("# config = {\"a\":1}\n") == 0);
  CHECK(text.find("# build = v0\n") != std::string::npos);
  CHECK(text.find("step,loss_noise,loss_dp,loss_load,loss_total,match_cost,"
                  "expert_evals,gate_stable,hamming_online_ema\n") !=
        std::string::npos);
  CHECK(text.find("\n1,0.5,0,0,0.5,12,32,1,3\n") != std::string::npos);
}

TEST_CASE("metrics doubles survive text round-trip exactly") {
  TempDir tmp;
  auto file = (tmp.path / "p.csv").string();
  const double tricky = 0.1 + 0.2;  // not representable prettily
  {
    MetricsWriter w(file, {});
    MetricsRow r;
    r.step = 7;
    r.loss_noise = tricky;
    r.loss_dp = 1.0 / 3.0;
    w.write(r);
  }
  std::ifstream in(file);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') last = line;
  auto comma1 = last.find(',');
  auto comma2 = last.find(',', comma1 + 1);
  auto comma3 = last.find(',', comma2 + 1);
  double back_noise = std::stod(last.substr(comma1 + 1, comma2 - comma1 - 1));
  double back_dp = std::stod(last.substr(comma2 + 1, comma3 - comma2 - 1));
  CHECK(back_noise == tricky);
  CHECK(back_dp == 1.0 / 3.0);
  CHECK(MetricsWriter::format_double(1.0) == "1");
  CHECK(MetricsWriter::format_double(0.25) == "0.25");
}

TEST_CASE("metrics writer fails loudly on unwritable paths") {
  CHECK_THROWS(MetricsWriter("/nonexistent_dir_zz/m.csv", {}));
}
