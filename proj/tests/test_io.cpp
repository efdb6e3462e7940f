#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "psog/common.hpp"
#include "psog/dataset.hpp"
#include "psog/eye_model.hpp"
#include "psog/io.hpp"
#include "psog/network.hpp"
#include "psog/rng.hpp"
#include "psog/sensor_array.hpp"

using namespace psog;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const char* name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("graymaps round-trip exactly at both depths") {
  TempDir dir("tmp_io_pgm");

  Image img(16, 9);
  Rng rng(3);
  for (auto& p : img.pix) p = static_cast<double>(rng.uniform_int(0, 255)) / 255.0;

  write_pgm(dir.file("a.pgm"), img);
  const Image back = read_pgm(dir.file("a.pgm"));
  REQUIRE(back.width == 16);
  REQUIRE(back.height == 9);
  CHECK(back.pix == img.pix);  // values sit exactly on the 8-bit lattice

  Image deep(7, 5);
  for (auto& p : deep.pix) p = static_cast<double>(rng.uniform_int(0, 65535)) / 65535.0;
  write_pgm(dir.file("b.pgm"), deep, 65535);
  CHECK(read_pgm(dir.file("b.pgm")).pix == deep.pix);

  // Arbitrary intensities land within half a quantization step.
  Image any(8, 8);
  for (auto& p : any.pix) p = rng.uniform();
  write_pgm(dir.file("c.pgm"), any);
  const Image q = read_pgm(dir.file("c.pgm"));
  for (std::size_t i = 0; i < any.pix.size(); ++i)
    CHECK(std::abs(q.pix[i] - any.pix[i]) <= 0.5 / 255.0 + 1e-12);

  // Out-of-range intensities clamp instead of wrapping.
  Image wild(2, 1);
  wild.pix = {1.7, -0.3};
  write_pgm(dir.file("d.pgm"), wild);
  const Image clamped = read_pgm(dir.file("d.pgm"));
  CHECK(clamped.pix[0] == 1.0);
  CHECK(clamped.pix[1] == 0.0);

  CHECK_THROWS_AS(write_pgm(dir.file("e.pgm"), img, 300), ConfigError);
}

TEST_CASE("ASCII graymaps parse, including header comments") {
  TempDir dir("tmp_io_p2");
  {
    std::ofstream out(dir.file("t.pgm"));
    out << "P2\n# a comment\n3 2\n# another\n10\n0 5 10\n10 5 0\n";
  }
  const Image img = read_pgm(dir.file("t.pgm"));
  REQUIRE(img.width == 3);
  REQUIRE(img.height == 2);
  CHECK(img.at(0, 0) == 0.0);
  CHECK(img.at(0, 1) == 0.5);
  CHECK(img.at(0, 2) == 1.0);
  CHECK(img.at(1, 0) == 1.0);

  {
    std::ofstream out(dir.file("bad.pgm"));
    out << "P7\n3 2\n10\n";
  }
  CHECK_THROWS(read_pgm(dir.file("bad.pgm")));
  {
    std::ofstream out(dir.file("short.pgm"), std::ios::binary);
    out << "P5\n4 4\n255\nab";  // 2 of 16 payload bytes
  }
  CHECK_THROWS(read_pgm(dir.file("short.pgm")));
  CHECK_THROWS(read_pgm(dir.file("missing.pgm")));
}

TEST_CASE("checkpoints round-trip parameters, stats, and metadata") {
  TempDir dir("tmp_io_ckpt");

  const auto params = nn::init_params(1234);
  NormStats norm;
  for (int i = 0; i < 15; ++i) {
    norm.mean.push_back(1.0 / (3.0 + i));
    norm.stddev.push_back(1e-8 + i * 0.1);
  }
  const std::map<std::string, std::string> meta = {
      {"regimen", "FT"}, {"subject", "3"}, {"note", "two words"}};

  const std::string path = dir.file("model.ckpt");
  save_checkpoint(path, params, norm, meta);

  const std::string text = slurp(path);
  CHECK(text.rfind("PSOG-CHECKPOINT v1\n", 0) == 0);
  CHECK(text.find("param_count 2710\n") != std::string::npos);
  CHECK(text.find("layer conv1.weight 0 36\n") != std::string::npos);
  CHECK(text.find("layer head.bias 2708 2\n") != std::string::npos);
  CHECK(text.find("norm 15\n") != std::string::npos);
  CHECK(text.substr(text.size() - 4) == "end\n");

  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.params == params);
  CHECK(ck.norm.mean == norm.mean);
  CHECK(ck.norm.stddev == norm.stddev);
  CHECK(ck.meta == meta);

  // Stat-free checkpoints stay stat-free.
  save_checkpoint(dir.file("plain.ckpt"), params, NormStats{});
  const Checkpoint plain = load_checkpoint(dir.file("plain.ckpt"));
  CHECK(plain.params == params);
  CHECK(plain.norm.mean.empty());
  CHECK(plain.meta.empty());

  NormStats bad;
  bad.mean = {1.0};
  CHECK_THROWS_AS(save_checkpoint(dir.file("x.ckpt"), params, bad), ConfigError);

  {
    std::ofstream out(dir.file("junk.ckpt"));
    out << "something else\n";
  }
  CHECK_THROWS(load_checkpoint(dir.file("junk.ckpt")));
  {
    std::ofstream out(dir.file("trunc.ckpt"));
    out << "PSOG-CHECKPOINT v1\nparam_count 5\nparams\n1\n2\n";
  }
  CHECK_THROWS(load_checkpoint(dir.file("trunc.ckpt")));
  CHECK_THROWS(load_checkpoint(dir.file("absent.ckpt")));
}

TEST_CASE("FNV-1a matches its published test vectors and chains") {
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(fnv1a64("ab") == fnv1a64("b", fnv1a64("a")));
  CHECK(fnv1a64("a") != fnv1a64("b"));
}

TEST_CASE("dataset fingerprints react to every field") {
  Dataset ds;
  ds.sensor_rows = 1;
  ds.sensor_cols = 2;
  for (int i = 0; i < 3; ++i) {
    Record r;
    r.subject_id = 1;
    r.gaze = {static_cast<double>(i), -static_cast<double>(i)};
    r.sensors = {0.25 * i, 0.5};
    ds.records.push_back(std::move(r));
  }

  const std::uint64_t base = dataset_fingerprint(ds);
  CHECK(dataset_fingerprint(ds) == base);

  Dataset mod = ds;
  mod.records[1].sensors[0] += 1e-15;
  CHECK(dataset_fingerprint(mod) != base);

  mod = ds;
  std::swap(mod.records[0], mod.records[1]);
  CHECK(dataset_fingerprint(mod) != base);

  mod = ds;
  mod.records[2].subject_id = 9;
  CHECK(dataset_fingerprint(mod) != base);

  mod = ds;
  mod.records[0].bin = ShiftBin::B3;
  CHECK(dataset_fingerprint(mod) != base);

  mod = ds;
  mod.normalized = true;
  CHECK(dataset_fingerprint(mod) != base);
}

TEST_CASE("image manifests ingest into sensor datasets") {
  TempDir dir("tmp_io_ingest");
  const ImageSpec spec;
  const ArrayLayout layout;
  const auto kernel = receptive_kernel(layout.window_side_px);

  EyeModelParams eye;
  eye.noise_std = 0.0;
  const Image f0 = render_eye(eye, spec, GazeSample{0.0, 0.0}, 0, 0, 0);
  const Image f1 = render_eye(eye, spec, GazeSample{10.0, -8.0}, 3, -2, 0);
  write_pgm(dir.file("f0.pgm"), f0, 65535);
  write_pgm(dir.file("f1.pgm"), f1, 65535);

  {
    std::ofstream out(dir.file("manifest.csv"));
    out << "# scale_px_per_mm=20\n";
    out << "image,subject,x_deg,y_deg,dx_mm,dy_mm,head_dx_px,head_dy_px\n";
    out << "f0.pgm,4,0,0,0,0,0,0\n";
    out << "f1.pgm,4,10,-8,1.2,0.5,3,-2\n";
  }

  const Dataset ds = ingest_image_dataset(dir.file("manifest.csv"), layout, kernel);
  REQUIRE(ds.records.size() == 2);
  CHECK(ds.records[0].subject_id == 4);
  CHECK(ds.records[1].gaze.x_deg == 10.0);
  CHECK(ds.records[1].gaze.y_deg == -8.0);
  CHECK(ds.records[1].shift.dx_mm == 1.2);
  CHECK(ds.records[1].bin == ShiftBin::B2);
  CHECK(ds.records[0].bin == ShiftBin::B1);

  // Readout equals simulating the quantized frame directly.
  Shift2D s1;
  s1.dx_mm = 1.2;
  s1.dy_mm = 0.5;
  s1 = mm_to_px(s1, 20.0);
  const auto want = simulate_frame(read_pgm(dir.file("f1.pgm")), spec, layout, kernel, s1, 3, -2, true);
  CHECK(ds.records[1].sensors == want.values);

  {
    std::ofstream out(dir.file("noscale.csv"));
    out << "image,subject,x_deg,y_deg,dx_mm,dy_mm\n";
    out << "f0.pgm,4,0,0,0,0\n";
  }
  CHECK_THROWS(ingest_image_dataset(dir.file("noscale.csv"), layout, kernel));
  {
    std::ofstream out(dir.file("nocol.csv"));
    out << "# scale_px_per_mm=20\n";
    out << "image,subject,x_deg,y_deg,dx_mm\n";
    out << "f0.pgm,4,0,0,0\n";
  }
  CHECK_THROWS(ingest_image_dataset(dir.file("nocol.csv"), layout, kernel));
  CHECK_THROWS(ingest_image_dataset(dir.file("absent.csv"), layout, kernel));
}
