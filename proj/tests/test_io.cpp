#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dsd/io.hpp"
#include "dsd/manifest.hpp"

using dsd::Image;

namespace {

std::filesystem::path tmp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "dsd_io_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

Image random_u8_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Image img(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) img.at(r, c) = double(rng() % 256);
  return img;
}

} // namespace

TEST_CASE("pgm: forced example bytes parse to forced values") {
  const std::string raw = std::string("P5\n2 2\n255\n") +
                          std::string({char(0), char(64), char(128), char(255)});
  std::istringstream is(raw);
  const Image img = dsd::read_pgm(is);
  REQUIRE(img.height() == 2);
  REQUIRE(img.width() == 2);
  REQUIRE(img.at(0, 0) == 0.0);
  REQUIRE(img.at(0, 1) == 64.0);
  REQUIRE(img.at(1, 0) == 128.0);
  REQUIRE(img.at(1, 1) == 255.0);
  REQUIRE(img.dynamic_range == 255.0);
}

TEST_CASE("pgm: 16-bit samples are big-endian") {
  const std::string raw = std::string("P5\n1 1\n65535\n") +
                          std::string({char(0x12), char(0x34)});
  std::istringstream is(raw);
  const Image img = dsd::read_pgm(is);
  REQUIRE(img.at(0, 0) == double(0x1234));
  REQUIRE(img.dynamic_range == 65535.0);

  Image wide(1, 2, 0.0, 65535.0);
  wide.at(0, 0) = 0x0102;
  wide.at(0, 1) = 40000;
  std::ostringstream os;
  dsd::write_pgm(os, wide);
  std::istringstream back(os.str());
  const Image round = dsd::read_pgm(back);
  REQUIRE(round.pixels == wide.pixels);
}

TEST_CASE("pgm: integer-valued 8-bit round trip is exact") {
  const Image img = random_u8_image(13, 9, 1);
  std::ostringstream os;
  dsd::write_pgm(os, img);
  std::istringstream is(os.str());
  REQUIRE(dsd::read_pgm(is).pixels == img.pixels);
}

TEST_CASE("pgm: malformed headers are rejected") {
  for (const std::string bad :
       {std::string("P6\n1 1\n255\nxxx"), std::string("P5\n0 2\n255\n"),
        std::string("P5\n2 2\n99999\n"), std::string("P5\n2 2\n255\nab")}) {
    std::istringstream is(bad);
    REQUIRE_THROWS_AS(dsd::read_pgm(is), dsd::io_error);
  }
  // comments in the header are fine
  std::istringstream is(std::string("P5 # comment\n# more\n1 1\n255\nZ"));
  REQUIRE(dsd::read_pgm(is).at(0, 0) == double('Z'));
}

TEST_CASE("dsf: write-then-read preserves doubles exactly") {
  Image img(3, 4);
  std::mt19937_64 rng(2);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c)
      img.at(r, c) = 1e3 * (double(rng() >> 11) * 0x1p-53) - 271.25;
  img.at(0, 0) = -0.0;
  img.at(2, 3) = 1.0 / 3.0;
  std::ostringstream os;
  dsd::write_dsf(os, img);
  std::istringstream is(os.str());
  const Image round = dsd::read_dsf(is);
  REQUIRE(round.pixels == img.pixels);

  std::istringstream bad("DSFX");
  REQUIRE_THROWS_AS(dsd::read_dsf(bad), dsd::io_error);
}

TEST_CASE("png: 8-bit grayscale round trip is exact") {
  const auto path = (tmp_dir() / "round8.png").string();
  const Image img = random_u8_image(21, 17, 3);
  dsd::write_png(path, img);
  const Image round = dsd::read_png(path);
  REQUIRE(round.pixels == img.pixels);
  REQUIRE(round.dynamic_range == 255.0);
}

TEST_CASE("png: 16-bit grayscale round trip is exact") {
  const auto path = (tmp_dir() / "round16.png").string();
  Image img(5, 6, 0.0, 65535.0);
  std::mt19937_64 rng(4);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 6; ++c) img.at(r, c) = double(rng() % 65536);
  dsd::write_png(path, img);
  const Image round = dsd::read_png(path);
  REQUIRE(round.pixels == img.pixels);
  REQUIRE(round.dynamic_range == 65535.0);
}

TEST_CASE("read_image: dispatches by content and rejects junk") {
  const auto dir = tmp_dir();
  const Image img = random_u8_image(6, 6, 5);

  const auto pgm = (dir / "a.pgm").string();
  dsd::write_image(pgm, img);
  REQUIRE(dsd::read_image(pgm).pixels == img.pixels);

  const auto dsf = (dir / "a.dsf").string();
  dsd::write_image(dsf, img);
  REQUIRE(dsd::read_image(dsf).pixels == img.pixels);

  const auto png = (dir / "a.png").string();
  dsd::write_image(png, img);
  REQUIRE(dsd::read_image(png).pixels == img.pixels);

  const auto junk = (dir / "junk.bin").string();
  std::ofstream(junk) << "not an image at all";
  REQUIRE_THROWS_AS(dsd::read_image(junk), dsd::io_error);
  REQUIRE_THROWS_AS(dsd::read_image((dir / "missing.pgm").string()),
                    dsd::io_error);
  REQUIRE_THROWS_AS(dsd::write_image((dir / "a.tiff").string(), img),
                    dsd::io_error);

  // clipping on export: reals clamp and round to the container depth
  Image hot(1, 3);
  hot.at(0, 0) = -12.7;
  hot.at(0, 1) = 300.2;
  hot.at(0, 2) = 99.5;
  const auto clipped = (dir / "clip.pgm").string();
  dsd::write_image(clipped, hot);
  const Image back = dsd::read_image(clipped);
  REQUIRE(back.at(0, 0) == 0.0);
  REQUIRE(back.at(0, 1) == 255.0);
  REQUIRE(back.at(0, 2) == 100.0);
}

TEST_CASE("dictionary container: round trip and validation") {
  dsd::Dictionary dict;
  std::mt19937_64 rng(6);
  dict.atoms = Eigen::MatrixXd::NullaryExpr(
      16, 24, [&]() { return 2.0 * (double(rng() >> 11) * 0x1p-53) - 1.0; });
  for (Eigen::Index k = 0; k < 24; ++k) dict.atoms.col(k).normalize();

  const auto path = (tmp_dir() / "dict.dsdd").string();
  dsd::write_dictionary(path, dict);
  const dsd::Dictionary round = dsd::read_dictionary(path);
  REQUIRE(round.atoms == dict.atoms);

  // header layout: magic, version, N, K as little-endian u32
  std::ifstream is(path, std::ios::binary);
  std::array<unsigned char, 16> head{};
  is.read(reinterpret_cast<char*>(head.data()), 16);
  REQUIRE(std::string(head.begin(), head.begin() + 4) == "DSDD");
  REQUIRE(head[4] == dsd::dict_file_version);
  REQUIRE(head[8] == 16);
  REQUIRE(head[12] == 24);

  const auto bad = (tmp_dir() / "bad.dsdd").string();
  std::ofstream(bad, std::ios::binary) << "DSDDjunkjunk";
  REQUIRE_THROWS_AS(dsd::read_dictionary(bad), dsd::io_error);
}

TEST_CASE("manifest: JSON round trip is lossless") {
  dsd::RunManifest m;
  m.command = "denoise";
  m.inputs["image"] = "noisy.pgm";
  m.outputs["image"] = "out.pgm";
  m.params = {{"sigma", "35"}, {"gamma", "90"}, {"seed", "17"}};
  m.wall_ms = 1234.5;
  m.status = "ok";

  const auto path = (tmp_dir() / "run.manifest.json").string();
  m.save(path);
  const dsd::RunManifest loaded = dsd::RunManifest::load(path);
  REQUIRE(loaded == m);
  REQUIRE(loaded.params.at("gamma") == "90");
  REQUIRE(loaded.library_version == dsd::version_string);
}
