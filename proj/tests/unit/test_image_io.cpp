#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "facediff/errors.hpp"
#include "facediff/image_io.hpp"
#include "support/test_images.hpp"

using namespace facediff;

namespace {
std::filesystem::path scratch_dir() {
  auto d = std::filesystem::temp_directory_path() / "facediff_image_io";
  std::filesystem::create_directories(d);
  return d;
}
}  // namespace

TEST_CASE("PNG round trip after quantization") {
  const Tensor img = facediff::testing::natural_image(24, 2);
  const auto path = scratch_dir() / "rt.png";
  write_png(path, img);
  const Tensor back = read_png(path);
  CHECK(back.same_shape(img));
  CHECK(back.data == quantize8(img).data);
  // A quantized image survives a second round trip bit-exactly.
  write_png(path, back);
  CHECK(read_png(path).data == back.data);
}

TEST_CASE("quantization is round(v * 255) after clamping") {
  Tensor t(1, 4, 1);
  t.data = {-0.2, 0.5, 1.0 / 255.0 * 0.49, 1.7};
  const Tensor q = quantize8(t);
  CHECK(q.data[0] == 0.0);
  CHECK(q.data[1] == 128.0 / 255.0);
  CHECK(q.data[2] == 0.0);
  CHECK(q.data[3] == 1.0);
}

TEST_CASE("gray PNGs load as three equal channels") {
  Tensor g(5, 6, 1, 0.25);
  const auto path = scratch_dir() / "gray.png";
  write_png(path, g);
  const Tensor back = read_png(path);
  CHECK(back.channels == 3);
  CHECK(back.at(2, 3, 0) == back.at(2, 3, 2));
  CHECK(back.at(2, 3, 1) == 64.0 / 255.0);
}

TEST_CASE("model space conversion") {
  Tensor t(1, 3, 1);
  t.data = {0.0, 0.5, 1.0};
  CHECK(to_model_space(t).data == std::vector<double>{-1.0, 0.0, 1.0});
  CHECK(from_model_space(to_model_space(t)).data == t.data);
  Tensor wild(1, 2, 1);
  wild.data = {-3.0, 3.0};
  CHECK(from_model_space(wild).data == std::vector<double>{0.0, 1.0});
}

TEST_CASE("I/O errors") {
  CHECK_THROWS_AS(read_png(scratch_dir() / "missing.png"), IoError);
  {
    std::ofstream os(scratch_dir() / "junk.png");
    os << "junk";
  }
  CHECK_THROWS_AS(read_png(scratch_dir() / "junk.png"), IoError);
  CHECK_THROWS_AS(write_png(scratch_dir() / "bad.png", Tensor(2, 2, 2)), ShapeError);
  CHECK_THROWS_AS(list_pngs(scratch_dir() / "nope"), IoError);
}

TEST_CASE("list_pngs is sorted and filters extensions") {
  const auto d = scratch_dir() / "listing";
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  for (const char* n : {"b.png", "a.png", "c.txt"}) std::ofstream(d / n) << "x";
  const auto files = list_pngs(d);
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "a.png");
  CHECK(files[1].filename() == "b.png");
}
