#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "v2ir/blur.hpp"
#include "v2ir/common.hpp"
#include "v2ir/image.hpp"
#include "v2ir/image_io.hpp"
#include "v2ir/rng.hpp"

namespace {

namespace fs = std::filesystem;

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("v2ir_imgtest_" + name)).string();
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

v2ir::Image random_image(int w, int h, int c, v2ir::Rng& rng) {
  v2ir::Image img(w, h, c);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

// Direct transcription of the selective-blur rule, kept deliberately naive:
// recompute the Gaussian weight per neighbor, no tables, no early exits.
v2ir::Image blur_oracle(const v2ir::Image& img, int radius, int max_delta) {
  if (radius == 0) return img;
  const double sigma = radius / 2.0;
  v2ir::Image out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        const int center = img.at(x, y, c);
        double acc = 0.0, wsum = 0.0;
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx) {
            int qx = x + dx, qy = y + dy;
            if (qx < 0) qx = 0;
            if (qx >= img.width) qx = img.width - 1;
            if (qy < 0) qy = 0;
            if (qy >= img.height) qy = img.height - 1;
            const int v = img.at(qx, qy, c);
            if (v - center <= max_delta && center - v <= max_delta) {
              const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
              acc += w * v;
              wsum += w;
            }
          }
        const long r = std::llround(acc / wsum);
        out.at(x, y, c) = static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
      }
  return out;
}

TEST(Image, ConstructionAndIndexing) {
  v2ir::Image img(3, 2, 3, 9);
  EXPECT_EQ(img.pixels.size(), 18u);
  EXPECT_EQ(img.at(0, 0, 0), 9);
  img.at(2, 1, 1) = 77;
  EXPECT_EQ(img.pixels[(1 * 3 + 2) * 3 + 1], 77);
  EXPECT_THROW(v2ir::Image(0, 2, 1), std::invalid_argument);
  EXPECT_THROW(v2ir::Image(2, -1, 1), std::invalid_argument);
  EXPECT_THROW(v2ir::Image(2, 2, 2), std::invalid_argument);
}

TEST(ImageIo, PgmRoundTripIsBitExact) {
  v2ir::Image img(2, 2, 1);
  img.pixels = {0, 128, 255, 7};
  const std::string path = temp_path("roundtrip.pgm");
  v2ir::write_image(img, path);
  const v2ir::Image back = v2ir::read_image(path);
  EXPECT_TRUE(back == img);
  EXPECT_EQ(read_bytes(path), std::string("P5\n2 2\n255\n") +
                                  std::string("\x00\x80\xff\x07", 4));
}

TEST(ImageIo, PpmRoundTripIsBitExact) {
  v2ir::Rng rng(11, "ppm");
  const v2ir::Image img = random_image(5, 3, 3, rng);
  const std::string path = temp_path("roundtrip.ppm");
  v2ir::write_image(img, path);
  EXPECT_TRUE(v2ir::read_image(path) == img);
  const std::string bytes = read_bytes(path);
  EXPECT_EQ(bytes.substr(0, 9), "P6\n5 3\n25");
  EXPECT_EQ(bytes.size(), 11u + 45u);
}

TEST(ImageIo, ReaderAcceptsCommentsAndWhitespace) {
  const std::string path = temp_path("comments.pgm");
  write_bytes(path, "P5 # magic\n # a comment line\n  2\t2 # extents\n255\n\x01\x02\x03\x04");
  const v2ir::Image img = v2ir::read_image(path);
  EXPECT_EQ(img.width, 2);
  EXPECT_EQ(img.height, 2);
  EXPECT_EQ(img.channels, 1);
  EXPECT_EQ(img.at(1, 1, 0), 4);
}

TEST(ImageIo, ReaderRejectsMalformedFiles) {
  const std::string path = temp_path("bad.pnm");
  write_bytes(path, "P4\n2 2\n255\n\x01\x02\x03\x04");
  EXPECT_THROW(v2ir::read_image(path), v2ir::data_error);
  write_bytes(path, "P5\n2 2\n65535\n\x01\x02\x03\x04");
  EXPECT_THROW(v2ir::read_image(path), v2ir::data_error);
  write_bytes(path, "P5\n2 2\n254\n\x01\x02\x03\x04");
  EXPECT_THROW(v2ir::read_image(path), v2ir::data_error);
  write_bytes(path, "P5\n2 2\n255\n\x01\x02\x03");  // payload short one byte
  EXPECT_THROW(v2ir::read_image(path), v2ir::data_error);
  write_bytes(path, "P5\n2 x\n255\n\x01\x02\x03\x04");
  EXPECT_THROW(v2ir::read_image(path), v2ir::data_error);
  EXPECT_THROW(v2ir::read_image(temp_path("does_not_exist.pgm")), v2ir::data_error);
}

TEST(Blur, ConstantImageIsUnchanged) {
  for (int radius : {1, 3, 5}) {
    v2ir::Image img(9, 7, 3, 77);
    EXPECT_TRUE(v2ir::selective_gaussian_blur(img, radius, 50) == img) << "radius " << radius;
  }
}

TEST(Blur, IsolatedOutlierSurvivesAndIsExcluded) {
  v2ir::Image img(9, 9, 1, 0);
  img.at(4, 4, 0) = 255;
  const v2ir::Image out = v2ir::selective_gaussian_blur(img, 5, 50);
  // The outlier keeps only itself (all neighbors differ by 255 > 50).
  EXPECT_EQ(out.at(4, 4, 0), 255);
  // Its neighbors average zeros only: the outlier never leaks.
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x)
      if (!(x == 4 && y == 4)) EXPECT_EQ(out.at(x, y, 0), 0) << x << "," << y;
}

TEST(Blur, HardStepAboveDeltaIsPreserved) {
  v2ir::Image img(12, 6, 1);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 12; ++x) img.at(x, y, 0) = x < 6 ? 10 : 200;
  EXPECT_TRUE(v2ir::selective_gaussian_blur(img, 5, 50) == img);
}

TEST(Blur, RadiusZeroIsPassThrough) {
  v2ir::Rng rng(3, "r0");
  const v2ir::Image img = random_image(8, 8, 3, rng);
  EXPECT_TRUE(v2ir::selective_gaussian_blur(img, 0, 50) == img);
}

TEST(Blur, RejectsBadParameters) {
  v2ir::Image img(4, 4, 1, 0);
  EXPECT_THROW(v2ir::selective_gaussian_blur(img, -1, 50), std::invalid_argument);
  EXPECT_THROW(v2ir::selective_gaussian_blur(img, 2, -1), std::invalid_argument);
  EXPECT_THROW(v2ir::selective_gaussian_blur(img, 2, 256), std::invalid_argument);
}

TEST(Blur, MatchesBruteForceOracleOnRandomImages) {
  v2ir::Rng rng(2026, "blur-oracle");
  for (int trial = 0; trial < 100; ++trial) {
    for (int channels : {1, 3}) {
      v2ir::Rng tr = rng.child("trial", static_cast<std::uint64_t>(trial * 2 + channels));
      const v2ir::Image img = random_image(16, 16, channels, tr);
      const v2ir::Image got = v2ir::selective_gaussian_blur(img, 5, 50);
      const v2ir::Image want = blur_oracle(img, 5, 50);
      ASSERT_TRUE(got == want) << "trial " << trial << " channels " << channels;
    }
  }
}

TEST(Blur, MatchesOracleAcrossParameterGrid) {
  v2ir::Rng rng(77, "blur-grid");
  for (int radius : {1, 2, 4}) {
    for (int delta : {0, 30, 255}) {
      v2ir::Rng tr = rng.child("cfg", static_cast<std::uint64_t>(radius * 1000 + delta));
      const v2ir::Image img = random_image(11, 9, 3, tr);
      ASSERT_TRUE(v2ir::selective_gaussian_blur(img, radius, delta) ==
                  blur_oracle(img, radius, delta))
          << "radius " << radius << " delta " << delta;
    }
  }
}

}  // namespace
