#pragma once

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "v2ir/common.hpp"
#include "v2ir/image.hpp"

namespace v2ir {

// Binary portable pixmaps: P5 for 1-channel, P6 for 3-channel, maxval 255
// only. Writes use the canonical header `P5\n{w} {h}\n255\n`, so
// write-then-read and read-then-write round trips are byte-identical.

namespace detail {

inline int pnm_token(std::istream& in, const std::string& path) {
  // Skips whitespace and `#` comments, then reads one decimal token.
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#')
      while (c != EOF && c != '\n') c = in.get();
    c = in.get();
  }
  require_data(c != EOF, path + ": truncated pixmap header");
  long value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    require_data(value <= 1 << 20, path + ": pixmap header value out of range");
    c = in.get();
  }
  require_data(any, path + ": malformed pixmap header");
  if (c != EOF) in.unget();
  return static_cast<int>(value);
}

}  // namespace detail

inline Image read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require_data(in.good(), path + ": cannot open for reading");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  require_data(in.gcount() == 2 && magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6'),
               path + ": not a P5/P6 pixmap");
  const int channels = magic[1] == '5' ? 1 : 3;
  const int width = detail::pnm_token(in, path);
  const int height = detail::pnm_token(in, path);
  const int maxval = detail::pnm_token(in, path);
  require_data(width > 0 && height > 0, path + ": non-positive image extents");
  require_data(maxval == 255, path + ": unsupported maxval (must be 255)");
  const int sep = in.get();
  require_data(sep != EOF && std::isspace(sep), path + ": missing header terminator");

  Image img(width, height, channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  require_data(static_cast<std::size_t>(in.gcount()) == img.pixels.size(),
               path + ": truncated pixel payload");
  return img;
}

inline void write_image(const Image& img, const std::string& path) {
  require(img.channels == 1 || img.channels == 3, "write_image: channels must be 1 or 3");
  require(img.pixels.size() ==
              static_cast<std::size_t>(img.width) * img.height * img.channels,
          "write_image: pixel buffer does not match extents");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require_data(out.good(), path + ": cannot open for writing");
  out << (img.channels == 1 ? "P5" : "P6") << '\n'
      << img.width << ' ' << img.height << '\n'
      << "255" << '\n';
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  require_data(out.good(), path + ": write failed");
}

}  // namespace v2ir
