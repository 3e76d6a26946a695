// Copyright 2026 The rdcseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "rdcseg/netpbm.h"

#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "rdcseg/tensor.h"

namespace rdcseg {
namespace {

void skip_space_and_comments(std::istream& is) {
  for (;;) {
    const int ch = is.peek();
    if (ch == '#') {
      std::string discard;
      std::getline(is, discard);
    } else if (ch != EOF && std::isspace(ch)) {
      is.get();
    } else {
      return;
    }
  }
}

std::size_t read_header_int(std::istream& is, const char* what) {
  skip_space_and_comments(is);
  std::size_t v = 0;
  bool any = false;
  while (std::isdigit(is.peek())) {
    v = v * 10 + static_cast<std::size_t>(is.get() - '0');
    any = true;
    RDC_CHECK(v < (1u << 24), "netpbm: " << what << " is implausibly large");
  }
  RDC_CHECK(any, "netpbm: expected " << what << " in header");
  return v;
}

struct Header {
  std::size_t width;
  std::size_t height;
};

Header read_header(std::istream& is, char kind) {
  char magic[2] = {0, 0};
  is.read(magic, 2);
  RDC_CHECK(is.good() && magic[0] == 'P' && magic[1] == kind,
            "netpbm: expected magic P" << kind);
  Header h{read_header_int(is, "width"), read_header_int(is, "height")};
  const std::size_t maxval = read_header_int(is, "maxval");
  RDC_CHECK(maxval == 255, "netpbm: only maxval 255 is supported, got " << maxval);
  // Exactly one whitespace byte separates the header from the raster.
  const int sep = is.get();
  RDC_CHECK(sep != EOF && std::isspace(sep), "netpbm: missing raster separator");
  RDC_CHECK(h.width > 0 && h.height > 0, "netpbm: empty image");
  return h;
}

void read_raster(std::istream& is, std::vector<std::uint8_t>& dst) {
  is.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(dst.size()));
  RDC_CHECK(is.gcount() == static_cast<std::streamsize>(dst.size()),
            "netpbm: truncated raster (" << is.gcount() << " of " << dst.size()
                                         << " bytes)");
}

}  // namespace

RgbImage read_ppm(std::istream& is) {
  const Header h = read_header(is, '6');
  RgbImage img(h.width, h.height);
  read_raster(is, img.pixels);
  return img;
}

GrayImage read_pgm(std::istream& is) {
  const Header h = read_header(is, '5');
  GrayImage img(h.width, h.height);
  read_raster(is, img.pixels);
  return img;
}

void write_ppm(std::ostream& os, const RgbImage& img) {
  RDC_CHECK(img.pixels.size() == img.width * img.height * 3, "ppm: bad pixel buffer");
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
}

void write_pgm(std::ostream& os, const GrayImage& img) {
  RDC_CHECK(img.pixels.size() == img.width * img.height, "pgm: bad pixel buffer");
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  RDC_CHECK(is.good(), "cannot open " << path);
  return read_ppm(is);
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  RDC_CHECK(is.good(), "cannot open " << path);
  return read_pgm(is);
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  std::ofstream os(path, std::ios::binary);
  RDC_CHECK(os.good(), "cannot write " << path);
  write_ppm(os, img);
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary);
  RDC_CHECK(os.good(), "cannot write " << path);
  write_pgm(os, img);
}

}  // namespace rdcseg
