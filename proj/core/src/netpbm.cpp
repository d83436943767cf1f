/* Copyright 2026 The elkpp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "elkpp/netpbm.h"

#include <cctype>
#include <fstream>
#include <sstream>

#include "elkpp/error.h"

namespace elkpp {

namespace {

class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, const std::string& source)
      : bytes_(bytes), source_(source) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_ + ": " + what);
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  std::size_t number(const char* field) {
    skip_space_and_comments();
    std::size_t v = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() &&
           std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (v > (1u << 24)) fail(std::string(field) + " too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) fail(std::string("expected ") + field);
    return v;
  }

  // Exactly one whitespace byte separates the header from the payload.
  void end_header() {
    if (pos_ >= bytes_.size() ||
        !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      fail("missing whitespace after maxval");
    }
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  const std::string& bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

}  // namespace

Raster parse_netpbm(const std::string& bytes, const std::string& source) {
  HeaderReader in(bytes, source);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    in.fail("not a binary PGM/PPM (expected P5 or P6)");
  }
  in.advance(2);
  Raster r;
  r.channels = bytes[1] == '6' ? 3 : 1;
  r.width = in.number("width");
  r.height = in.number("height");
  const std::size_t maxval = in.number("maxval");
  if (r.width == 0 || r.height == 0) in.fail("zero extent");
  if (maxval != 255) in.fail("maxval " + std::to_string(maxval) + " unsupported (need 255)");
  in.end_header();
  const std::size_t need = r.width * r.height * r.channels;
  if (bytes.size() - in.pos() < need) {
    in.fail("truncated payload: need " + std::to_string(need) + " bytes, have " +
            std::to_string(bytes.size() - in.pos()));
  }
  // One image per file; anything after the payload is rejected.
  if (bytes.size() - in.pos() > need) {
    in.fail(std::to_string(bytes.size() - in.pos() - need) + " trailing bytes after payload");
  }
  r.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(in.pos()),
                  bytes.begin() + static_cast<std::ptrdiff_t>(in.pos() + need));
  return r;
}

std::string encode_netpbm(const Raster& raster) {
  if (raster.channels != 1 && raster.channels != 3) {
    throw FormatError("netpbm: channels must be 1 or 3");
  }
  if (raster.pixels.size() != raster.width * raster.height * raster.channels) {
    throw FormatError("netpbm: pixel buffer does not match extent");
  }
  std::ostringstream out;
  out << (raster.channels == 3 ? "P6" : "P5") << '\n'
      << raster.width << ' ' << raster.height << '\n'
      << 255 << '\n';
  std::string s = out.str();
  s.append(raster.pixels.begin(), raster.pixels.end());
  return s;
}

Raster read_netpbm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError(path.string() + ": cannot open");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_netpbm(buf.str(), path.string());
}

void write_netpbm(const std::filesystem::path& path, const Raster& raster) {
  const std::string bytes = encode_netpbm(raster);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError(path.string() + ": cannot open for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError(path.string() + ": write failed");
}

}  // namespace elkpp
