#pragma once

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "isf/types.hpp"

namespace isf {

namespace png_detail {

inline void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

inline void put_chunk(std::vector<uint8_t>& out, const char type[4],
                      std::span<const uint8_t> payload) {
  put_u32_be(out, uint32_t(payload.size()));
  const size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uint32_t crc = uint32_t(
      ::crc32(0, out.data() + start, uInt(out.size() - start)));
  put_u32_be(out, crc);
}

}  // namespace png_detail

// Minimal 8-bit RGB PNG encoder (zlib handles the deflate stream).
inline void write_png_rgb8(const std::filesystem::path& path, int width,
                           int height, std::span<const uint8_t> rgb) {
  if (width <= 0 || height <= 0 ||
      rgb.size() != size_t(width) * size_t(height) * 3) {
    throw InvalidArgument("write_png_rgb8: bad dimensions");
  }

  // filter byte 0 before each scanline
  std::vector<uint8_t> raw;
  raw.reserve(size_t(height) * (size_t(width) * 3 + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    const uint8_t* row = rgb.data() + size_t(y) * width * 3;
    raw.insert(raw.end(), row, row + size_t(width) * 3);
  }

  uLongf bound = ::compressBound(uLong(raw.size()));
  std::vector<uint8_t> compressed(bound);
  if (::compress2(compressed.data(), &bound, raw.data(), uLong(raw.size()),
                  Z_BEST_SPEED) != Z_OK) {
    throw std::runtime_error("write_png_rgb8: deflate failed");
  }
  compressed.resize(bound);

  std::vector<uint8_t> out;
  const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.insert(out.end(), sig, sig + 8);

  std::vector<uint8_t> ihdr;
  png_detail::put_u32_be(ihdr, uint32_t(width));
  png_detail::put_u32_be(ihdr, uint32_t(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  png_detail::put_chunk(out, "IHDR", ihdr);
  png_detail::put_chunk(out, "IDAT", compressed);
  png_detail::put_chunk(out, "IEND", {});

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(out.data()),
           std::streamsize(out.size()));
  os.flush();
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

// [-1,1] float image to 8-bit
template <class T>
std::vector<uint8_t> to_rgb8(const ImageTensor<T>& img) {
  std::vector<uint8_t> rgb(img.pixels.size());
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    const double v = (double(img.pixels[i]) + 1.0) * 0.5 * 255.0;
    rgb[i] = uint8_t(std::clamp(std::lround(v), 0l, 255l));
  }
  return rgb;
}

// horizontal strip of equally sized tiles
template <class T>
void write_png_strip(const std::filesystem::path& path,
                     std::span<const ImageTensor<T>> tiles) {
  if (tiles.empty()) throw InvalidArgument("write_png_strip: no tiles");
  const int h = tiles[0].height, w = tiles[0].width;
  for (const auto& t : tiles) {
    if (t.height != h || t.width != w) {
      throw InvalidArgument("write_png_strip: mixed tile sizes");
    }
  }
  const int total_w = w * int(tiles.size());
  std::vector<uint8_t> rgb(size_t(h) * size_t(total_w) * 3);
  for (size_t ti = 0; ti < tiles.size(); ++ti) {
    const auto tile = to_rgb8(tiles[ti]);
    for (int y = 0; y < h; ++y) {
      std::memcpy(rgb.data() + (size_t(y) * total_w + ti * size_t(w)) * 3,
                  tile.data() + size_t(y) * w * 3, size_t(w) * 3);
    }
  }
  write_png_rgb8(path, total_w, h, rgb);
}

}  // namespace isf
