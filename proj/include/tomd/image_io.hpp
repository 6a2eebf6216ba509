// Copyright 2026 The tomd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// PNG encode/decode on top of libpng. Samples are widened to uint16 on
// decode so that 8-bit colour and 16-bit depth share one code path.

#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "tomd/error.hpp"
#include "tomd/grid.hpp"

namespace tomd::png {

struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1, 2, 3 or 4
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint16_t> samples;  // row-major, interleaved
};

namespace detail {

struct MemoryReader {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

inline void read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* src = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (src->offset + n > src->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(out, src->bytes.data() + src->offset, n);
  src->offset += n;
}

inline void write_to_vector(png_structp png, png_bytep in, png_size_t n) {
  auto* dst = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  dst->insert(dst->end(), in, in + n);
}

inline void flush_noop(png_structp) {}

inline void error_handler(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text != nullptr) *text = msg;
  png_longjmp(png, 1);
}

inline void warning_handler(png_structp, png_const_charp) {}

}  // namespace detail

inline Decoded decode(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0,
          ErrorCode::kIoError, "not a PNG stream");
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message,
                                           detail::error_handler,
                                           detail::warning_handler);
  require(png != nullptr, ErrorCode::kIoError, "png_create_read_struct");
  png_infop info = png_create_info_struct(png);
  Decoded out;
  detail::MemoryReader reader{bytes, 0};
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> raw;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kIoError, "PNG decode failed: " + message);
  }
  png_set_read_fn(png, &reader, detail::read_from_memory);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // host little-endian samples
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  raw.resize(row_bytes * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = raw.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count =
      static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(count);
  if (out.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint16_t v;
      std::memcpy(&v, raw.data() + 2 * i, 2);
      out.samples[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) out.samples[i] = raw[i];
  }
  return out;
}

inline std::vector<std::uint8_t> encode(int width, int height, int channels,
                                        int bit_depth,
                                        std::span<const std::uint16_t> samples) {
  require(width > 0 && height > 0, ErrorCode::kInvalidArgument,
          "empty image");
  require(bit_depth == 8 || bit_depth == 16, ErrorCode::kInvalidArgument,
          "bit depth must be 8 or 16");
  require(samples.size() ==
              static_cast<std::size_t>(width) * height * channels,
          ErrorCode::kDimensionMismatch, "sample count");
  int color_type = 0;
  switch (channels) {
    case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
    case 2: color_type = PNG_COLOR_TYPE_GRAY_ALPHA; break;
    case 3: color_type = PNG_COLOR_TYPE_RGB; break;
    case 4: color_type = PNG_COLOR_TYPE_RGB_ALPHA; break;
    default: fail(ErrorCode::kInvalidArgument, "unsupported channel count");
  }

  const std::size_t bytes_per_sample = bit_depth / 8;
  const std::size_t row_bytes = bytes_per_sample * width * channels;
  std::vector<std::uint8_t> raw(row_bytes * height);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (bit_depth == 16) {
      std::memcpy(raw.data() + 2 * i, &samples[i], 2);
    } else {
      raw[i] = static_cast<std::uint8_t>(samples[i]);
    }
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = raw.data() + y * row_bytes;

  std::string message;
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message,
                                            detail::error_handler,
                                            detail::warning_handler);
  require(png != nullptr, ErrorCode::kIoError, "png_create_write_struct");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIoError, "PNG encode failed: " + message);
  }
  png_set_write_fn(png, &out, detail::write_to_vector, detail::flush_noop);
  png_set_IHDR(png, info, width, height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIoError,
          "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path,
                             std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIoError,
          "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIoError,
          "short write to " + path.string());
}

inline Decoded read(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode(bytes);
}

// --- typed helpers -------------------------------------------------------

inline RgbImage to_rgb(const Decoded& png) {
  require(png.bit_depth == 8, ErrorCode::kIoError, "expected 8-bit colour");
  RgbImage image(png.height, png.width, 3);
  const int c = png.channels;
  for (std::size_t p = 0; p < image.pixels(); ++p) {
    const std::uint16_t* s = png.samples.data() + p * c;
    for (int ch = 0; ch < 3; ++ch) {
      image.data()[p * 3 + ch] =
          static_cast<std::uint8_t>(c >= 3 ? s[ch] : s[0]);
    }
  }
  return image;
}

inline RgbImage read_rgb(const std::filesystem::path& path) {
  return to_rgb(read(path));
}

inline std::vector<std::uint8_t> encode_rgb(const RgbImage& image) {
  require(image.channels() == 3, ErrorCode::kDimensionMismatch,
          "RGB image needs 3 channels");
  std::vector<std::uint16_t> s(image.values().begin(), image.values().end());
  return encode(image.width(), image.height(), 3, 8, s);
}

inline void write_rgb(const std::filesystem::path& path,
                      const RgbImage& image) {
  write_file_bytes(path, encode_rgb(image));
}

/// Single-channel 8-bit image (annotation masks are 0 / 255).
inline Mask to_gray8(const Decoded& png) {
  require(png.bit_depth == 8, ErrorCode::kIoError, "expected 8-bit image");
  Mask mask(png.height, png.width, 1);
  for (std::size_t p = 0; p < mask.pixels(); ++p) {
    mask.data()[p] =
        static_cast<std::uint8_t>(png.samples[p * png.channels]);
  }
  return mask;
}

inline Mask read_gray8(const std::filesystem::path& path) {
  return to_gray8(read(path));
}

inline std::vector<std::uint8_t> encode_gray8(const Mask& mask) {
  require(mask.channels() == 1, ErrorCode::kDimensionMismatch,
          "gray image needs 1 channel");
  std::vector<std::uint16_t> s(mask.values().begin(), mask.values().end());
  return encode(mask.width(), mask.height(), 1, 8, s);
}

inline void write_gray8(const std::filesystem::path& path, const Mask& mask) {
  write_file_bytes(path, encode_gray8(mask));
}

inline Grid<std::uint16_t> read_gray16(const std::filesystem::path& path) {
  const Decoded png = read(path);
  require(png.bit_depth == 16 && png.channels == 1, ErrorCode::kIoError,
          path.string() + ": expected 16-bit single-channel PNG");
  Grid<std::uint16_t> out(png.height, png.width, 1);
  std::copy(png.samples.begin(), png.samples.end(), out.data());
  return out;
}

inline void write_gray16(const std::filesystem::path& path,
                         const Grid<std::uint16_t>& image) {
  require(image.channels() == 1, ErrorCode::kDimensionMismatch,
          "gray image needs 1 channel");
  write_file_bytes(path, encode(image.width(), image.height(), 1, 16,
                                image.values()));
}

}  // namespace tomd::png
