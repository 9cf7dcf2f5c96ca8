// Copyright 2026 The cob Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// 8-bit RGB rasters with PNG read/write and JPEG read.

#pragma once

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "cob/error.hpp"

namespace cob {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Interleaved RGB, row-major, no padding.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, Rgb fill = {255, 255, 255})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < data.size(); i += 3) {
      data[i] = fill.r;
      data[i + 1] = fill.g;
      data[i + 2] = fill.b;
    }
  }

  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
            static_cast<std::size_t>(x)) * 3;
  }
  Rgb at(int x, int y) const {
    const auto o = offset(x, y);
    return {data[o], data[o + 1], data[o + 2]};
  }
  void set(int x, int y, Rgb c) {
    const auto o = offset(x, y);
    data[o] = c.r;
    data[o + 1] = c.g;
    data[o + 2] = c.b;
  }
  friend bool operator==(const Image&, const Image&) = default;
};

namespace detail {

struct PngWriteBuffer {
  std::string bytes;
};

inline void png_write_to_buffer(png_structp png, png_bytep data,
                                png_size_t len) {
  auto* buf = static_cast<PngWriteBuffer*>(png_get_io_ptr(png));
  buf->bytes.append(reinterpret_cast<const char*>(data), len);
}

inline void png_flush_noop(png_structp) {}

struct PngReadCursor {
  std::string_view bytes;
  std::size_t pos = 0;
};

inline void png_read_from_buffer(png_structp png, png_bytep out,
                                 png_size_t len) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(out, cur->bytes.data() + cur->pos, len);
  cur->pos += len;
}

}  // namespace detail

// Lossless PNG with fixed settings (RGB8, no interlace, no filtering, zlib
// level 6, no ancillary chunks) so identical rasters encode to identical
// bytes.
inline std::string encode_png(const Image& img) {
  if (img.width <= 0 || img.height <= 0) {
    throw ParameterError("cannot encode an empty image");
  }
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorClass::kInternal, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  detail::PngWriteBuffer buf;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorClass::kInternal, "PNG encoding failed");
  }
  png_set_write_fn(png, &buf, detail::png_write_to_buffer, detail::png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    auto* row = const_cast<png_bytep>(img.data.data() + img.offset(0, y));
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(buf.bytes);
}

inline bool is_png(std::string_view bytes) {
  static constexpr unsigned char kMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kMagic, 8) == 0;
}

inline bool is_jpeg(std::string_view bytes) {
  return bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
         static_cast<unsigned char>(bytes[1]) == 0xD8 &&
         static_cast<unsigned char>(bytes[2]) == 0xFF;
}

// Reads width and height from the IHDR chunk without decoding.
inline bool png_dimensions(std::string_view bytes, int& width, int& height) {
  if (!is_png(bytes) || bytes.size() < 24) return false;
  auto be32 = [&](std::size_t o) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[o])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[o + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[o + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[o + 3]));
  };
  width = static_cast<int>(be32(16));
  height = static_cast<int>(be32(20));
  return true;
}

// Decodes any PNG colour type to RGB8. Alpha is composited over white.
inline Image decode_png(std::string_view bytes, const std::string& source = "<png>") {
  if (!is_png(bytes)) throw FormatError(source, 0, "not a PNG stream");
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorClass::kInternal, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  detail::PngReadCursor cur{bytes, 0};
  Image img;
  std::vector<std::uint8_t> rgba;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(source, 0, "corrupt PNG stream");
  }
  png_set_read_fn(png, &cur, detail::png_read_from_buffer);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_gray_to_rgb(png);
  png_set_add_alpha(png, 0xFF, PNG_FILLER_AFTER);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  const auto w = png_get_image_width(png, info);
  const auto h = png_get_image_height(png, info);
  rgba.resize(static_cast<std::size_t>(w) * h * 4);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = rgba.data() + static_cast<std::size_t>(y) * w * 4;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = Image(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0, o = 0; i < rgba.size(); i += 4, o += 3) {
    const unsigned a = rgba[i + 3];
    for (int c = 0; c < 3; ++c) {
      const unsigned v = rgba[i + static_cast<std::size_t>(c)];
      img.data[o + static_cast<std::size_t>(c)] =
          static_cast<std::uint8_t>((v * a + 255u * (255u - a) + 127u) / 255u);
    }
  }
  return img;
}

namespace detail {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

}  // namespace detail

inline Image decode_jpeg(std::string_view bytes, const std::string& source = "<jpeg>") {
  jpeg_decompress_struct cinfo;
  detail::JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = detail::jpeg_error_exit;
  err.message[0] = '\0';
  Image img;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw FormatError(source, 0, std::string("corrupt JPEG stream: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()),
               static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  img = Image(static_cast<int>(cinfo.output_width),
              static_cast<int>(cinfo.output_height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.data.data() + img.offset(0, static_cast<int>(cinfo.output_scanline));
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

inline Image decode_image(std::string_view bytes, const std::string& source = "<image>") {
  if (is_png(bytes)) return decode_png(bytes, source);
  if (is_jpeg(bytes)) return decode_jpeg(bytes, source);
  throw FormatError(source, 0, "unsupported image format (expected PNG or JPEG)");
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::string& path, std::string_view bytes) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorClass::kInternal, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorClass::kInternal, "short write to " + path);
}

inline Image read_image(const std::string& path) {
  return decode_image(read_file_bytes(path), path);
}

}  // namespace cob
