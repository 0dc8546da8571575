#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "dgm/common.hpp"
#include "dgm/rng.hpp"
#include "dgm/tensor.hpp"

namespace dgm {

// 8-bit RGB image row-major, interleaved channels.
struct ImageRecord {
  int height = 0, width = 0;
  std::vector<uint8_t> pixels;  // height * width * 3
  int label = -1;
  std::string source_id;

  uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<size_t>(y) * static_cast<size_t>(width) + static_cast<size_t>(x)) * 3 +
                  static_cast<size_t>(c)];
  }

  void set(int y, int x, int c, uint8_t v) {
    pixels[(static_cast<size_t>(y) * static_cast<size_t>(width) + static_cast<size_t>(x)) * 3 +
           static_cast<size_t>(c)] = v;
  }

  static ImageRecord blank(int h, int w, uint8_t fill = 0) {
    if (h < 1 || w < 1) fail(ErrorCode::kInvalidArgument, "image dims must be positive");
    ImageRecord img;
    img.height = h;
    img.width = w;
    img.pixels.assign(static_cast<size_t>(h) * static_cast<size_t>(w) * 3, fill);
    return img;
  }
};

// ---- IMGR: codec-free raw fixture format ---------------------------------
// magic "IMGR", u32 LE width, u32 LE height, u32 LE channels (= 3), then
// row-major interleaved u8 RGB.

inline std::string encode_imgr(const ImageRecord& img) {
  std::string out = "IMGR";
  auto put_u32 = [&out](uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  };
  put_u32(static_cast<uint32_t>(img.width));
  put_u32(static_cast<uint32_t>(img.height));
  put_u32(3);
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

inline ImageRecord decode_imgr(const std::string& bytes, const std::string& what) {
  auto get_u32 = [&bytes](size_t off) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[off + static_cast<size_t>(i)])) << (8 * i);
    return v;
  };
  if (bytes.size() < 16 || bytes.compare(0, 4, "IMGR") != 0)
    fail(ErrorCode::kData, what + ": not an IMGR file");
  uint32_t w = get_u32(4), h = get_u32(8), c = get_u32(12);
  if (c != 3) fail(ErrorCode::kData, what + ": IMGR channels must be 3");
  size_t need = 16 + static_cast<size_t>(w) * h * 3;
  if (w < 1 || h < 1 || bytes.size() != need)
    fail(ErrorCode::kData, what + ": IMGR size mismatch");
  ImageRecord img = ImageRecord::blank(static_cast<int>(h), static_cast<int>(w));
  std::memcpy(img.pixels.data(), bytes.data() + 16, img.pixels.size());
  return img;
}

// ---- PNG / JPEG via libpng and libjpeg ------------------------------------

inline ImageRecord decode_png_file(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    fail(ErrorCode::kData, path + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  ImageRecord img = ImageRecord::blank(static_cast<int>(image.height), static_cast<int>(image.width));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    fail(ErrorCode::kData, path + ": " + msg);
  }
  return img;
}

inline void encode_png_file(const ImageRecord& img, const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr))
    fail(ErrorCode::kIo, path + ": " + image.message);
}

namespace detail {
// Canonical libjpeg error recovery: error_exit longjmps back to the caller.
struct JpegErrorMgr {
  jpeg_error_mgr base;
  jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, mgr->message);
  std::longjmp(mgr->jump, 1);
}
}  // namespace detail

inline ImageRecord decode_jpeg_file(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) fail(ErrorCode::kData, path + ": cannot open");
  jpeg_decompress_struct cinfo;
  detail::JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.base);
  jerr.base.error_exit = detail::jpeg_error_exit;
  ImageRecord img;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    fail(ErrorCode::kData, path + ": " + jerr.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  img = ImageRecord::blank(static_cast<int>(cinfo.output_height),
                           static_cast<int>(cinfo.output_width));
  size_t stride = static_cast<size_t>(img.width) * 3;
  while (cinfo.output_scanline < cinfo.output_height) {
    uint8_t* row = img.pixels.data() + static_cast<size_t>(cinfo.output_scanline) * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(f);
  return img;
}

inline void encode_jpeg_file(const ImageRecord& img, const std::string& path, int quality = 90) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) fail(ErrorCode::kIo, path + ": cannot open for writing");
  jpeg_compress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f);
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  size_t stride = static_cast<size_t>(img.width) * 3;
  while (cinfo.next_scanline < cinfo.image_height) {
    const uint8_t* row = img.pixels.data() + static_cast<size_t>(cinfo.next_scanline) * stride;
    JSAMPROW rows[1] = {const_cast<uint8_t*>(row)};
    jpeg_write_scanlines(&cinfo, rows, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(f);
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kData, path + ": cannot open");
  std::string out((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return out;
}

inline ImageRecord load_image_file(const std::string& path) {
  std::string lower = path;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower.ends_with(".imgr")) return decode_imgr(read_file_bytes(path), path);
  if (lower.ends_with(".png")) return decode_png_file(path);
  if (lower.ends_with(".jpg") || lower.ends_with(".jpeg")) return decode_jpeg_file(path);
  fail(ErrorCode::kData, path + ": unsupported image format");
}

// ---- Geometry --------------------------------------------------------------

// Bilinear resize with half-pixel centers and edge clamping; the identity
// size is an exact copy and integer downscale factors act as box filters.
inline ImageRecord resize(const ImageRecord& img, int h, int w) {
  if (h < 1 || w < 1) fail(ErrorCode::kInvalidArgument, "resize: target dims must be positive");
  if (h == img.height && w == img.width) return img;
  ImageRecord out = ImageRecord::blank(h, w);
  out.label = img.label;
  out.source_id = img.source_id;
  float sy = static_cast<float>(img.height) / static_cast<float>(h);
  float sx = static_cast<float>(img.width) / static_cast<float>(w);
  for (int y = 0; y < h; ++y) {
    float fy = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
    int y0 = static_cast<int>(std::floor(fy));
    float wy = fy - static_cast<float>(y0);
    int y0c = std::clamp(y0, 0, img.height - 1);
    int y1c = std::clamp(y0 + 1, 0, img.height - 1);
    for (int x = 0; x < w; ++x) {
      float fx = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
      int x0 = static_cast<int>(std::floor(fx));
      float wx = fx - static_cast<float>(x0);
      int x0c = std::clamp(x0, 0, img.width - 1);
      int x1c = std::clamp(x0 + 1, 0, img.width - 1);
      for (int c = 0; c < 3; ++c) {
        float v = (1.0f - wy) * ((1.0f - wx) * img.at(y0c, x0c, c) + wx * img.at(y0c, x1c, c)) +
                  wy * ((1.0f - wx) * img.at(y1c, x0c, c) + wx * img.at(y1c, x1c, c));
        out.set(y, x, c, static_cast<uint8_t>(std::clamp(v + 0.5f, 0.0f, 255.0f)));
      }
    }
  }
  return out;
}

// Rotation about the image center, bilinear sampling, black fill outside the
// source frame. angle_deg == 0 is an exact copy.
inline ImageRecord rotate(const ImageRecord& img, float angle_deg) {
  if (angle_deg == 0.0f) return img;
  ImageRecord out = ImageRecord::blank(img.height, img.width);
  float rad = angle_deg * 3.14159265358979323846f / 180.0f;
  float cs = std::cos(rad), sn = std::sin(rad);
  float cy = static_cast<float>(img.height - 1) * 0.5f;
  float cx = static_cast<float>(img.width - 1) * 0.5f;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // Inverse map: rotate the destination coordinate back into the source.
      float dy = static_cast<float>(y) - cy;
      float dx = static_cast<float>(x) - cx;
      float sy_f = cy + (-sn * dx + cs * dy);
      float sx_f = cx + (cs * dx + sn * dy);
      int y0 = static_cast<int>(std::floor(sy_f));
      int x0 = static_cast<int>(std::floor(sx_f));
      float wy = sy_f - static_cast<float>(y0);
      float wx = sx_f - static_cast<float>(x0);
      for (int c = 0; c < 3; ++c) {
        auto sample = [&img](int yy, int xx, int cc) -> float {
          if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) return 0.0f;
          return img.at(yy, xx, cc);
        };
        float v = (1.0f - wy) * ((1.0f - wx) * sample(y0, x0, c) + wx * sample(y0, x0 + 1, c)) +
                  wy * ((1.0f - wx) * sample(y0 + 1, x0, c) + wx * sample(y0 + 1, x0 + 1, c));
        out.set(y, x, c, static_cast<uint8_t>(std::clamp(v + 0.5f, 0.0f, 255.0f)));
      }
    }
  }
  out.label = img.label;
  out.source_id = img.source_id;
  return out;
}

inline ImageRecord hflip(const ImageRecord& img) {
  ImageRecord out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.set(y, x, c, img.at(y, img.width - 1 - x, c));
  return out;
}

inline ImageRecord vflip(const ImageRecord& img) {
  ImageRecord out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.set(y, x, c, img.at(img.height - 1 - y, x, c));
  return out;
}

// u8 RGB -> float32 tensor 3 x H x W scaled to [0, 1].
inline Tensor normalize(const ImageRecord& img) {
  Tensor t = Tensor::zeros({3, img.height, img.width});
  float* p = t.mutable_data();
  int64_t plane = static_cast<int64_t>(img.height) * img.width;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        p[static_cast<int64_t>(c) * plane + static_cast<int64_t>(y) * img.width + x] =
            static_cast<float>(img.at(y, x, c)) / 255.0f;
  return t;
}

}  // namespace dgm
