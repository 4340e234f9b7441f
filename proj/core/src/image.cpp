#include "intrin/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "intrin/util.hpp"

namespace intrin {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(bytes.data(), std::streamsize(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_pfm(const fs::path& path, const Image& img) {
  if (img.c != 1 && img.c != 3)
    throw std::invalid_argument("write_pfm: channel count must be 1 or 3");
  std::ostringstream out;
  out << (img.c == 3 ? "PF" : "Pf") << "\n"
      << img.w << " " << img.h << "\n"
      << "-1.0\n";
  // rows bottom-to-top
  for (int y = img.h - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char*>(&img.px[std::size_t(y) * img.w * img.c]),
              std::streamsize(sizeof(float)) * img.w * img.c);
  write_file_atomic(path, out.str());
}

Image read_pfm(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  f >> magic;
  int channels;
  if (magic == "PF")
    channels = 3;
  else if (magic == "Pf")
    channels = 1;
  else
    throw std::runtime_error("not a PFM file: " + path.string());
  int w, h;
  double scale;
  f >> w >> h >> scale;
  f.get();  // single whitespace after the scale line
  if (w <= 0 || h <= 0) throw std::runtime_error("bad PFM dimensions");
  if (scale >= 0) throw std::runtime_error("big-endian PFM not supported");
  Image img(w, h, channels);
  for (int y = h - 1; y >= 0; --y) {
    f.read(reinterpret_cast<char*>(&img.px[std::size_t(y) * w * channels]),
           std::streamsize(sizeof(float)) * w * channels);
    if (!f) throw std::runtime_error("truncated PFM: " + path.string());
  }
  return img;
}

Image tonemap(const Image& hdr) {
  Image out(hdr.w, hdr.h, hdr.c);
  for (std::size_t i = 0; i < hdr.px.size(); ++i) {
    float v = hdr.px[i];
    v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    out.px[i] = std::pow(v, 1.f / 2.2f);
  }
  return out;
}

void write_png(const fs::path& path, const Image& img) {
  const int c = img.c == 1 ? 1 : 3;
  std::vector<unsigned char> bytes(std::size_t(img.w) * img.h * c);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    float v = img.px[i];
    v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    bytes[i] = (unsigned char)std::lround(v * 255.f);
  }

  fs::path tmp = path;
  tmp += ".tmp";
  FILE* fp = std::fopen(tmp.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open " + tmp.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    std::fclose(fp);
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng write failure: " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.w, img.h, 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.h; ++y)
    png_write_row(png, bytes.data() + std::size_t(y) * img.w * c);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
  fs::rename(tmp, path);
}

Image read_png(const fs::path& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    std::fclose(fp);
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng read failure: " + path.string());
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int w = int(png_get_image_width(png, info));
  const int h = int(png_get_image_height(png, info));
  Image img(w, h, 3);
  std::vector<unsigned char> row(std::size_t(w) * 3);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w * 3; ++x)
      img.px[std::size_t(y) * w * 3 + x] = row[x] / 255.f;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

Image montage_row(const std::vector<Image>& imgs, int pad) {
  if (imgs.empty()) throw std::invalid_argument("montage_row: no images");
  int w = 0, h = 0;
  for (const auto& im : imgs) {
    w += im.w + pad;
    h = std::max(h, im.h);
  }
  w -= pad;
  Image out(w, h, 3, 1.f);
  int xoff = 0;
  for (const auto& im : imgs) {
    for (int y = 0; y < im.h; ++y)
      for (int x = 0; x < im.w; ++x)
        for (int ch = 0; ch < 3; ++ch)
          out.at(xoff + x, y, ch) = im.c == 1 ? im.at(x, y, 0) : im.at(x, y, ch);
    xoff += im.w + pad;
  }
  return out;
}

}  // namespace intrin
