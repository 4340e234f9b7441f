#ifndef INTRIN_IMAGE_HPP
#define INTRIN_IMAGE_HPP

#include <filesystem>
#include <string>
#include <vector>

namespace intrin {

// Interleaved float image; c is 1 or 3. Used for HDR layers, masks and
// environment maps on the I/O side of the pipeline.
struct Image {
  int w = 0, h = 0, c = 0;
  std::vector<float> px;

  Image() = default;
  Image(int w_, int h_, int c_, float fill = 0.f)
      : w(w_), h(h_), c(c_), px(std::size_t(w_) * h_ * c_, fill) {}

  float& at(int x, int y, int ch) { return px[(std::size_t(y) * w + x) * c + ch]; }
  float at(int x, int y, int ch) const { return px[(std::size_t(y) * w + x) * c + ch]; }
  std::size_t numel() const { return px.size(); }
  bool same_size(const Image& o) const { return w == o.w && h == o.h && c == o.c; }
};

// PFM: "PF" (3-channel) / "Pf" (1-channel), little-endian floats, rows stored
// bottom-to-top. Round-trips bit-exactly.
void write_pfm(const std::filesystem::path& path, const Image& img);
Image read_pfm(const std::filesystem::path& path);

// 8-bit PNG previews. HDR input is clamped to [0,1] then gamma 1/2.2 encoded.
void write_png(const std::filesystem::path& path, const Image& img8);  // values already in [0,1], linear passthrough to 8-bit
Image read_png(const std::filesystem::path& path);  // returns values in [0,1]

Image tonemap(const Image& hdr);  // clamp + gamma 1/2.2
Image montage_row(const std::vector<Image>& imgs, int pad = 2);

}  // namespace intrin

#endif  // INTRIN_IMAGE_HPP
