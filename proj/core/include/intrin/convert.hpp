#ifndef INTRIN_CONVERT_HPP
#define INTRIN_CONVERT_HPP

#include <stdexcept>

#include "intrin/image.hpp"
#include "intrin/tensor.hpp"

namespace intrin {

// interleaved Image -> planar (1,C,H,W) tensor
template <class T = float>
Tensor<T> image_to_tensor(const Image& img) {
  std::vector<T> data(img.numel());
  const std::size_t hw = std::size_t(img.w) * img.h;
  for (int ch = 0; ch < img.c; ++ch)
    for (std::size_t p = 0; p < hw; ++p)
      data[ch * hw + p] = T(img.px[p * img.c + ch]);
  return Tensor<T>::from(1, img.c, img.h, img.w, std::move(data));
}

template <class T = float>
Image tensor_to_image(const Tensor<T>& t, int sample = 0) {
  if (sample < 0 || sample >= t.n())
    throw std::invalid_argument("tensor_to_image: sample out of range");
  Image img(t.w(), t.h(), t.c());
  const std::size_t hw = std::size_t(t.w()) * t.h();
  for (int ch = 0; ch < t.c(); ++ch)
    for (std::size_t p = 0; p < hw; ++p)
      img.px[p * t.c() + ch] =
          float(t.data()[(std::size_t(sample) * t.c() + ch) * hw + p]);
  return img;
}

}  // namespace intrin

#endif  // INTRIN_CONVERT_HPP
