#ifndef INTRIN_LOSS_HPP
#define INTRIN_LOSS_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "intrin/tensor.hpp"

namespace intrin {

struct LossConfig {
  double w_smse = 0.95;
  double w_mse = 0.05;
  double edge_lambda = 4.0;
  double eps_denominator = 1e-8;
};

// Number of masked pixels per sample. Mask is (N,1,H,W) with {0,1} entries.
template <class T>
std::vector<std::int64_t> mask_counts(const Tensor<T>& mask) {
  std::vector<std::int64_t> counts(mask.n(), 0);
  const std::size_t hw = std::size_t(mask.h()) * mask.w();
  for (int n = 0; n < mask.n(); ++n)
    for (std::size_t i = 0; i < hw; ++i)
      if (mask.data()[n * hw + i] > T(0.5)) ++counts[n];
  return counts;
}

// Edge-sensitive weight map: 1 + lambda * |grad(luminance)|_1, zeroed outside
// the mask and rescaled so the masked mean is 1 per sample. Central
// differences with clamped borders. The result is a constant (no gradient).
template <class T>
Tensor<T> edge_weights(const Tensor<T>& image, const Tensor<T>& mask,
                       double edge_lambda) {
  if (image.c() != 3) throw std::invalid_argument("edge_weights: image must be RGB");
  if (mask.n() != image.n() || mask.c() != 1 || mask.h() != image.h() ||
      mask.w() != image.w())
    throw std::invalid_argument("edge_weights: mask must be (N,1,H,W)");
  const int n = image.n(), h = image.h(), w = image.w();
  const std::size_t hw = std::size_t(h) * w;
  auto out = Tensor<T>::zeros(n, 1, h, w);
  std::vector<T> lum(hw);
  for (int in = 0; in < n; ++in) {
    const T* r = image.data().data() + std::size_t(in) * 3 * hw;
    const T* g = r + hw;
    const T* b = g + hw;
    for (std::size_t i = 0; i < hw; ++i)
      lum[i] = T(0.2126) * r[i] + T(0.7152) * g[i] + T(0.0722) * b[i];
    T* wv = out.data().data() + std::size_t(in) * hw;
    const T* m = mask.data().data() + std::size_t(in) * hw;
    T sum = 0;
    std::int64_t cnt = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = std::size_t(y) * w + x;
        if (m[i] <= T(0.5)) continue;
        const int xm = x > 0 ? x - 1 : 0, xp = x < w - 1 ? x + 1 : w - 1;
        const int ym = y > 0 ? y - 1 : 0, yp = y < h - 1 ? y + 1 : h - 1;
        const T gx = (lum[std::size_t(y) * w + xp] - lum[std::size_t(y) * w + xm]) / T(2);
        const T gy = (lum[std::size_t(yp) * w + x] - lum[std::size_t(ym) * w + x]) / T(2);
        const T val = T(1) + T(edge_lambda) * (std::abs(gx) + std::abs(gy));
        wv[i] = val;
        sum += val;
        ++cnt;
      }
    if (cnt > 0 && sum > 0) {
      const T scale = T(cnt) / sum;
      for (std::size_t i = 0; i < hw; ++i) wv[i] *= scale;
    }
  }
  return out;
}

// Closed-form argmin_alpha MSE(alpha*X, gt) under weights, one alpha per
// sample, jointly over channels. Degenerate denominator falls back to 1.
template <class T>
std::vector<T> optimal_scale(const Tensor<T>& x, const Tensor<T>& gt,
                             const Tensor<T>& weights, double eps = 1e-8) {
  check_same_shape(x, gt, "optimal_scale");
  const int n = x.n(), c = x.c();
  const std::size_t hw = std::size_t(x.h()) * x.w();
  std::vector<T> alpha(n, T(1));
  for (int in = 0; in < n; ++in) {
    T num = 0, den = 0;
    for (int ic = 0; ic < c; ++ic) {
      const std::size_t base = (std::size_t(in) * c + ic) * hw;
      const T* wv = weights.data().data() + std::size_t(in) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        num += wv[i] * x.data()[base + i] * gt.data()[base + i];
        den += wv[i] * x.data()[base + i] * x.data()[base + i];
      }
    }
    alpha[in] = den < T(eps) ? T(1) : num / den;
  }
  return alpha;
}

namespace detail {

// Per-sample weight map folded with 1/(C * |M_n| * n_valid); empty-mask
// samples get all-zero weights and do not count toward the batch mean.
template <class T>
Tensor<T> effective_weights(const Tensor<T>& weights,
                            const std::vector<std::int64_t>& counts, int channels,
                            int* n_valid_out = nullptr) {
  const int n = weights.n();
  int n_valid = 0;
  for (auto c : counts)
    if (c > 0) ++n_valid;
  if (n_valid_out) *n_valid_out = n_valid;
  if (n_valid == 0)
    throw std::runtime_error("loss: every sample in the batch has an empty mask");
  auto eff = Tensor<T>::zeros(n, 1, weights.h(), weights.w());
  const std::size_t hw = std::size_t(weights.h()) * weights.w();
  for (int in = 0; in < n; ++in) {
    if (counts[in] == 0) continue;
    const T f = T(1) / (T(channels) * T(counts[in]) * T(n_valid));
    for (std::size_t i = 0; i < hw; ++i)
      eff.data()[in * hw + i] = weights.data()[in * hw + i] * f;
  }
  return eff;
}

}  // namespace detail

// Weighted MSE over masked pixels, averaged over samples with nonempty masks.
// Differentiable in pred (and gt).
template <class T>
Tensor<T> weighted_mse(const Tensor<T>& pred, const Tensor<T>& gt,
                       const Tensor<T>& eff_weights) {
  auto d = sub(pred, gt);
  return sum(mul_weight(mul(d, d), eff_weights));
}

// SMSE(X, gt) = MSE(alpha X, gt) at the optimal alpha. alpha is held constant
// in the backward pass; at the argmin this is exact.
template <class T>
Tensor<T> smse(const Tensor<T>& pred, const Tensor<T>& gt,
               const Tensor<T>& weights, const Tensor<T>& eff_weights,
               double eps = 1e-8) {
  auto alpha = optimal_scale(pred, gt, weights, eps);
  return weighted_mse(scale_per_sample(pred, alpha), gt, eff_weights);
}

template <class T>
Tensor<T> loss_diffuse(const Tensor<T>& pred, const Tensor<T>& gt,
                       const Tensor<T>& weights, const Tensor<T>& eff_weights,
                       const LossConfig& cfg) {
  auto s = smse(pred, gt, weights, eff_weights, cfg.eps_denominator);
  auto m = weighted_mse(pred, gt, eff_weights);
  return add(scale(s, T(cfg.w_smse)), scale(m, T(cfg.w_mse)));
}

template <class T>
Tensor<T> loss_specular(const Tensor<T>& pred, const Tensor<T>& gt,
                        const Tensor<T>& eff_weights) {
  return weighted_mse(pred, gt, eff_weights);
}

template <class T>
struct TotalLoss {
  Tensor<T> total;
  double albedo = 0, shading = 0, specular = 0;
  int skipped_samples = 0;  // empty-mask samples in the batch
};

// Sum of the three head losses, masked and edge-weighted from the input
// image. Empty-mask samples contribute nothing (zero weights).
template <class T>
TotalLoss<T> total_loss(const Tensor<T>& pred_albedo, const Tensor<T>& pred_shading,
                        const Tensor<T>& pred_specular, const Tensor<T>& gt_albedo,
                        const Tensor<T>& gt_shading, const Tensor<T>& gt_specular,
                        const Tensor<T>& input_image, const Tensor<T>& mask,
                        const LossConfig& cfg) {
  auto w = edge_weights(input_image, mask, cfg.edge_lambda);
  auto counts = mask_counts(mask);
  int n_valid = 0;
  auto eff = detail::effective_weights(w, counts, pred_albedo.c(), &n_valid);
  TotalLoss<T> out;
  out.skipped_samples = pred_albedo.n() - n_valid;
  auto la = loss_diffuse(pred_albedo, gt_albedo, w, eff, cfg);
  auto ls = loss_diffuse(pred_shading, gt_shading, w, eff, cfg);
  auto lr = loss_specular(pred_specular, gt_specular, eff);
  out.albedo = double(la.data()[0]);
  out.shading = double(ls.data()[0]);
  out.specular = double(lr.data()[0]);
  out.total = add(add(la, ls), lr);
  return out;
}

}  // namespace intrin

#endif  // INTRIN_LOSS_HPP
