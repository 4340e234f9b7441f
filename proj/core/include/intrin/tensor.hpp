#ifndef INTRIN_TENSOR_HPP
#define INTRIN_TENSOR_HPP

#include <array>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace intrin {

// Dense 4-D tensor (N, C, H, W), row-major within (H, W), with a tape for
// reverse-mode differentiation. Nodes are numbered at creation; creation
// order is a topological order of the graph, so backward() just walks the
// reachable set in decreasing id.
template <class T>
struct TensorNode {
  std::array<int, 4> shape{0, 0, 0, 0};
  std::vector<T> value;
  std::vector<T> grad;  // allocated on demand, same length as value
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  std::function<void(TensorNode<T>&)> backprop;  // scatter this->grad to parents

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

template <class T>
class Tensor {
 public:
  using Node = TensorNode<T>;

  Tensor() = default;

  static Tensor zeros(int n, int c, int h, int w, bool requires_grad = false) {
    return filled(n, c, h, w, T(0), requires_grad);
  }

  static Tensor filled(int n, int c, int h, int w, T v, bool requires_grad = false) {
    Tensor t;
    t.node_ = make_node(n, c, h, w);
    t.node_->value.assign(std::size_t(n) * c * h * w, v);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from(int n, int c, int h, int w, std::vector<T> data,
                     bool requires_grad = false) {
    if (data.size() != std::size_t(n) * c * h * w)
      throw std::invalid_argument("Tensor::from: data length " +
                                  std::to_string(data.size()) +
                                  " does not match shape product");
    Tensor t;
    t.node_ = make_node(n, c, h, w);
    t.node_->value = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from(1, 1, 1, 1, {v}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const std::array<int, 4>& shape() const { return node_->shape; }
  int n() const { return node_->shape[0]; }
  int c() const { return node_->shape[1]; }
  int h() const { return node_->shape[2]; }
  int w() const { return node_->shape[3]; }
  std::size_t numel() const { return node_->value.size(); }

  std::vector<T>& data() { return node_->value; }
  const std::vector<T>& data() const { return node_->value; }

  // Gradient view; zeros if backward never reached this tensor.
  std::vector<T> grad() const {
    if (node_->grad.size() == node_->value.size()) return node_->grad;
    return std::vector<T>(node_->value.size(), T(0));
  }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  T& at(int in, int ic, int ih, int iw) {
    return node_->value[idx(in, ic, ih, iw)];
  }
  T at(int in, int ic, int ih, int iw) const {
    return node_->value[idx(in, ic, ih, iw)];
  }
  std::size_t idx(int in, int ic, int ih, int iw) const {
    const auto& s = node_->shape;
    return ((std::size_t(in) * s[1] + ic) * s[2] + ih) * s[3] + iw;
  }

  std::shared_ptr<Node> node() const { return node_; }

  bool all_finite() const {
    for (T v : node_->value)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  // Internal: wrap an op result and register it on the tape.
  static Tensor make_op(int n, int c, int h, int w,
                        std::vector<std::shared_ptr<Node>> parents,
                        std::function<void(Node&)> backprop) {
    Tensor t;
    t.node_ = make_node(n, c, h, w);
    t.node_->value.assign(std::size_t(n) * c * h * w, T(0));
    bool rg = false;
    for (auto& p : parents)
      if (p->requires_grad) rg = true;
    t.node_->requires_grad = rg;
    if (rg) {
      t.node_->parents = std::move(parents);
      t.node_->backprop = std::move(backprop);
    }
    return t;
  }

 private:
  static std::shared_ptr<Node> make_node(int n, int c, int h, int w) {
    if (n <= 0 || c <= 0 || h <= 0 || w <= 0)
      throw std::invalid_argument("tensor shape must be positive");
    auto node = std::make_shared<Node>();
    node->shape = {n, c, h, w};
    node->id = next_id_++;
    return node;
  }

  static inline std::uint64_t next_id_ = 1;
  std::shared_ptr<Node> node_;
};

// ---------------------------------------------------------------------------
// backward: reverse sweep from a scalar loss. Each reachable node is visited
// exactly once, after all of its consumers (ids decrease along the sweep).
// ---------------------------------------------------------------------------
template <class T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got numel=" +
                                std::to_string(loss.numel()));
  using Node = TensorNode<T>;
  std::vector<std::shared_ptr<Node>> order;
  std::vector<std::shared_ptr<Node>> stack{loss.node()};
  std::vector<std::uint64_t> seen;
  auto mark = [&seen](std::uint64_t id) {
    auto it = std::lower_bound(seen.begin(), seen.end(), id);
    if (it != seen.end() && *it == id) return false;
    seen.insert(it, id);
    return true;
  };
  mark(loss.node()->id);
  while (!stack.empty()) {
    auto n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents)
      if (p->requires_grad && mark(p->id)) stack.push_back(p);
  }
  std::sort(order.begin(), order.end(),
            [](const auto& a, const auto& b) { return a->id > b->id; });
  loss.node()->ensure_grad();
  loss.node()->grad[0] = T(1);
  for (auto& n : order)
    if (n->backprop) n->backprop(*n);
}

// ---------------------------------------------------------------------------
// Elementwise and structural ops
// ---------------------------------------------------------------------------

template <class T>
inline void check_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                             const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  auto pa = a.node(), pb = b.node();
  auto out = Tensor<T>::make_op(a.n(), a.c(), a.h(), a.w(), {pa, pb},
                                [pa, pb](TensorNode<T>& o) {
                                  if (pa->requires_grad) {
                                    pa->ensure_grad();
                                    for (std::size_t i = 0; i < o.grad.size(); ++i)
                                      pa->grad[i] += o.grad[i];
                                  }
                                  if (pb->requires_grad) {
                                    pb->ensure_grad();
                                    for (std::size_t i = 0; i < o.grad.size(); ++i)
                                      pb->grad[i] += o.grad[i];
                                  }
                                });
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data()[i] = pa->value[i] + pb->value[i];
  return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  auto pa = a.node(), pb = b.node();
  auto out = Tensor<T>::make_op(a.n(), a.c(), a.h(), a.w(), {pa, pb},
                                [pa, pb](TensorNode<T>& o) {
                                  if (pa->requires_grad) {
                                    pa->ensure_grad();
                                    for (std::size_t i = 0; i < o.grad.size(); ++i)
                                      pa->grad[i] += o.grad[i];
                                  }
                                  if (pb->requires_grad) {
                                    pb->ensure_grad();
                                    for (std::size_t i = 0; i < o.grad.size(); ++i)
                                      pb->grad[i] -= o.grad[i];
                                  }
                                });
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data()[i] = pa->value[i] - pb->value[i];
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  auto pa = a.node(), pb = b.node();
  auto out = Tensor<T>::make_op(a.n(), a.c(), a.h(), a.w(), {pa, pb},
                                [pa, pb](TensorNode<T>& o) {
                                  if (pa->requires_grad) {
                                    pa->ensure_grad();
                                    for (std::size_t i = 0; i < o.grad.size(); ++i)
                                      pa->grad[i] += o.grad[i] * pb->value[i];
                                  }
                                  if (pb->requires_grad) {
                                    pb->ensure_grad();
                                    for (std::size_t i = 0; i < o.grad.size(); ++i)
                                      pb->grad[i] += o.grad[i] * pa->value[i];
                                  }
                                });
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data()[i] = pa->value[i] * pb->value[i];
  return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  auto pa = a.node();
  auto out = Tensor<T>::make_op(a.n(), a.c(), a.h(), a.w(), {pa},
                                [pa, s](TensorNode<T>& o) {
                                  pa->ensure_grad();
                                  for (std::size_t i = 0; i < o.grad.size(); ++i)
                                    pa->grad[i] += s * o.grad[i];
                                });
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = s * pa->value[i];
  return out;
}

// Multiply x by one scalar per batch sample (scalars are constants).
template <class T>
Tensor<T> scale_per_sample(const Tensor<T>& x, const std::vector<T>& s) {
  if (int(s.size()) != x.n())
    throw std::invalid_argument("scale_per_sample: need one factor per sample");
  auto px = x.node();
  const std::size_t per = x.numel() / x.n();
  auto out = Tensor<T>::make_op(x.n(), x.c(), x.h(), x.w(), {px},
                                [px, s, per](TensorNode<T>& o) {
                                  px->ensure_grad();
                                  for (int in = 0; in < px->shape[0]; ++in)
                                    for (std::size_t i = 0; i < per; ++i)
                                      px->grad[in * per + i] +=
                                          s[in] * o.grad[in * per + i];
                                });
  for (int in = 0; in < x.n(); ++in)
    for (std::size_t i = 0; i < per; ++i)
      out.data()[in * per + i] = s[in] * px->value[in * per + i];
  return out;
}

// Elementwise product with a constant weight map of shape (N,1,H,W) or
// (N,C,H,W); the weight never receives gradients.
template <class T>
Tensor<T> mul_weight(const Tensor<T>& x, const Tensor<T>& w) {
  if (w.n() != x.n() || w.h() != x.h() || w.w() != x.w() ||
      (w.c() != 1 && w.c() != x.c()))
    throw std::invalid_argument("mul_weight: weight shape incompatible");
  auto px = x.node();
  auto pw = w.node();
  const bool bcast = w.c() == 1;
  const std::size_t hw = std::size_t(x.h()) * x.w();
  auto windex = [pw, bcast, hw](int in, int ic, std::size_t p) {
    return bcast ? (std::size_t(in) * hw + p)
                 : ((std::size_t(in) * pw->shape[1] + ic) * hw + p);
  };
  auto out = Tensor<T>::make_op(
      x.n(), x.c(), x.h(), x.w(), {px},
      [px, pw, windex, hw](TensorNode<T>& o) {
        px->ensure_grad();
        std::size_t i = 0;
        for (int in = 0; in < px->shape[0]; ++in)
          for (int ic = 0; ic < px->shape[1]; ++ic)
            for (std::size_t p = 0; p < hw; ++p, ++i)
              px->grad[i] += o.grad[i] * pw->value[windex(in, ic, p)];
      });
  std::size_t i = 0;
  for (int in = 0; in < x.n(); ++in)
    for (int ic = 0; ic < x.c(); ++ic)
      for (std::size_t p = 0; p < hw; ++p, ++i)
        out.data()[i] = px->value[i] * pw->value[windex(in, ic, p)];
  return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  auto px = x.node();
  auto out = Tensor<T>::make_op(x.n(), x.c(), x.h(), x.w(), {px},
                                [px](TensorNode<T>& o) {
                                  px->ensure_grad();
                                  for (std::size_t i = 0; i < o.grad.size(); ++i)
                                    if (px->value[i] > T(0))
                                      px->grad[i] += o.grad[i];
                                });
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data()[i] = px->value[i] > T(0) ? px->value[i] : T(0);
  return out;
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  auto px = x.node();
  auto out = Tensor<T>::make_op(1, 1, 1, 1, {px}, [px](TensorNode<T>& o) {
    px->ensure_grad();
    const T g = o.grad[0];
    for (std::size_t i = 0; i < px->value.size(); ++i) px->grad[i] += g;
  });
  T acc = 0;
  for (T v : px->value) acc += v;
  out.data()[0] = acc;
  return out;
}

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: empty input");
  const int n = xs[0].n(), h = xs[0].h(), w = xs[0].w();
  int ctot = 0;
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  for (auto& x : xs) {
    if (x.n() != n || x.h() != h || x.w() != w)
      throw std::invalid_argument("concat_channels: N/H/W mismatch");
    ctot += x.c();
    parents.push_back(x.node());
  }
  auto ps = parents;
  const std::size_t hw = std::size_t(h) * w;
  auto out = Tensor<T>::make_op(
      n, ctot, h, w, std::move(parents),
      [ps, n, ctot, hw](TensorNode<T>& o) {
        for (int in = 0; in < n; ++in) {
          int coff = 0;
          for (auto& p : ps) {
            const int pc = p->shape[1];
            if (p->requires_grad) {
              p->ensure_grad();
              const std::size_t src = (std::size_t(in) * ctot + coff) * hw;
              const std::size_t dst = std::size_t(in) * pc * hw;
              for (std::size_t i = 0; i < std::size_t(pc) * hw; ++i)
                p->grad[dst + i] += o.grad[src + i];
            }
            coff += pc;
          }
        }
      });
  for (int in = 0; in < n; ++in) {
    int coff = 0;
    for (auto& p : ps) {
      const int pc = p->shape[1];
      const std::size_t dst = (std::size_t(in) * ctot + coff) * hw;
      const std::size_t src = std::size_t(in) * pc * hw;
      std::copy(p->value.begin() + src, p->value.begin() + src + std::size_t(pc) * hw,
                out.data().begin() + dst);
      coff += pc;
    }
  }
  return out;
}

template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, int c0, int c1) {
  if (c0 < 0 || c1 > x.c() || c0 >= c1)
    throw std::invalid_argument("slice_channels: bad channel range");
  auto px = x.node();
  const int n = x.n(), h = x.h(), w = x.w(), cx = x.c(), cs = c1 - c0;
  const std::size_t hw = std::size_t(h) * w;
  auto out = Tensor<T>::make_op(
      n, cs, h, w, {px}, [px, n, cx, c0, cs, hw](TensorNode<T>& o) {
        px->ensure_grad();
        for (int in = 0; in < n; ++in) {
          const std::size_t dst = (std::size_t(in) * cx + c0) * hw;
          const std::size_t src = std::size_t(in) * cs * hw;
          for (std::size_t i = 0; i < std::size_t(cs) * hw; ++i)
            px->grad[dst + i] += o.grad[src + i];
        }
      });
  for (int in = 0; in < n; ++in) {
    const std::size_t src = (std::size_t(in) * cx + c0) * hw;
    const std::size_t dst = std::size_t(in) * cs * hw;
    std::copy(px->value.begin() + src, px->value.begin() + src + std::size_t(cs) * hw,
              out.data().begin() + dst);
  }
  return out;
}

template <class T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  auto px = x.node();
  const int n = x.n(), c = x.c(), h = x.h(), w = x.w();
  auto out = Tensor<T>::make_op(
      n, c, 2 * h, 2 * w, {px}, [px, n, c, h, w](TensorNode<T>& o) {
        px->ensure_grad();
        for (int in = 0; in < n; ++in)
          for (int ic = 0; ic < c; ++ic)
            for (int ih = 0; ih < h; ++ih)
              for (int iw = 0; iw < w; ++iw) {
                const std::size_t src =
                    ((std::size_t(in) * c + ic) * h + ih) * w + iw;
                T g = 0;
                for (int dy = 0; dy < 2; ++dy)
                  for (int dx = 0; dx < 2; ++dx)
                    g += o.grad[((std::size_t(in) * c + ic) * 2 * h + 2 * ih + dy) *
                                    2 * w +
                                2 * iw + dx];
                px->grad[src] += g;
              }
      });
  for (int in = 0; in < n; ++in)
    for (int ic = 0; ic < c; ++ic)
      for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < w; ++iw) {
          const T v = px->value[((std::size_t(in) * c + ic) * h + ih) * w + iw];
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              out.data()[((std::size_t(in) * c + ic) * 2 * h + 2 * ih + dy) * 2 * w +
                         2 * iw + dx] = v;
        }
  return out;
}

// ---------------------------------------------------------------------------
// conv2d: 3x3 kernels, stride 1 or 2, zero padding 0 or 1.
// ---------------------------------------------------------------------------
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, int stride, int pad) {
  const int n = input.n(), cin = input.c(), h = input.h(), w = input.w();
  const int cout = weight.n();
  if (weight.c() != cin)
    throw std::invalid_argument(
        "conv2d: input channels (" + std::to_string(cin) +
        ") do not match weight Cin (" + std::to_string(weight.c()) + ")");
  if (weight.h() != 3 || weight.w() != 3)
    throw std::invalid_argument("conv2d: kernel must be 3x3, got " +
                                std::to_string(weight.h()) + "x" +
                                std::to_string(weight.w()));
  if (bias.numel() != std::size_t(cout))
    throw std::invalid_argument("conv2d: bias length " +
                                std::to_string(bias.numel()) +
                                " does not match Cout " + std::to_string(cout));
  if (stride != 1 && stride != 2)
    throw std::invalid_argument("conv2d: stride must be 1 or 2");
  if (pad != 0 && pad != 1)
    throw std::invalid_argument("conv2d: pad must be 0 or 1");
  const int oh = (h + 2 * pad - 3) / stride + 1;
  const int ow = (w + 2 * pad - 3) / stride + 1;
  if (oh <= 0 || ow <= 0)
    throw std::invalid_argument("conv2d: input spatial size too small");

  auto pin = input.node();
  auto pw = weight.node();
  auto pb = bias.node();
  auto out = Tensor<T>::make_op(
      n, cout, oh, ow, {pin, pw, pb},
      [pin, pw, pb, n, cin, cout, h, w, oh, ow, stride, pad](TensorNode<T>& o) {
        const bool gi = pin->requires_grad, gw = pw->requires_grad,
                   gb = pb->requires_grad;
        if (gi) pin->ensure_grad();
        if (gw) pw->ensure_grad();
        if (gb) pb->ensure_grad();
        if (gb) {
          for (int in = 0; in < n; ++in)
            for (int co = 0; co < cout; ++co) {
              const T* g = o.grad.data() +
                           ((std::size_t(in) * cout + co) * oh) * ow;
              T acc = 0;
              for (int i = 0; i < oh * ow; ++i) acc += g[i];
              pb->grad[co] += acc;
            }
        }
        if (!gi && !gw) return;
        for (int in = 0; in < n; ++in)
          for (int co = 0; co < cout; ++co) {
            const T* gout = o.grad.data() +
                            ((std::size_t(in) * cout + co) * oh) * ow;
            for (int ci = 0; ci < cin; ++ci) {
              const T* x = pin->value.data() +
                           ((std::size_t(in) * cin + ci) * h) * w;
              T* gx = gi ? pin->grad.data() +
                               ((std::size_t(in) * cin + ci) * h) * w
                         : nullptr;
              for (int kh = 0; kh < 3; ++kh)
                for (int kw = 0; kw < 3; ++kw) {
                  const std::size_t widx =
                      ((std::size_t(co) * cin + ci) * 3 + kh) * 3 + kw;
                  const T wv = pw->value[widx];
                  T wacc = 0;
                  // valid output rows/cols for this tap
                  int oy0 = 0, oy1 = oh;
                  while (oy0 < oh && oy0 * stride + kh - pad < 0) ++oy0;
                  while (oy1 > oy0 && (oy1 - 1) * stride + kh - pad >= h) --oy1;
                  int ox0 = 0, ox1 = ow;
                  while (ox0 < ow && ox0 * stride + kw - pad < 0) ++ox0;
                  while (ox1 > ox0 && (ox1 - 1) * stride + kw - pad >= w) --ox1;
                  for (int oy = oy0; oy < oy1; ++oy) {
                    const int iy = oy * stride + kh - pad;
                    const T* xr = x + std::size_t(iy) * w;
                    const T* gr = gout + std::size_t(oy) * ow;
                    if (stride == 1) {
                      const int off = kw - pad;
                      if (gw)
                        for (int ox = ox0; ox < ox1; ++ox)
                          wacc += gr[ox] * xr[ox + off];
                      if (gi) {
                        T* gxr = gx + std::size_t(iy) * w;
                        for (int ox = ox0; ox < ox1; ++ox)
                          gxr[ox + off] += wv * gr[ox];
                      }
                    } else {
                      if (gw)
                        for (int ox = ox0; ox < ox1; ++ox)
                          wacc += gr[ox] * xr[ox * 2 + kw - pad];
                      if (gi) {
                        T* gxr = gx + std::size_t(iy) * w;
                        for (int ox = ox0; ox < ox1; ++ox)
                          gxr[ox * 2 + kw - pad] += wv * gr[ox];
                      }
                    }
                  }
                  if (gw) pw->grad[widx] += wacc;
                }
            }
          }
      });

  // forward
  for (int in = 0; in < n; ++in)
    for (int co = 0; co < cout; ++co) {
      T* y = out.data().data() + ((std::size_t(in) * cout + co) * oh) * ow;
      const T bv = pb->value[co];
      for (int i = 0; i < oh * ow; ++i) y[i] = bv;
      for (int ci = 0; ci < cin; ++ci) {
        const T* x =
            pin->value.data() + ((std::size_t(in) * cin + ci) * h) * w;
        for (int kh = 0; kh < 3; ++kh)
          for (int kw = 0; kw < 3; ++kw) {
            const T wv =
                pw->value[((std::size_t(co) * cin + ci) * 3 + kh) * 3 + kw];
            int oy0 = 0, oy1 = oh;
            while (oy0 < oh && oy0 * stride + kh - pad < 0) ++oy0;
            while (oy1 > oy0 && (oy1 - 1) * stride + kh - pad >= h) --oy1;
            int ox0 = 0, ox1 = ow;
            while (ox0 < ow && ox0 * stride + kw - pad < 0) ++ox0;
            while (ox1 > ox0 && (ox1 - 1) * stride + kw - pad >= w) --ox1;
            for (int oy = oy0; oy < oy1; ++oy) {
              const int iy = oy * stride + kh - pad;
              const T* xr = x + std::size_t(iy) * w;
              T* yr = y + std::size_t(oy) * ow;
              if (stride == 1) {
                const int off = kw - pad;
                for (int ox = ox0; ox < ox1; ++ox) yr[ox] += wv * xr[ox + off];
              } else {
                for (int ox = ox0; ox < ox1; ++ox)
                  yr[ox] += wv * xr[ox * 2 + kw - pad];
              }
            }
          }
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// batch_norm2d: per-channel normalization over (N, H, W).
// ---------------------------------------------------------------------------
enum class BnMode { train, eval };

template <class T>
Tensor<T> batch_norm2d(const Tensor<T>& x, const Tensor<T>& gamma,
                       const Tensor<T>& beta, BnMode mode,
                       std::vector<T>& running_mean, std::vector<T>& running_var,
                       T momentum, T eps) {
  const int n = x.n(), c = x.c(), h = x.h(), w = x.w();
  if (gamma.numel() != std::size_t(c) || beta.numel() != std::size_t(c))
    throw std::invalid_argument("batch_norm2d: gamma/beta length must equal C=" +
                                std::to_string(c));
  if (running_mean.size() != std::size_t(c) || running_var.size() != std::size_t(c))
    throw std::invalid_argument("batch_norm2d: running stats length must equal C");
  const std::size_t m = std::size_t(n) * h * w;  // population per channel
  if (mode == BnMode::train && m < 2)
    throw std::invalid_argument(
        "batch_norm2d: train mode needs N*H*W >= 2 per channel (variance "
        "undefined for a single element)");

  auto px = x.node();
  auto pg = gamma.node();
  auto pbeta = beta.node();
  const std::size_t hw = std::size_t(h) * w;

  std::vector<T> mean(c), invstd(c);
  if (mode == BnMode::train) {
    for (int ic = 0; ic < c; ++ic) {
      T mu = 0;
      for (int in = 0; in < n; ++in) {
        const T* xr = px->value.data() + (std::size_t(in) * c + ic) * hw;
        for (std::size_t i = 0; i < hw; ++i) mu += xr[i];
      }
      mu /= T(m);
      T var = 0;
      for (int in = 0; in < n; ++in) {
        const T* xr = px->value.data() + (std::size_t(in) * c + ic) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          const T d = xr[i] - mu;
          var += d * d;
        }
      }
      var /= T(m);
      mean[ic] = mu;
      invstd[ic] = T(1) / std::sqrt(var + eps);
      running_mean[ic] = (T(1) - momentum) * running_mean[ic] + momentum * mu;
      const T unbiased = var * T(m) / T(m - 1);
      running_var[ic] = (T(1) - momentum) * running_var[ic] + momentum * unbiased;
    }
  } else {
    for (int ic = 0; ic < c; ++ic) {
      mean[ic] = running_mean[ic];
      invstd[ic] = T(1) / std::sqrt(running_var[ic] + eps);
    }
  }

  const bool train = mode == BnMode::train;
  auto out = Tensor<T>::make_op(
      n, c, h, w, {px, pg, pbeta},
      [px, pg, pbeta, mean, invstd, n, c, hw, m, train](TensorNode<T>& o) {
        const bool gi = px->requires_grad;
        if (gi) px->ensure_grad();
        if (pg->requires_grad) pg->ensure_grad();
        if (pbeta->requires_grad) pbeta->ensure_grad();
        for (int ic = 0; ic < c; ++ic) {
          const T mu = mean[ic], is = invstd[ic], g = pg->value[ic];
          T dgamma = 0, dbeta = 0, dxhat_sum = 0, dxhat_xhat_sum = 0;
          for (int in = 0; in < n; ++in) {
            const std::size_t base = (std::size_t(in) * c + ic) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              const T xhat = (px->value[base + i] - mu) * is;
              const T go = o.grad[base + i];
              dgamma += go * xhat;
              dbeta += go;
              dxhat_sum += go * g;
              dxhat_xhat_sum += go * g * xhat;
            }
          }
          if (pg->requires_grad) pg->grad[ic] += dgamma;
          if (pbeta->requires_grad) pbeta->grad[ic] += dbeta;
          if (!gi) continue;
          if (train) {
            const T inv_m = T(1) / T(m);
            for (int in = 0; in < n; ++in) {
              const std::size_t base = (std::size_t(in) * c + ic) * hw;
              for (std::size_t i = 0; i < hw; ++i) {
                const T xhat = (px->value[base + i] - mu) * is;
                const T dxhat = o.grad[base + i] * g;
                px->grad[base + i] +=
                    is * (dxhat - inv_m * dxhat_sum - xhat * inv_m * dxhat_xhat_sum);
              }
            }
          } else {
            for (int in = 0; in < n; ++in) {
              const std::size_t base = (std::size_t(in) * c + ic) * hw;
              for (std::size_t i = 0; i < hw; ++i)
                px->grad[base + i] += o.grad[base + i] * g * is;
            }
          }
        }
      });

  for (int ic = 0; ic < c; ++ic) {
    const T mu = mean[ic], is = invstd[ic];
    const T g = pg->value[ic], b = pbeta->value[ic];
    for (int in = 0; in < n; ++in) {
      const std::size_t base = (std::size_t(in) * c + ic) * hw;
      for (std::size_t i = 0; i < hw; ++i)
        out.data()[base + i] = g * (px->value[base + i] - mu) * is + b;
    }
  }
  return out;
}

}  // namespace intrin

#endif  // INTRIN_TENSOR_HPP
