#ifndef INTRIN_NETWORK_HPP
#define INTRIN_NETWORK_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "intrin/tensor.hpp"
#include "intrin/util.hpp"

namespace intrin {

enum class Variant { independent, shared_encoder, mirror_link, skip3, skip0 };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::independent: return "independent";
    case Variant::shared_encoder: return "shared_encoder";
    case Variant::mirror_link: return "mirror_link";
    case Variant::skip3: return "skip3";
    case Variant::skip0: return "skip0";
  }
  return "?";
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "independent") return Variant::independent;
  if (s == "shared_encoder") return Variant::shared_encoder;
  if (s == "mirror_link") return Variant::mirror_link;
  if (s == "skip3") return Variant::skip3;
  if (s == "skip0") return Variant::skip0;
  throw std::invalid_argument("unknown variant: " + s);
}

struct NetworkConfig {
  int resolution = 64;
  int levels = 5;
  int base_channels = 16;
  int channel_cap = 128;
  Variant variant = Variant::mirror_link;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  int channels(int level) const {
    const std::int64_t c = std::int64_t(base_channels) << level;
    return int(std::min<std::int64_t>(c, channel_cap));
  }
  bool shared_encoder() const { return variant != Variant::independent; }
  bool cross_links() const {
    return variant == Variant::mirror_link || variant == Variant::skip3 ||
           variant == Variant::skip0;
  }
  // mirror link present at decoder block d (0 = deepest)?
  bool mirror_at(int d) const {
    switch (variant) {
      case Variant::skip0: return false;
      case Variant::skip3: return d < (levels + 1) / 2;  // keep the deepest half
      default: return true;
    }
  }
  void validate() const {
    if (levels < 3) throw std::invalid_argument("NetworkConfig: levels must be >= 3");
    if (resolution < 2 || (resolution & (resolution - 1)) != 0)
      throw std::invalid_argument("NetworkConfig: resolution must be a power of two");
    if ((resolution >> levels) < 1 || resolution % (1 << levels) != 0)
      throw std::invalid_argument("NetworkConfig: resolution not divisible by 2^levels");
    if ((resolution >> levels) < 1)
      throw std::invalid_argument("NetworkConfig: too many levels for resolution");
    if (base_channels < 1 || channel_cap < base_channels)
      throw std::invalid_argument("NetworkConfig: bad channel schedule");
  }
};

enum class RunMode { train, eval };

template <class T>
struct ConvLayer {
  Tensor<T> weight, bias;
  int stride = 1, pad = 1;

  void init(int cin, int cout, int stride_, Rng& rng) {
    stride = stride_;
    const double bound = std::sqrt(6.0 / (cin * 9));
    std::vector<T> w(std::size_t(cout) * cin * 9);
    for (auto& v : w) v = T(rng.uniform(-bound, bound));
    weight = Tensor<T>::from(cout, cin, 3, 3, std::move(w), true);
    bias = Tensor<T>::from(cout, 1, 1, 1, std::vector<T>(cout, T(0)), true);
  }
  Tensor<T> forward(const Tensor<T>& x) const {
    return conv2d(x, weight, bias, stride, pad);
  }
};

template <class T>
struct BatchNormLayer {
  Tensor<T> gamma, beta;
  std::vector<T> running_mean, running_var;
  T momentum = T(0.1), eps = T(1e-5);

  void init(int c, T momentum_, T eps_) {
    momentum = momentum_;
    eps = eps_;
    gamma = Tensor<T>::from(c, 1, 1, 1, std::vector<T>(c, T(1)), true);
    beta = Tensor<T>::from(c, 1, 1, 1, std::vector<T>(c, T(0)), true);
    running_mean.assign(c, T(0));
    running_var.assign(c, T(1));
  }
  Tensor<T> forward(const Tensor<T>& x, RunMode mode) {
    return batch_norm2d(x, gamma, beta,
                        mode == RunMode::train ? BnMode::train : BnMode::eval,
                        running_mean, running_var, momentum, eps);
  }
};

template <class T>
struct ConvBnBlock {
  ConvLayer<T> conv;
  BatchNormLayer<T> bn;

  void init(int cin, int cout, int stride, Rng& rng, const NetworkConfig& cfg) {
    conv.init(cin, cout, stride, rng);
    bn.init(cout, T(cfg.bn_momentum), T(cfg.bn_eps));
  }
  Tensor<T> forward(const Tensor<T>& x, RunMode mode) {
    return relu(bn.forward(conv.forward(x), mode));
  }
};

// Shared encoder + three decoders (albedo, shading, specular) with mirror
// links at equal spatial size and cross-decoder links between siblings.
template <class T>
class MirrorLinkNet {
 public:
  static constexpr int kHeads = 3;

  static MirrorLinkNet build(const NetworkConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    MirrorLinkNet net;
    net.cfg_ = cfg;
    Rng rng(mix_seed(seed, "mirror-link-init"));
    const int n_enc = cfg.shared_encoder() ? 1 : kHeads;
    net.encoders_.resize(n_enc);
    for (int e = 0; e < n_enc; ++e) {
      net.encoders_[e].resize(cfg.levels);
      int cin = 3;
      for (int l = 0; l < cfg.levels; ++l) {
        net.encoders_[e][l].init(cin, cfg.channels(l), 2, rng, cfg);
        cin = cfg.channels(l);
      }
    }
    for (int k = 0; k < kHeads; ++k) {
      net.decoders_[k].resize(cfg.levels);
      for (int d = 0; d < cfg.levels; ++d) {
        net.decoders_[k][d].init(net.decoder_in_channels(d),
                                 net.decoder_out_channels(d), 1, rng, cfg);
      }
      net.heads_[k].init(net.decoder_out_channels(cfg.levels - 1), 3, 1, rng);
      // start each head near its target's typical magnitude; with a
      // zero-centred start the scale-invariant loss can settle on a
      // sign-flipped shading solution that the small MSE term never escapes
      const T head_bias[kHeads] = {T(0.5), T(1.0), T(0.05)};
      for (auto& v : net.heads_[k].bias.data()) v = head_bias[k];
    }
    return net;
  }

  const NetworkConfig& config() const { return cfg_; }

  // decoder block output channel schedule, mirroring the encoder
  int decoder_out_channels(int d) const {
    const int L = cfg_.levels;
    return d <= L - 2 ? cfg_.channels(L - 2 - d) : cfg_.base_channels;
  }
  int mirror_channels(int d) const {
    const int L = cfg_.levels;
    return d <= L - 2 ? cfg_.channels(L - 2 - d) : 3;  // full-res link is the input
  }
  int decoder_in_channels(int d) const {
    const int L = cfg_.levels;
    const int own = d == 0 ? cfg_.channels(L - 1) : decoder_out_channels(d - 1);
    int cin = own;
    if (cfg_.mirror_at(d)) cin += mirror_channels(d);
    if (cfg_.cross_links() && d >= 1) cin += 2 * decoder_out_channels(d - 1);
    return cin;
  }

  struct Outputs {
    Tensor<T> albedo, shading, specular;
  };

  Outputs forward(const Tensor<T>& images, RunMode mode) {
    if (images.c() != 3 || images.h() != cfg_.resolution || images.w() != cfg_.resolution)
      throw std::invalid_argument(
          "forward: input must be (N,3," + std::to_string(cfg_.resolution) + "," +
          std::to_string(cfg_.resolution) + ")");
    if (mode == RunMode::train && images.n() < 2)
      throw std::invalid_argument("forward: train mode needs batch >= 2");
    const int L = cfg_.levels;

    // encoder feature maps, per encoder stack
    std::vector<std::vector<Tensor<T>>> feats(encoders_.size());
    for (std::size_t e = 0; e < encoders_.size(); ++e) {
      Tensor<T> x = images;
      feats[e].reserve(L);
      for (int l = 0; l < L; ++l) {
        x = encoders_[e][l].forward(x, mode);
        feats[e].push_back(x);
      }
    }

    std::array<Tensor<T>, kHeads> prev;
    for (int k = 0; k < kHeads; ++k)
      prev[k] = feats[encoders_.size() == 1 ? 0 : k][L - 1];

    for (int d = 0; d < L; ++d) {
      std::array<Tensor<T>, kHeads> up;
      for (int k = 0; k < kHeads; ++k) up[k] = upsample_nearest2x(prev[k]);
      std::array<Tensor<T>, kHeads> cur;
      for (int k = 0; k < kHeads; ++k) {
        std::vector<Tensor<T>> ins{up[k]};
        if (cfg_.mirror_at(d)) {
          const auto& ef = feats[encoders_.size() == 1 ? 0 : k];
          ins.push_back(d <= L - 2 ? ef[L - 2 - d] : images);
        }
        if (cfg_.cross_links() && d >= 1) {
          ins.push_back(up[(k + 1) % kHeads]);
          ins.push_back(up[(k + 2) % kHeads]);
        }
        cur[k] = decoders_[k][d].forward(ins.size() == 1 ? ins[0] : concat_channels(ins),
                                         mode);
      }
      prev = cur;
    }

    Outputs out;
    out.albedo = heads_[0].forward(prev[0]);
    out.shading = heads_[1].forward(prev[1]);
    out.specular = heads_[2].forward(prev[2]);
    return out;
  }

  std::vector<Tensor<T>> encoder_parameters() {
    std::vector<Tensor<T>> ps;
    for (auto& enc : encoders_)
      for (auto& b : enc) {
        ps.push_back(b.conv.weight);
        ps.push_back(b.conv.bias);
        ps.push_back(b.bn.gamma);
        ps.push_back(b.bn.beta);
      }
    return ps;
  }
  std::vector<Tensor<T>> decoder_parameters() {
    std::vector<Tensor<T>> ps;
    for (int k = 0; k < kHeads; ++k) {
      for (auto& b : decoders_[k]) {
        ps.push_back(b.conv.weight);
        ps.push_back(b.conv.bias);
        ps.push_back(b.bn.gamma);
        ps.push_back(b.bn.beta);
      }
      ps.push_back(heads_[k].weight);
      ps.push_back(heads_[k].bias);
    }
    return ps;
  }
  std::vector<Tensor<T>> parameters() {
    auto ps = encoder_parameters();
    auto ds = decoder_parameters();
    ps.insert(ps.end(), ds.begin(), ds.end());
    return ps;
  }

  std::int64_t count_params() {
    std::int64_t n = 0;
    for (auto& p : parameters()) n += std::int64_t(p.numel());
    return n;
  }

  void freeze_encoder() {
    if (!cfg_.shared_encoder())
      throw std::invalid_argument("freeze_encoder: not defined for the independent variant");
    for (auto& p : encoder_parameters()) p.set_requires_grad(false);
    frozen_ = true;
  }
  bool encoder_frozen() const { return frozen_; }

  // running-stats vectors, in a stable order (for checkpointing)
  std::vector<std::vector<T>*> running_stats() {
    std::vector<std::vector<T>*> rs;
    for (auto& enc : encoders_)
      for (auto& b : enc) {
        rs.push_back(&b.bn.running_mean);
        rs.push_back(&b.bn.running_var);
      }
    for (int k = 0; k < kHeads; ++k)
      for (auto& b : decoders_[k]) {
        rs.push_back(&b.bn.running_mean);
        rs.push_back(&b.bn.running_var);
      }
    return rs;
  }

 private:
  NetworkConfig cfg_;
  std::vector<std::vector<ConvBnBlock<T>>> encoders_;  // 1 or 3 stacks
  std::array<std::vector<ConvBnBlock<T>>, kHeads> decoders_;
  std::array<ConvLayer<T>, kHeads> heads_;
  bool frozen_ = false;
};

}  // namespace intrin

#endif  // INTRIN_NETWORK_HPP
