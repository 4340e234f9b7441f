// Acceptance criteria 1-4, 8 and 9: property-based checks that run in a few
// minutes. Criteria 5-7 (trained desk-scale runs) live in
// acceptance_training.cpp. One PASS/FAIL line is printed per criterion.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "intrin/checkpoint.hpp"
#include "intrin/convert.hpp"
#include "intrin/dataset.hpp"
#include "intrin/experiment.hpp"
#include "intrin/loss.hpp"
#include "intrin/metrics.hpp"
#include "intrin/network.hpp"
#include "intrin/render.hpp"
#include "intrin/util.hpp"

using namespace intrin;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int n, const char* what, bool ok) {
  std::printf("CRITERION %d (%s): %s\n", n, what, ok ? "PASS" : "FAIL");
  if (!ok) ++g_failures;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// ---------------------------------------------------------------------------
// criterion 1: gradient checks, ops and the full network, extended precision
// ---------------------------------------------------------------------------
bool criterion_gradients() {
  const double tol = 1e-3;
  bool ok = true;

  NetworkConfig cfg;
  cfg.resolution = 8;
  cfg.levels = 3;
  cfg.base_channels = 2;
  cfg.channel_cap = 8;
  cfg.variant = Variant::mirror_link;
  auto net = MirrorLinkNet<double>::build(cfg, 42);

  Rng rng(7);
  auto rand_t = [&rng](int n, int c, int h, int w, double lo, double hi) {
    std::vector<double> v(std::size_t(n) * c * h * w);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor<double>::from(n, c, h, w, std::move(v));
  };
  auto img = rand_t(2, 3, 8, 8, 0, 1);
  auto ga = rand_t(2, 3, 8, 8, 0, 1);
  auto gs = rand_t(2, 3, 8, 8, 0, 1);
  auto gr = rand_t(2, 3, 8, 8, 0, 0.3);
  auto mask = Tensor<double>::zeros(2, 1, 8, 8);
  for (int n = 0; n < 2; ++n)
    for (int y = 1; y < 7; ++y)
      for (int x = 1; x < 7; ++x) mask.at(n, 0, y, x) = 1.0;

  LossConfig lcfg;
  auto loss_value = [&]() {
    auto out = net.forward(img, RunMode::train);
    return total_loss(out.albedo, out.shading, out.specular, ga, gs, gr, img, mask,
                      lcfg)
        .total;
  };

  auto params = net.parameters();
  zero_grads(params);
  backward(loss_value());
  std::vector<std::vector<double>> grads;
  for (auto& p : params) grads.push_back(p.grad());

  Rng pick(11);
  int checked = 0;
  while (checked < 50) {
    const std::size_t k = pick.below(std::uint32_t(params.size()));
    auto& p = params[k];
    const std::size_t i = pick.below(std::uint32_t(p.numel()));
    const double eps = 1e-4;
    const double x0 = p.data()[i];
    p.data()[i] = x0 + eps;
    const double lp = loss_value().data()[0];
    p.data()[i] = x0 - eps;
    const double lm = loss_value().data()[0];
    p.data()[i] = x0;
    const double fd = (lp - lm) / (2 * eps);
    const double an = grads[k][i];
    const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
    if (rel >= 1e-3) {
      std::printf("  gradient mismatch: param %zu[%zu] analytic %g fd %g rel %g\n", k,
                  i, an, fd, rel);
      ok = false;
    }
    ++checked;
  }

  // representative op-level checks (conv, bn, relu composition)
  {
    auto x = rand_t(2, 2, 4, 4, -1, 1);
    x.set_requires_grad(true);
    auto w = rand_t(2, 2, 3, 3, -1, 1);
    w.set_requires_grad(true);
    auto b = rand_t(2, 1, 1, 1, -1, 1);
    b.set_requires_grad(true);
    auto op_loss = [&] { return sum(relu(conv2d(x, w, b, 2, 1))); };
    backward(op_loss());
    for (auto* t : {&x, &w, &b}) {
      auto g = t->grad();
      for (std::size_t i = 0; i < t->numel(); i += 3) {
        const double eps = 1e-5, x0 = t->data()[i];
        t->data()[i] = x0 + eps;
        const double lp = op_loss().data()[0];
        t->data()[i] = x0 - eps;
        const double lm = op_loss().data()[0];
        t->data()[i] = x0;
        const double fd = (lp - lm) / (2 * eps);
        if (std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-8}) >= tol)
          ok = false;
      }
    }
  }
  return ok;
}

// ---------------------------------------------------------------------------
// criterion 2: furnace and compositing identity over 100 random scenes
// ---------------------------------------------------------------------------
bool criterion_furnace() {
  bool ok = true;

  EnvironmentMap unit;
  unit.radiance = Image(64, 32, 3, 1.f);
  SceneSpec furnace;
  furnace.primitive.type = PrimitiveType::sphere;
  furnace.primitive.a = 1.0;
  furnace.material.family = TextureFamily::solid;
  furnace.material.color_a = {1, 1, 1};
  furnace.material.k_s = 1e-9;
  furnace.view_dir = {0, 0, 1};
  auto tr = render_scene(furnace, unit, 32);
  double mean_s = 0;
  int cnt = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (tr.M.at(x, y, 0) > 0.5f) {
        mean_s += tr.S.at(x, y, 0);
        ++cnt;
      }
  mean_s /= cnt;
  if (std::abs(mean_s - 1.0) >= 0.01) {
    std::printf("  furnace mean shading %.5f\n", mean_s);
    ok = false;
  }

  Rng rng(101);
  const char* cats[] = {"sphere", "box", "torus"};
  for (int i = 0; i < 100; ++i) {
    SceneSpec scene;
    const int c = i % 3;
    if (c == 0) {
      scene.primitive.type = PrimitiveType::sphere;
      scene.primitive.a = rng.uniform(0.5, 1.2);
    } else if (c == 1) {
      scene.primitive.type = PrimitiveType::box;
      scene.primitive.a = rng.uniform(0.4, 1.1);
      scene.primitive.b = rng.uniform(0.4, 1.1);
      scene.primitive.c = rng.uniform(0.4, 1.1);
    } else {
      scene.primitive.type = PrimitiveType::torus;
      scene.primitive.a = rng.uniform(0.5, 1.2);
      scene.primitive.b = rng.uniform(0.1, 0.4);
    }
    scene.category_label = cats[c];
    scene.material = sample_material(rng);
    scene.view_dir = sample_viewpoint(i + 1);
    Rng erng(rng.next_u64());
    auto env = generate_env(erng, 32, 16, 2);
    auto t = render_scene(scene, env, 32);
    for (int y = 0; y < 32 && ok; ++y)
      for (int x = 0; x < 32; ++x) {
        if (t.M.at(x, y, 0) < 0.5f) continue;
        for (int ch = 0; ch < 3; ++ch) {
          const float recon = t.A.at(x, y, ch) * t.S.at(x, y, ch) + t.R.at(x, y, ch);
          if (std::abs(t.I.at(x, y, ch) - recon) > 1e-6f) {
            std::printf("  identity violated at scene %d pixel (%d,%d)\n", i, x, y);
            ok = false;
            break;
          }
        }
      }
    if (!ok) break;
  }
  return ok;
}

// ---------------------------------------------------------------------------
// criterion 3: loss/metric invariances
// ---------------------------------------------------------------------------
bool criterion_invariances() {
  bool ok = true;
  Rng rng(33);
  auto rand_img = [&rng](int w, int h, int c, double lo = 0, double hi = 1) {
    Image img(w, h, c);
    for (auto& v : img.px) v = float(rng.uniform(lo, hi));
    return img;
  };

  // smse scale invariance to 1e-10 in the loss module (double precision)
  {
    std::vector<double> xv(48), gv(48);
    for (auto& v : xv) v = rng.uniform(0.1, 1.0);
    for (auto& v : gv) v = rng.uniform(0.1, 1.0);
    auto x = Tensor<double>::from(1, 3, 4, 4, xv);
    auto g = Tensor<double>::from(1, 3, 4, 4, gv);
    auto m = Tensor<double>::filled(1, 1, 4, 4, 1.0);
    auto eff = detail::effective_weights(m, mask_counts(m), 3);
    const double base = smse(x, g, m, eff).data()[0];
    for (double k : {0.1, 1.0, 10.0})
      if (std::abs(smse(scale(x, k), g, m, eff).data()[0] - base) >= 1e-10) ok = false;
  }

  // dssim(x, x) == 0 and lmse scale invariance
  {
    auto x = rand_img(16, 16, 3);
    Image mask(16, 16, 1, 1.f);
    if (dssim(x, x, mask) != 0.0) ok = false;

    auto gt = rand_img(16, 16, 3, 0.1, 1.0);
    Image scaled = gt;
    for (auto& v : scaled.px) v *= 4.f;
    auto l = lmse(scaled, gt, mask);
    if (!l || std::abs(*l) >= 1e-10) ok = false;
  }

  // masked-pixel independence, bitwise, for losses and metrics
  {
    auto pred = rand_img(16, 16, 3);
    auto gt = rand_img(16, 16, 3, 0.1, 1.0);
    Image mask(16, 16, 1, 0.f);
    for (int y = 4; y < 12; ++y)
      for (int x = 4; x < 12; ++x) mask.at(x, y, 0) = 1.f;
    const double m0 = si_mse(pred, gt, mask);
    const double d0 = dssim(pred, gt, mask);
    const auto l0 = lmse(pred, gt, mask);
    const double p0 = masked_mse(pred, gt, mask);

    auto tp = image_to_tensor<double>(pred);
    auto tg = image_to_tensor<double>(gt);
    auto ti = image_to_tensor<double>(rand_img(16, 16, 3));
    auto tm = image_to_tensor<double>(mask);
    LossConfig lcfg;
    const double t0 =
        total_loss(tp, tp, tp, tg, tg, tg, ti, tm, lcfg).total.data()[0];

    Image pred2 = pred, gt2 = gt;
    pred2.at(0, 0, 0) = 1e5f;
    gt2.at(15, 2, 1) = -30.f;
    if (si_mse(pred2, gt2, mask) != m0) ok = false;
    if (dssim(pred2, gt2, mask) != d0) ok = false;
    if (lmse(pred2, gt2, mask) != l0) ok = false;
    if (masked_mse(pred2, gt2, mask) != p0) ok = false;

    auto tp2 = image_to_tensor<double>(pred2);
    auto tg2 = image_to_tensor<double>(gt2);
    if (total_loss(tp2, tp2, tp2, tg2, tg2, tg2, ti, tm, lcfg).total.data()[0] != t0)
      ok = false;
  }
  return ok;
}

// ---------------------------------------------------------------------------
// criterion 4: oracle equivalences
// ---------------------------------------------------------------------------
bool criterion_oracles() {
  bool ok = true;
  Rng rng(44);

  // conv2d vs nested loops
  {
    std::vector<double> iv(2 * 3 * 6 * 6), wv(4 * 3 * 9), bv(4);
    for (auto& v : iv) v = rng.uniform(-1, 1);
    for (auto& v : wv) v = rng.uniform(-1, 1);
    for (auto& v : bv) v = rng.uniform(-1, 1);
    auto in = Tensor<double>::from(2, 3, 6, 6, iv);
    auto w = Tensor<double>::from(4, 3, 3, 3, wv);
    auto b = Tensor<double>::from(4, 1, 1, 1, bv);
    for (int stride : {1, 2}) {
      auto out = conv2d(in, w, b, stride, 1);
      const int ho = (6 + 2 - 3) / stride + 1, wo = ho;
      for (int n = 0; n < 2; ++n)
        for (int co = 0; co < 4; ++co)
          for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
              double acc = b.data()[co];
              for (int ci = 0; ci < 3; ++ci)
                for (int ky = 0; ky < 3; ++ky)
                  for (int kx = 0; kx < 3; ++kx) {
                    const int iy = oy * stride + ky - 1, ix = ox * stride + kx - 1;
                    if (iy < 0 || iy >= 6 || ix < 0 || ix >= 6) continue;
                    acc += in.at(n, ci, iy, ix) * w.at(co, ci, ky, kx);
                  }
              if (std::abs(out.at(n, co, oy, ox) - acc) >= 1e-6) ok = false;
            }
    }
  }

  // SSIM vs an independent straight-line reference on one window
  {
    Image pred(11, 11, 1), gt(11, 11, 1), mask(11, 11, 1, 1.f);
    for (auto& v : pred.px) v = float(rng.uniform());
    for (auto& v : gt.px) v = float(rng.uniform());
    const SsimParams p;
    // reference: direct formula at the single interior center (5,5)
    double ks = 0;
    std::vector<double> k(121);
    for (int i = 0; i < 121; ++i) {
      const double dy = i / 11 - 5, dx = i % 11 - 5;
      k[i] = std::exp(-(dx * dx + dy * dy) / (2 * p.sigma * p.sigma));
      ks += k[i];
    }
    double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < 121; ++i) {
      const double a = pred.px[i], b = gt.px[i], kw = k[i] / ks;
      mx += kw * a;
      my += kw * b;
      sxx += kw * a * a;
      syy += kw * b * b;
      sxy += kw * a * b;
    }
    const double c1 = p.k1 * p.k1, c2 = p.k2 * p.k2;
    const double ssim = ((2 * mx * my + c1) * (2 * (sxy - mx * my) + c2)) /
                        ((mx * mx + my * my + c1) *
                         ((sxx - mx * mx) + (syy - my * my) + c2));
    const double ref = (1.0 - ssim) / 2.0;
    if (std::abs(dssim(pred, gt, mask) - ref) >= 1e-6) ok = false;
  }

  // optimal_scale vs dense scan
  {
    std::vector<double> xv(4), gv(4);
    for (auto& v : xv) v = rng.uniform(0.1, 2.0);
    for (auto& v : gv) v = rng.uniform(0.1, 2.0);
    auto x = Tensor<double>::from(1, 1, 1, 4, xv);
    auto g = Tensor<double>::from(1, 1, 1, 4, gv);
    auto m = Tensor<double>::filled(1, 1, 1, 4, 1.0);
    const double closed = optimal_scale(x, g, m)[0];
    double best = 0, best_err = 1e300;
    for (double a = 0; a <= 10.0; a += 1e-5) {
      double e = 0;
      for (int i = 0; i < 4; ++i) {
        const double d = a * xv[i] - gv[i];
        e += d * d;
      }
      if (e < best_err) {
        best_err = e;
        best = a;
      }
    }
    if (std::abs(closed - best) >= 1e-4) ok = false;
  }
  return ok;
}

// ---------------------------------------------------------------------------
// criterion 8: frozen-encoder contract after finetune_decoder
// ---------------------------------------------------------------------------
bool criterion_frozen_encoder(const fs::path& work) {
  BuildParams p;
  p.categories = {"sphere", "box"};
  p.objects_per_category = 5;
  p.resolution = 16;
  p.env_width = 32;
  p.env_height = 16;
  p.seed = 808;
  p.write_previews = false;
  auto mf = build_dataset(p, work / "freeze_ds");

  TrainConfig cfg;
  cfg.batch = 2;
  cfg.seed = 9;
  cfg.max_steps = 10;
  cfg.network.resolution = 16;
  cfg.network.levels = 3;
  cfg.network.base_channels = 4;
  cfg.network.channel_cap = 16;

  auto net = MirrorLinkNet<float>::build(cfg.network, cfg.seed);
  std::vector<std::vector<float>> enc_before, dec_before;
  for (auto& t : net.encoder_parameters()) enc_before.push_back(t.data());
  for (auto& t : net.decoder_parameters()) dec_before.push_back(t.data());

  finetune_decoder(net, mf, "box", cfg);

  bool encoder_same = true;
  auto enc_after = net.encoder_parameters();
  for (std::size_t i = 0; i < enc_after.size(); ++i)
    if (enc_after[i].data() != enc_before[i]) encoder_same = false;
  bool decoder_changed = false;
  auto dec_after = net.decoder_parameters();
  for (std::size_t i = 0; i < dec_after.size(); ++i)
    if (dec_after[i].data() != dec_before[i]) decoder_changed = true;
  return encoder_same && decoder_changed;
}

// ---------------------------------------------------------------------------
// criterion 9: round-trip and same-seed byte-identical runs
// ---------------------------------------------------------------------------
bool criterion_determinism(const fs::path& work) {
  bool ok = true;

  // PFM round trip
  Rng rng(99);
  Image img(9, 5, 3);
  for (auto& v : img.px) v = float(rng.uniform(-3, 30));
  write_pfm(work / "rt.pfm", img);
  if (read_pfm(work / "rt.pfm").px != img.px) ok = false;

  // two identical dataset + training + evaluation runs
  BuildParams p;
  p.categories = {"sphere"};
  p.objects_per_category = 5;
  p.resolution = 16;
  p.env_width = 32;
  p.env_height = 16;
  p.seed = 909;
  p.write_previews = false;

  auto run_once = [&](const fs::path& dir) {
    auto mf = build_dataset(p, dir / "ds");
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch = 2;
    cfg.seed = 12;
    cfg.network.resolution = 16;
    cfg.network.levels = 3;
    cfg.network.base_channels = 4;
    cfg.network.channel_cap = 16;
    auto net = MirrorLinkNet<float>::build(cfg.network, cfg.seed);
    auto data = SampleSet::load(mf, "train");
    train(net, data, cfg);
    save_checkpoint(dir / "m.ckpt", net);
    auto rep = evaluate(net, SampleSet::load(mf, "test"));
    write_file_atomic(dir / "report.json", rep.to_json_string());
  };
  run_once(work / "run1");
  run_once(work / "run2");

  if (file_bytes(work / "run1/ds/manifest.jsonl") !=
      file_bytes(work / "run2/ds/manifest.jsonl"))
    ok = false;
  if (file_bytes(work / "run1/m.ckpt") != file_bytes(work / "run2/m.ckpt")) ok = false;
  if (file_bytes(work / "run1/report.json") != file_bytes(work / "run2/report.json"))
    ok = false;
  return ok;
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "intrin_acceptance_fast";
  fs::remove_all(work);
  fs::create_directories(work);

  report(1, "gradient suite", criterion_gradients());
  report(2, "furnace and compositing identity", criterion_furnace());
  report(3, "loss/metric invariances", criterion_invariances());
  report(4, "oracle equivalences", criterion_oracles());
  report(8, "frozen-encoder contract", criterion_frozen_encoder(work));
  report(9, "round-trip and determinism", criterion_determinism(work));

  fs::remove_all(work);
  return g_failures == 0 ? 0 : 1;
}
