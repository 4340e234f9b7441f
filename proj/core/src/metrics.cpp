#include "intrin/metrics.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "intrin/convert.hpp"
#include "intrin/loss.hpp"

namespace intrin {

using nlohmann::json;

namespace {

void check_triple(const Image& pred, const Image& gt, const Image& mask) {
  if (!pred.same_size(gt))
    throw std::invalid_argument("metrics: pred/gt size mismatch");
  if (mask.w != pred.w || mask.h != pred.h || mask.c != 1)
    throw std::invalid_argument("metrics: mask must be single-channel, same size");
}

}  // namespace

double si_mse(const Image& pred, const Image& gt, const Image& mask) {
  check_triple(pred, gt, mask);
  auto tp = image_to_tensor(pred);
  auto tg = image_to_tensor(gt);
  auto tm = image_to_tensor(mask);
  auto counts = mask_counts(tm);
  if (counts[0] == 0) return 0.0;
  auto eff = detail::effective_weights(tm, counts, pred.c);
  return double(smse(tp, tg, tm, eff).data()[0]);
}

double masked_mse(const Image& pred, const Image& gt, const Image& mask) {
  check_triple(pred, gt, mask);
  auto tp = image_to_tensor(pred);
  auto tg = image_to_tensor(gt);
  auto tm = image_to_tensor(mask);
  auto counts = mask_counts(tm);
  if (counts[0] == 0) return 0.0;
  auto eff = detail::effective_weights(tm, counts, pred.c);
  return double(weighted_mse(tp, tg, eff).data()[0]);
}

std::optional<double> lmse(const Image& pred, const Image& gt, const Image& mask,
                           double window_frac) {
  check_triple(pred, gt, mask);
  const int res = std::min(pred.w, pred.h);
  const int win = std::max(8, int(std::lround(res * window_frac)));
  if (win > res) return std::nullopt;
  const int stride = std::max(1, win / 2);

  double total = 0;
  int n_windows = 0;
  for (int y0 = 0; y0 + win <= pred.h; y0 += stride)
    for (int x0 = 0; x0 + win <= pred.w; x0 += stride) {
      int covered = 0;
      for (int y = y0; y < y0 + win; ++y)
        for (int x = x0; x < x0 + win; ++x)
          if (mask.at(x, y, 0) > 0.5f) ++covered;
      if (covered * 4 < win * win) continue;  // < 25% coverage
      Image wp(win, win, pred.c), wg(win, win, pred.c), wm(win, win, 1);
      for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
          for (int ch = 0; ch < pred.c; ++ch) {
            wp.at(x, y, ch) = pred.at(x0 + x, y0 + y, ch);
            wg.at(x, y, ch) = gt.at(x0 + x, y0 + y, ch);
          }
          wm.at(x, y, 0) = mask.at(x0 + x, y0 + y, 0);
        }
      total += si_mse(wp, wg, wm);
      ++n_windows;
    }
  if (n_windows == 0) return std::nullopt;
  return total / n_windows;
}

double dssim(const Image& pred, const Image& gt, const Image& mask,
             const SsimParams& params) {
  check_triple(pred, gt, mask);
  const int win = params.window;
  const int half = win / 2;
  std::vector<double> kernel(std::size_t(win) * win);
  {
    double s = 0;
    for (int y = 0; y < win; ++y)
      for (int x = 0; x < win; ++x) {
        const double dx = x - half, dy = y - half;
        const double v = std::exp(-(dx * dx + dy * dy) / (2 * params.sigma * params.sigma));
        kernel[std::size_t(y) * win + x] = v;
        s += v;
      }
    for (auto& v : kernel) v /= s;
  }
  const double c1 = params.k1 * params.dynamic_range * params.k1 * params.dynamic_range;
  const double c2 = params.k2 * params.dynamic_range * params.k2 * params.dynamic_range;
  auto clamp01 = [](float v) { return v < 0.f ? 0.0 : (v > 1.f ? 1.0 : double(v)); };

  double total = 0;
  std::int64_t count = 0;
  for (int cy = half; cy < pred.h - half; ++cy)
    for (int cx = half; cx < pred.w - half; ++cx) {
      if (mask.at(cx, cy, 0) <= 0.5f) continue;
      for (int ch = 0; ch < pred.c; ++ch) {
        double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
        for (int ky = 0; ky < win; ++ky)
          for (int kx = 0; kx < win; ++kx) {
            const double kw = kernel[std::size_t(ky) * win + kx];
            // unmasked pixels read as 0 so the metric depends only on the mask
            const bool in_mask = mask.at(cx + kx - half, cy + ky - half, 0) > 0.5f;
            const double a = in_mask ? clamp01(pred.at(cx + kx - half, cy + ky - half, ch)) : 0.0;
            const double b = in_mask ? clamp01(gt.at(cx + kx - half, cy + ky - half, ch)) : 0.0;
            mx += kw * a;
            my += kw * b;
            mxx += kw * a * a;
            myy += kw * b * b;
            mxy += kw * a * b;
          }
        const double vx = mxx - mx * mx;
        const double vy = myy - my * my;
        const double cov = mxy - mx * my;
        const double ssim = ((2 * mx * my + c1) * (2 * cov + c2)) /
                            ((mx * mx + my * my + c1) * (vx + vy + c2));
        total += (1.0 - ssim) / 2.0;
        ++count;
      }
    }
  return count == 0 ? 0.0 : total / double(count);
}

SampleMetrics evaluate_triple(const Image& pred_albedo, const Image& pred_shading,
                              const Image& pred_specular, const IntrinsicTriple& gt) {
  SampleMetrics m;
  m.albedo.mse = si_mse(pred_albedo, gt.A, gt.M);
  m.albedo.lmse = lmse(pred_albedo, gt.A, gt.M).value_or(0.0);
  m.albedo.dssim = dssim(pred_albedo, gt.A, gt.M);
  m.shading.mse = si_mse(pred_shading, gt.S, gt.M);
  m.shading.lmse = lmse(pred_shading, gt.S, gt.M).value_or(0.0);
  m.shading.dssim = dssim(pred_shading, gt.S, gt.M);
  m.specular.mse = masked_mse(pred_specular, gt.R, gt.M);
  m.specular.lmse = lmse(pred_specular, gt.R, gt.M).value_or(0.0);
  m.specular.dssim = dssim(pred_specular, gt.R, gt.M);
  return m;
}

SampleMetrics MetricReport::mean() const {
  SampleMetrics acc;
  if (samples.empty()) return acc;
  auto add = [](ComponentMetrics& a, const ComponentMetrics& b) {
    a.mse += b.mse;
    a.lmse += b.lmse;
    a.dssim += b.dssim;
  };
  for (const auto& s : samples) {
    add(acc.albedo, s.albedo);
    add(acc.shading, s.shading);
    add(acc.specular, s.specular);
  }
  const double n = double(samples.size());
  for (auto* c : {&acc.albedo, &acc.shading, &acc.specular}) {
    c->mse /= n;
    c->lmse /= n;
    c->dssim /= n;
  }
  return acc;
}

namespace {
json component_to_json(const ComponentMetrics& c) {
  return json{{"mse", c.mse}, {"lmse", c.lmse}, {"dssim", c.dssim}};
}
ComponentMetrics component_from_json(const json& j) {
  return {j.at("mse").get<double>(), j.at("lmse").get<double>(),
          j.at("dssim").get<double>()};
}
json sample_to_json(const SampleMetrics& s) {
  return json{{"albedo", component_to_json(s.albedo)},
              {"shading", component_to_json(s.shading)},
              {"specular", component_to_json(s.specular)}};
}
SampleMetrics sample_from_json(const json& j) {
  return {component_from_json(j.at("albedo")), component_from_json(j.at("shading")),
          component_from_json(j.at("specular"))};
}
}  // namespace

std::string MetricReport::to_json_string() const {
  json j;
  j["excluded"] = excluded;
  j["count"] = samples.size();
  j["mean"] = sample_to_json(mean());
  j["samples"] = json::array();
  for (const auto& s : samples) j["samples"].push_back(sample_to_json(s));
  return j.dump(2);
}

MetricReport MetricReport::from_json_string(const std::string& s) {
  const json j = json::parse(s);
  MetricReport r;
  r.excluded = j.at("excluded").get<int>();
  for (const auto& js : j.at("samples")) r.samples.push_back(sample_from_json(js));
  return r;
}

std::string MetricReport::to_table() const {
  const SampleMetrics m = mean();
  std::ostringstream out;
  char buf[128];
  out << "            MSE     LMSE    DSSIM\n";
  std::snprintf(buf, sizeof buf, "albedo    %7.4f  %7.4f  %7.4f\n", m.albedo.mse,
                m.albedo.lmse, m.albedo.dssim);
  out << buf;
  std::snprintf(buf, sizeof buf, "shading   %7.4f  %7.4f  %7.4f\n", m.shading.mse,
                m.shading.lmse, m.shading.dssim);
  out << buf;
  std::snprintf(buf, sizeof buf, "specular  %7.4f  %7.4f  %7.4f\n", m.specular.mse,
                m.specular.lmse, m.specular.dssim);
  out << buf;
  out << "samples: " << samples.size() << "  excluded: " << excluded << "\n";
  return out.str();
}

}  // namespace intrin
