#include "intrin/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <sstream>

#include "intrin/convert.hpp"
#include "intrin/util.hpp"

namespace intrin {

using nlohmann::json;

SampleSet SampleSet::load(const DatasetManifest& mf, const std::string& split,
                          const std::string& category) {
  SampleSet set;
  set.records = mf.select(split, category);
  if (set.records.empty())
    throw std::invalid_argument("no samples match split='" + split + "' category='" +
                                category + "'");
  set.triples.reserve(set.records.size());
  for (const auto& r : set.records) set.triples.push_back(load_triple(mf, r));
  return set;
}

namespace {

struct Batch {
  Tensor<float> I, A, S, R, M;
};

Batch make_batch(const SampleSet& data, const std::vector<int>& ids) {
  const Image& first = data.triples[ids[0]].I;
  const int h = first.h, w = first.w;
  const int n = int(ids.size());
  const std::size_t hw = std::size_t(h) * w;
  auto stack = [&](auto layer_of, int channels) {
    std::vector<float> buf(std::size_t(n) * channels * hw);
    for (int k = 0; k < n; ++k) {
      const Image& img = layer_of(data.triples[ids[k]]);
      for (int ch = 0; ch < channels; ++ch)
        for (std::size_t p = 0; p < hw; ++p)
          buf[((std::size_t(k) * channels + ch) * hw) + p] = img.px[p * channels + ch];
    }
    return Tensor<float>::from(n, channels, h, w, std::move(buf));
  };
  Batch b;
  b.I = stack([](const IntrinsicTriple& t) -> const Image& { return t.I; }, 3);
  b.A = stack([](const IntrinsicTriple& t) -> const Image& { return t.A; }, 3);
  b.S = stack([](const IntrinsicTriple& t) -> const Image& { return t.S; }, 3);
  b.R = stack([](const IntrinsicTriple& t) -> const Image& { return t.R; }, 3);
  b.M = stack([](const IntrinsicTriple& t) -> const Image& { return t.M; }, 1);
  return b;
}

}  // namespace

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out << "epoch,step,total,albedo,shading,specular\n";
  for (const auto& s : steps)
    out << s.epoch << "," << s.step << "," << s.total << "," << s.albedo << ","
        << s.shading << "," << s.specular << "\n";
  return out.str();
}

TrainHistory train(MirrorLinkNet<float>& net, const SampleSet& data,
                   const TrainConfig& cfg, AdamState<float>* opt_state) {
  if (cfg.batch < 2) throw std::invalid_argument("train: batch must be >= 2 (BN)");
  auto params = net.parameters();
  AdamState<float> local;
  AdamState<float>& opt = opt_state ? *opt_state : local;
  if (opt.m.size() != params.size()) {
    opt.init(params);
    opt.lr = float(cfg.lr);
  }

  TrainHistory hist;
  std::vector<int> order(data.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);

  std::int64_t step = 0;
  const std::int64_t budget = cfg.max_steps;
  for (int epoch = 0;; ++epoch) {
    if (budget <= 0 && epoch >= cfg.epochs) break;
    Rng shuffle_rng(mix_seed(cfg.seed, std::uint64_t(epoch) + 0x5e5f));
    for (int i = int(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.below(std::uint32_t(i + 1))]);

    double epoch_total = 0;
    int epoch_steps = 0;
    for (std::size_t off = 0; off + 2 <= order.size(); off += cfg.batch) {
      const std::size_t end = std::min(order.size(), off + cfg.batch);
      std::vector<int> ids(order.begin() + off, order.begin() + end);
      Batch b = make_batch(data, ids);
      auto out = net.forward(b.I, RunMode::train);
      auto L = total_loss(out.albedo, out.shading, out.specular, b.A, b.S, b.R, b.I,
                          b.M, cfg.loss);
      const double lv = double(L.total.data()[0]);
      if (!std::isfinite(lv)) throw TrainingDiverged(step + 1);
      zero_grads(params);
      backward(L.total);
      adam_step(params, opt);
      ++step;
      hist.steps.push_back({epoch, step, lv, L.albedo, L.shading, L.specular});
      epoch_total += lv;
      ++epoch_steps;
      if (budget > 0 && step >= budget) break;
    }
    if (epoch_steps > 0) hist.epoch_loss.push_back(epoch_total / epoch_steps);
    if (budget > 0 && step >= budget) break;
    if (epoch_steps == 0)
      throw std::invalid_argument("train: not enough samples for one batch");
  }
  return hist;
}

MetricReport evaluate_with_predictor(const SampleSet& data, const Predictor& pred) {
  MetricReport report;
  for (const auto& tr : data.triples) {
    bool any = false;
    for (float v : tr.M.px)
      if (v > 0.5f) {
        any = true;
        break;
      }
    if (!any) {
      ++report.excluded;
      continue;
    }
    const auto p = pred(tr);
    report.samples.push_back(evaluate_triple(p[0], p[1], p[2], tr));
  }
  return report;
}

MetricReport evaluate(MirrorLinkNet<float>& net, const SampleSet& data) {
  return evaluate_with_predictor(data, [&net](const IntrinsicTriple& tr) {
    auto out = net.forward(image_to_tensor(tr.I), RunMode::eval);
    return std::array<Image, 3>{tensor_to_image(out.albedo),
                                tensor_to_image(out.shading),
                                tensor_to_image(out.specular)};
  });
}

MetricReport evaluate_baseline(const SampleSet& data) {
  return evaluate_with_predictor(data, [](const IntrinsicTriple& tr) {
    Image shading(tr.I.w, tr.I.h, 3, 1.f);
    Image specular(tr.I.w, tr.I.h, 3, 0.f);
    return std::array<Image, 3>{tr.I, shading, specular};
  });
}

double CrossCategoryReport::diagonal_mean(const std::string& component) const {
  const auto& m = dssim.at(component);
  double acc = 0;
  for (std::size_t i = 0; i < categories.size(); ++i) acc += m[i + 1][i];
  return acc / double(categories.size());
}

double CrossCategoryReport::off_diagonal_mean(const std::string& component) const {
  const auto& m = dssim.at(component);
  double acc = 0;
  int n = 0;
  for (std::size_t r = 0; r < categories.size(); ++r)
    for (std::size_t c = 0; c < categories.size(); ++c)
      if (r != c) {
        acc += m[r + 1][c];
        ++n;
      }
  return n ? acc / n : 0.0;
}

std::string CrossCategoryReport::to_json_string() const {
  json j;
  j["categories"] = categories;
  j["rows"] = rows;
  j["dssim"] = dssim;
  return j.dump(2);
}

CrossCategoryReport CrossCategoryReport::from_json_string(const std::string& s) {
  const json j = json::parse(s);
  CrossCategoryReport r;
  r.categories = j.at("categories").get<std::vector<std::string>>();
  r.rows = j.at("rows").get<std::vector<std::string>>();
  r.dssim = j.at("dssim")
                .get<std::map<std::string, std::vector<std::vector<double>>>>();
  return r;
}

std::string CrossCategoryReport::to_table() const {
  std::ostringstream out;
  for (const auto& [component, m] : dssim) {
    out << component << " DSSIM\n";
    out << "          ";
    for (const auto& c : categories) out << c << "  ";
    out << "\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%-9s ", rows[r].c_str());
      out << buf;
      for (std::size_t c = 0; c < categories.size(); ++c) {
        std::snprintf(buf, sizeof buf, "%6.4f  ", m[r][c]);
        out << buf;
      }
      out << "\n";
    }
    out << "\n";
  }
  return out.str();
}

CrossCategoryReport cross_category(const DatasetManifest& mf, const TrainConfig& cfg,
                                   std::int64_t step_budget) {
  const auto categories = mf.categories();
  if (categories.size() < 2)
    throw std::invalid_argument("cross_category: need >= 2 categories");
  CrossCategoryReport report;
  report.categories = categories;
  report.rows.push_back("ALL");
  for (const auto& c : categories) report.rows.push_back(c);

  std::vector<SampleSet> test_sets;
  for (const auto& c : categories) test_sets.push_back(SampleSet::load(mf, "test", c));

  for (const auto& component : {"albedo", "shading", "specular"})
    report.dssim[component].assign(report.rows.size(),
                                   std::vector<double>(categories.size(), 0.0));

  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    const std::string filter = report.rows[r] == "ALL" ? "" : report.rows[r];
    auto train_set = SampleSet::load(mf, "train", filter);
    TrainConfig c = cfg;
    c.seed = mix_seed(cfg.seed, report.rows[r] + "/cross");
    c.max_steps = step_budget;  // identical budget for every row
    auto net = MirrorLinkNet<float>::build(c.network, c.seed);
    train(net, train_set, c);
    for (std::size_t col = 0; col < categories.size(); ++col) {
      const auto rep = evaluate(net, test_sets[col]);
      const auto m = rep.mean();
      report.dssim["albedo"][r][col] = m.albedo.dssim;
      report.dssim["shading"][r][col] = m.shading.dssim;
      report.dssim["specular"][r][col] = m.specular.dssim;
    }
  }
  return report;
}

TrainHistory finetune_decoder(MirrorLinkNet<float>& net, const DatasetManifest& mf,
                              const std::string& target_category, TrainConfig cfg) {
  net.freeze_encoder();
  cfg.category_filter = target_category;
  auto data = SampleSet::load(mf, "train", target_category);
  return train(net, data, cfg);
}

std::string FinetunePairReport::to_table() const {
  std::ostringstream out;
  out << "            ";
  for (const auto& c : categories) out << c << "(A)  ";
  out << "\n";
  for (const auto& [label, metrics] : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-11s ", label.c_str());
    out << buf;
    for (const auto& m : metrics) {
      std::snprintf(buf, sizeof buf, "%6.4f  ", m.albedo.dssim);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

FinetunePairReport finetune_pair(const DatasetManifest& mf, const TrainConfig& cfg,
                                 const std::string& cat_x, const std::string& cat_y,
                                 std::int64_t step_budget) {
  FinetunePairReport report;
  report.categories = {cat_x, cat_y};
  std::vector<SampleSet> test_sets{SampleSet::load(mf, "test", cat_x),
                                   SampleSet::load(mf, "test", cat_y)};

  auto eval_row = [&](MirrorLinkNet<float>& net) {
    std::vector<SampleMetrics> out;
    for (auto& ts : test_sets) out.push_back(evaluate(net, ts).mean());
    return out;
  };
  auto train_on = [&](const std::string& cat) {
    TrainConfig c = cfg;
    c.seed = mix_seed(cfg.seed, cat + "/ft");
    c.max_steps = step_budget;
    auto net = MirrorLinkNet<float>::build(c.network, c.seed);
    auto data = SampleSet::load(mf, "train", cat);
    train(net, data, c);
    return net;
  };

  for (const auto& [base, target] : {std::pair{cat_x, cat_y}, std::pair{cat_y, cat_x}}) {
    auto net = train_on(base);
    report.rows.emplace_back(base, eval_row(net));
    TrainConfig c = cfg;
    c.seed = mix_seed(cfg.seed, base + "-" + target + "/ft");
    c.max_steps = step_budget;
    finetune_decoder(net, mf, target, c);
    report.rows.emplace_back(base + "-" + target, eval_row(net));
  }
  return report;
}

std::vector<AblationRow> ablate(const std::vector<Variant>& variants,
                                const DatasetManifest& mf, const TrainConfig& cfg,
                                std::int64_t step_budget) {
  if (variants.size() < 2) throw std::invalid_argument("ablate: need >= 2 variants");
  auto train_set = SampleSet::load(mf, "train", cfg.category_filter);
  auto test_set = SampleSet::load(mf, "test", cfg.category_filter);
  std::vector<AblationRow> rows;
  for (const auto v : variants) {
    TrainConfig c = cfg;
    c.network.variant = v;
    c.max_steps = step_budget;
    auto net = MirrorLinkNet<float>::build(c.network, c.seed);
    auto hist = train(net, train_set, c);
    AblationRow row;
    row.variant = v;
    row.steps = std::int64_t(hist.steps.size());
    row.report = evaluate(net, test_set);
    rows.push_back(std::move(row));
  }
  return rows;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0) return img;
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double s = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-double(i) * i / (2 * sigma * sigma));
    s += k[i + radius];
  }
  for (auto& v : k) v /= s;

  Image tmp(img.w, img.h, img.c), out(img.w, img.h, img.c);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          const int xi = x + i;
          if (xi < 0 || xi >= img.w) continue;  // zero boundary
          acc += k[i + radius] * img.at(xi, y, ch);
        }
        tmp.at(x, y, ch) = float(acc);
      }
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          const int yi = y + i;
          if (yi < 0 || yi >= img.h) continue;
          acc += k[i + radius] * tmp.at(x, yi, ch);
        }
        out.at(x, y, ch) = float(acc);
      }
  return out;
}

Image edit_material(const IntrinsicTriple& triple, const Rgb& albedo_tint,
                    double spec_scale, double spec_blur_sigma) {
  if (spec_scale < 0 || spec_blur_sigma < 0)
    throw std::invalid_argument("edit_material: scale and sigma must be >= 0");
  const Image blurred =
      spec_blur_sigma > 0 ? gaussian_blur(triple.R, spec_blur_sigma) : triple.R;
  Image out = triple.I;
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      if (triple.M.at(x, y, 0) <= 0.5f) continue;  // background untouched
      for (int ch = 0; ch < 3; ++ch)
        out.at(x, y, ch) =
            float(albedo_tint[ch]) * triple.A.at(x, y, ch) * triple.S.at(x, y, ch) +
            float(spec_scale) * blurred.at(x, y, ch);
    }
  return out;
}

}  // namespace intrin
