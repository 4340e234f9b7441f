// intrinsics: dataset generation, training, evaluation and editing for
// non-Lambertian intrinsic image decomposition.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "intrin/checkpoint.hpp"
#include "intrin/convert.hpp"
#include "intrin/dataset.hpp"
#include "intrin/experiment.hpp"
#include "intrin/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace intrin;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Common {
  std::string data_root;
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  json config;  // parsed --config file, may be null

  // precedence: flag > config file > env var > default
  void resolve() {
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw CLI::ValidationError("--config", "cannot open " + config_path);
      f >> config;
    }
    if (data_root.empty() && config.contains("data_root"))
      data_root = config["data_root"].get<std::string>();
    if (data_root.empty())
      if (const char* env = std::getenv("INTRINSICS_DATA")) data_root = env;
    if (data_root.empty()) data_root = "data";
    if (!seed_set && config.contains("seed"))
      seed = config["seed"].get<std::uint64_t>();
  }
  template <class T>
  T cfg_or(const std::string& key, T fallback) const {
    return config.contains(key) ? config[key].get<T>() : fallback;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--data-root", c.data_root, "data directory (or $INTRINSICS_DATA)");
  cmd->add_option("--config", c.config_path, "JSON config file with defaults");
  cmd->add_option("--seed", c.seed, "global seed")->each([&c](const std::string&) {
    c.seed_set = true;
  });
}

NetworkConfig network_from_flags(const Common& c, int resolution,
                                 const std::string& variant, int levels,
                                 int base_channels, int cmax) {
  NetworkConfig nc;
  nc.resolution = resolution;
  nc.levels = levels;
  nc.base_channels = base_channels;
  nc.channel_cap = cmax;
  nc.variant = variant_from_name(variant);
  (void)c;
  return nc;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

Image load_input_image(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pfm") return read_pfm(path);
  return read_png(path);
}

// center-crop to square, then nearest resize to res
Image fit_to_resolution(const Image& img, int res) {
  const int side = std::min(img.w, img.h);
  const int x0 = (img.w - side) / 2, y0 = (img.h - side) / 2;
  Image out(res, res, 3);
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) {
      const int sx = x0 + int(std::int64_t(x) * side / res);
      const int sy = y0 + int(std::int64_t(y) * side / res);
      for (int ch = 0; ch < 3; ++ch)
        out.at(x, y, ch) = img.c == 1 ? img.at(sx, sy, 0) : img.at(sx, sy, ch);
    }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"non-Lambertian intrinsic decomposition lab"};
  app.require_subcommand(1);

  // ---- dataset ----
  Common dsc;
  std::string ds_categories = "sphere,box,torus";
  int ds_objects = 10, ds_envs = 1, ds_resolution = 64, ds_lobes = 2;
  std::string ds_out;
  bool ds_force = false;
  auto* cmd_dataset = app.add_subcommand("dataset", "render a ground-truth dataset");
  add_common(cmd_dataset, dsc);
  cmd_dataset->add_option("--categories", ds_categories, "comma-separated category list");
  cmd_dataset->add_option("--objects", ds_objects, "objects per category");
  cmd_dataset->add_option("--envs-per-object", ds_envs, "rendered views per train object");
  cmd_dataset->add_option("--resolution", ds_resolution, "image resolution (power of two)");
  cmd_dataset->add_option("--lobes", ds_lobes, "light lobes per environment map");
  cmd_dataset->add_option("--out", ds_out, "output directory (default <data-root>/dataset)");
  cmd_dataset->add_flag("--force", ds_force, "overwrite an existing manifest");

  // ---- train ----
  Common trc;
  std::string tr_manifest, tr_out = "model.ckpt", tr_variant = "mirror_link",
              tr_category, tr_history, tr_init_from;
  int tr_epochs = 30, tr_batch = 8, tr_levels = 5, tr_c0 = 16, tr_cmax = 128;
  std::int64_t tr_steps = 0;
  double tr_lr = 1e-3, tr_edge_lambda = 4.0;
  bool tr_freeze = false;
  auto* cmd_train = app.add_subcommand("train", "train a model on a dataset");
  add_common(cmd_train, trc);
  cmd_train->add_option("--manifest", tr_manifest, "manifest.jsonl path");
  cmd_train->add_option("--out", tr_out, "checkpoint output path");
  cmd_train->add_option("--variant", tr_variant,
                        "independent|shared_encoder|mirror_link|skip3|skip0");
  cmd_train->add_option("--epochs", tr_epochs);
  cmd_train->add_option("--steps", tr_steps, "fixed optimizer-step budget (overrides epochs)");
  cmd_train->add_option("--batch", tr_batch);
  cmd_train->add_option("--lr", tr_lr);
  cmd_train->add_option("--levels", tr_levels);
  cmd_train->add_option("--base-channels", tr_c0);
  cmd_train->add_option("--channel-cap", tr_cmax);
  cmd_train->add_option("--edge-lambda", tr_edge_lambda);
  cmd_train->add_option("--category", tr_category, "restrict training to one category");
  cmd_train->add_option("--history", tr_history, "loss history CSV output path");
  cmd_train->add_option("--init-from", tr_init_from, "checkpoint to fine-tune from");
  cmd_train->add_flag("--freeze-encoder", tr_freeze, "freeze encoder (decoder fine-tuning)");

  // ---- eval ----
  Common evc;
  std::string ev_checkpoint, ev_manifest, ev_split = "test", ev_category, ev_out;
  bool ev_baseline = false;
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(cmd_eval, evc);
  cmd_eval->add_option("--checkpoint", ev_checkpoint);
  cmd_eval->add_option("--manifest", ev_manifest);
  cmd_eval->add_option("--split", ev_split, "train|test");
  cmd_eval->add_option("--category", ev_category);
  cmd_eval->add_option("--out", ev_out, "report JSON output path");
  cmd_eval->add_flag("--baseline", ev_baseline,
                     "evaluate the albedo=input/shading=1 baseline instead");

  // ---- cross ----
  Common crc;
  std::string cr_manifest, cr_out, cr_variant = "mirror_link";
  std::int64_t cr_steps = 100;
  int cr_levels = 5, cr_c0 = 16, cr_cmax = 128, cr_batch = 8;
  double cr_lr = 1e-3;
  auto* cmd_cross = app.add_subcommand("cross", "cross-category training matrix");
  add_common(cmd_cross, crc);
  cmd_cross->add_option("--manifest", cr_manifest);
  cmd_cross->add_option("--steps", cr_steps, "step budget per model");
  cmd_cross->add_option("--variant", cr_variant);
  cmd_cross->add_option("--levels", cr_levels);
  cmd_cross->add_option("--base-channels", cr_c0);
  cmd_cross->add_option("--channel-cap", cr_cmax);
  cmd_cross->add_option("--batch", cr_batch);
  cmd_cross->add_option("--lr", cr_lr);
  cmd_cross->add_option("--out", cr_out, "report JSON output path");

  // ---- ablate ----
  Common abc;
  std::string ab_manifest, ab_variants = "mirror_link,skip0", ab_out;
  std::int64_t ab_steps = 100;
  int ab_levels = 5, ab_c0 = 16, ab_cmax = 128, ab_batch = 8;
  double ab_lr = 1e-3;
  auto* cmd_ablate = app.add_subcommand("ablate", "network-variant sweep");
  add_common(cmd_ablate, abc);
  cmd_ablate->add_option("--manifest", ab_manifest);
  cmd_ablate->add_option("--variants", ab_variants, "comma-separated variant list");
  cmd_ablate->add_option("--steps", ab_steps, "step budget per variant");
  cmd_ablate->add_option("--levels", ab_levels);
  cmd_ablate->add_option("--base-channels", ab_c0);
  cmd_ablate->add_option("--channel-cap", ab_cmax);
  cmd_ablate->add_option("--batch", ab_batch);
  cmd_ablate->add_option("--lr", ab_lr);
  cmd_ablate->add_option("--out", ab_out, "report JSON output path");

  // ---- decompose ----
  Common dcc;
  std::string dc_image, dc_checkpoint, dc_out = "decomposed";
  auto* cmd_decompose = app.add_subcommand("decompose", "decompose an image into A,S,R");
  add_common(cmd_decompose, dcc);
  cmd_decompose->add_option("--image", dc_image)->required();
  cmd_decompose->add_option("--checkpoint", dc_checkpoint)->required();
  cmd_decompose->add_option("--out", dc_out, "output directory");

  // ---- edit ----
  Common edc;
  std::string ed_prefix, ed_tint = "1,1,1", ed_out = "edited";
  double ed_spec_scale = 1.0, ed_blur = 0.0;
  auto* cmd_edit = app.add_subcommand("edit", "material editing on stored layers");
  add_common(cmd_edit, edc);
  cmd_edit->add_option("--prefix", ed_prefix,
                       "layer path prefix; reads <prefix>image.pfm etc.")
      ->required();
  cmd_edit->add_option("--tint", ed_tint, "albedo tint r,g,b");
  cmd_edit->add_option("--spec-scale", ed_spec_scale);
  cmd_edit->add_option("--blur", ed_blur, "specular blur sigma (pixels)");
  cmd_edit->add_option("--out", ed_out, "output path prefix");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_dataset) {
      dsc.resolve();
      BuildParams p;
      p.categories = split_csv(ds_categories);
      p.objects_per_category = ds_objects;
      p.envs_per_object = ds_envs;
      p.resolution = ds_resolution;
      p.env_lobes = ds_lobes;
      p.seed = dsc.seed;
      p.force = ds_force;
      const fs::path out = ds_out.empty() ? fs::path(dsc.data_root) / "dataset"
                                          : fs::path(ds_out);
      auto mf = build_dataset(p, out);
      std::cout << (out / "manifest.jsonl").string() << "\n";
      std::cout << "samples: " << mf.records.size() << "\n";
    } else if (*cmd_train) {
      trc.resolve();
      auto mf = load_manifest(tr_manifest);
      TrainConfig cfg;
      cfg.epochs = tr_epochs;
      cfg.max_steps = tr_steps;
      cfg.batch = tr_batch;
      cfg.lr = tr_lr;
      cfg.seed = trc.seed;
      cfg.loss.edge_lambda = tr_edge_lambda;
      cfg.category_filter = tr_category;
      cfg.network = network_from_flags(trc, mf.resolution, tr_variant, tr_levels,
                                       tr_c0, tr_cmax);
      MirrorLinkNet<float> net =
          tr_init_from.empty() ? MirrorLinkNet<float>::build(cfg.network, cfg.seed)
                               : load_checkpoint(tr_init_from).net;
      if (net.config().resolution != mf.resolution)
        throw std::invalid_argument("checkpoint/manifest resolution mismatch");
      if (tr_freeze) net.freeze_encoder();
      auto data = SampleSet::load(mf, "train", tr_category);
      AdamState<float> opt;
      auto hist = train(net, data, cfg, &opt);
      save_checkpoint(tr_out, net, &opt);
      if (!tr_history.empty()) write_file_atomic(tr_history, hist.to_csv());
      std::cout << "checkpoint: " << tr_out << "\n"
                << "steps: " << hist.steps.size() << "\n";
      if (!hist.epoch_loss.empty())
        std::cout << "final epoch loss: " << hist.epoch_loss.back() << "\n";
    } else if (*cmd_eval) {
      evc.resolve();
      auto mf = load_manifest(ev_manifest);
      auto data = SampleSet::load(mf, ev_split, ev_category);
      MetricReport report;
      if (ev_baseline) {
        report = evaluate_baseline(data);
      } else {
        auto ck = load_checkpoint(ev_checkpoint);
        if (ck.net.config().resolution != mf.resolution)
          throw std::invalid_argument("checkpoint/manifest resolution mismatch");
        report = evaluate(ck.net, data);
      }
      std::cout << report.to_table();
      if (!ev_out.empty()) write_file_atomic(ev_out, report.to_json_string());
    } else if (*cmd_cross) {
      crc.resolve();
      auto mf = load_manifest(cr_manifest);
      TrainConfig cfg;
      cfg.batch = cr_batch;
      cfg.lr = cr_lr;
      cfg.seed = crc.seed;
      cfg.network = network_from_flags(crc, mf.resolution, cr_variant, cr_levels,
                                       cr_c0, cr_cmax);
      auto report = cross_category(mf, cfg, cr_steps);
      std::cout << report.to_table();
      if (!cr_out.empty()) write_file_atomic(cr_out, report.to_json_string());
    } else if (*cmd_ablate) {
      abc.resolve();
      auto mf = load_manifest(ab_manifest);
      TrainConfig cfg;
      cfg.batch = ab_batch;
      cfg.lr = ab_lr;
      cfg.seed = abc.seed;
      cfg.network = network_from_flags(abc, mf.resolution, ab_variants, ab_levels,
                                       ab_c0, ab_cmax);
      std::vector<Variant> variants;
      for (const auto& v : split_csv(ab_variants))
        variants.push_back(variant_from_name(v));
      cfg.network.variant = variants.front();
      auto rows = ablate(variants, mf, cfg, ab_steps);
      json out = json::array();
      for (const auto& row : rows) {
        const auto m = row.report.mean();
        std::cout << variant_name(row.variant) << ":\n" << row.report.to_table();
        out.push_back({{"variant", variant_name(row.variant)},
                       {"steps", row.steps},
                       {"albedo", {{"mse", m.albedo.mse}, {"lmse", m.albedo.lmse}, {"dssim", m.albedo.dssim}}},
                       {"shading", {{"mse", m.shading.mse}, {"lmse", m.shading.lmse}, {"dssim", m.shading.dssim}}},
                       {"specular", {{"mse", m.specular.mse}, {"lmse", m.specular.lmse}, {"dssim", m.specular.dssim}}}});
      }
      if (!ab_out.empty()) write_file_atomic(ab_out, out.dump(2));
    } else if (*cmd_decompose) {
      dcc.resolve();
      auto ck = load_checkpoint(dc_checkpoint);
      const int res = ck.net.config().resolution;
      const Image input = fit_to_resolution(load_input_image(dc_image), res);
      auto out = ck.net.forward(image_to_tensor(input), RunMode::eval);
      const Image A = tensor_to_image(out.albedo);
      const Image S = tensor_to_image(out.shading);
      const Image R = tensor_to_image(out.specular);
      fs::create_directories(dc_out);
      write_pfm(fs::path(dc_out) / "albedo.pfm", A);
      write_pfm(fs::path(dc_out) / "shading.pfm", S);
      write_pfm(fs::path(dc_out) / "specular.pfm", R);
      write_png(fs::path(dc_out) / "albedo.png", tonemap(A));
      write_png(fs::path(dc_out) / "shading.png", tonemap(S));
      write_png(fs::path(dc_out) / "specular.png", tonemap(R));
      write_png(fs::path(dc_out) / "montage.png",
                montage_row({tonemap(input), tonemap(A), tonemap(S), tonemap(R)}));
      // informational reconstruction error of A*S+R against the input
      double err = 0;
      for (std::size_t i = 0; i < input.px.size(); ++i) {
        const double d = double(A.px[i]) * S.px[i] + R.px[i] - input.px[i];
        err += d * d;
      }
      std::cout << "outputs: " << dc_out << "\n"
                << "reconstruction mse: " << err / double(input.px.size()) << "\n";
    } else if (*cmd_edit) {
      edc.resolve();
      IntrinsicTriple tr;
      tr.I = read_pfm(ed_prefix + "image.pfm");
      tr.A = read_pfm(ed_prefix + "albedo.pfm");
      tr.S = read_pfm(ed_prefix + "shading.pfm");
      tr.R = read_pfm(ed_prefix + "specular.pfm");
      tr.M = read_pfm(ed_prefix + "mask.pfm");
      const auto tint_parts = split_csv(ed_tint);
      if (tint_parts.size() != 3)
        throw std::invalid_argument("--tint needs r,g,b");
      Rgb tint{std::stod(tint_parts[0]), std::stod(tint_parts[1]),
               std::stod(tint_parts[2])};
      const Image edited = edit_material(tr, tint, ed_spec_scale, ed_blur);
      write_pfm(ed_out + ".pfm", edited);
      write_png(ed_out + ".png", tonemap(edited));
      std::cout << ed_out << ".pfm\n";
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    // manifest collisions and missing files are validation-level failures
    const std::string msg = e.what();
    if (msg.find("already exists") != std::string::npos ||
        msg.find("cannot open") != std::string::npos)
      return kExitValidation;
    return kExitRuntime;
  }
  return kExitOk;
}
