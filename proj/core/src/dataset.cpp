#include "intrin/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "intrin/util.hpp"

namespace intrin {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::vector<SampleRecord> DatasetManifest::select(const std::string& split,
                                                  const std::string& category) const {
  std::vector<SampleRecord> out;
  for (const auto& r : records)
    if ((split.empty() || r.split == split) &&
        (category.empty() || r.category == category))
      out.push_back(r);
  return out;
}

std::vector<std::string> DatasetManifest::categories() const {
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& r : records)
    if (seen.insert(r.category).second) out.push_back(r.category);
  return out;
}

namespace {

Primitive sample_primitive(const std::string& category, Rng& rng) {
  Primitive p;
  if (category == "sphere") {
    p.type = PrimitiveType::sphere;
    p.a = rng.uniform(0.6, 1.2);
  } else if (category == "box") {
    p.type = PrimitiveType::box;
    p.a = rng.uniform(0.4, 1.1);
    p.b = rng.uniform(0.4, 1.1);
    p.c = rng.uniform(0.4, 1.1);
  } else if (category == "torus") {
    // widest parameter ranges of the three families
    p.type = PrimitiveType::torus;
    p.a = rng.uniform(0.4, 1.3);
    p.b = rng.uniform(0.08, 0.55);
  } else {
    throw std::invalid_argument("unknown category: " + category);
  }
  return p;
}

std::string seed_hex(std::uint64_t s) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)s);
  return buf;
}

}  // namespace

DatasetManifest build_dataset(const BuildParams& params, const fs::path& out_dir) {
  if (params.categories.empty())
    throw std::invalid_argument("build_dataset: no categories");
  if (params.objects_per_category < 1 || params.envs_per_object < 1)
    throw std::invalid_argument("build_dataset: counts must be positive");
  const fs::path manifest_path = out_dir / "manifest.jsonl";
  if (fs::exists(manifest_path) && !params.force)
    throw std::runtime_error("manifest already exists (use force/--force): " +
                             manifest_path.string());
  fs::create_directories(out_dir / "layers");
  if (params.write_previews) fs::create_directories(out_dir / "previews");

  DatasetManifest mf;
  mf.root = out_dir;
  mf.seed = params.seed;
  mf.resolution = params.resolution;

  for (const auto& category : params.categories) {
    // object-level 80/20 split, per category
    const int n_obj = params.objects_per_category;
    std::vector<int> order(n_obj);
    for (int i = 0; i < n_obj; ++i) order[i] = i;
    Rng split_rng(mix_seed(params.seed, category + "/split"));
    for (int i = n_obj - 1; i > 0; --i)
      std::swap(order[i], order[split_rng.below(std::uint32_t(i + 1))]);
    const int n_train = int(std::lround(0.8 * n_obj));
    std::vector<bool> is_train(n_obj, false);
    for (int i = 0; i < n_train; ++i) is_train[order[i]] = true;

    for (int obj = 0; obj < n_obj; ++obj) {
      const std::string object_id = category + "_" + std::to_string(obj);
      const std::uint64_t obj_seed = mix_seed(params.seed, object_id);
      Rng obj_rng(obj_seed);
      SceneSpec scene;
      scene.primitive = sample_primitive(category, obj_rng);
      scene.material = sample_material(obj_rng);
      scene.category_label = category;

      const int n_views = is_train[obj] ? params.envs_per_object : 1;
      for (int e = 0; e < n_views; ++e) {
        const std::string sample_id = object_id + "_v" + std::to_string(e);
        const std::uint64_t sample_seed = mix_seed(obj_seed, std::uint64_t(e));
        Rng env_rng(mix_seed(sample_seed, "env"));
        const EnvironmentMap env = generate_env(env_rng, params.env_width,
                                                params.env_height, params.env_lobes);
        scene.env_id = "env_" + sample_id;
        scene.seed = sample_seed;
        // low-discrepancy viewpoints, one Halton index per rendered sample
        scene.view_dir = sample_viewpoint(mix_seed(sample_seed, "view") % 100000 + 1);

        const IntrinsicTriple tr = render_scene(scene, env, params.resolution);

        SampleRecord rec;
        rec.sample_id = sample_id;
        rec.object_id = object_id;
        rec.category = category;
        rec.env_id = scene.env_id;
        rec.seed = sample_seed;
        rec.split = is_train[obj] ? "train" : "test";
        rec.paths.image = "layers/" + sample_id + "_image.pfm";
        rec.paths.albedo = "layers/" + sample_id + "_albedo.pfm";
        rec.paths.shading = "layers/" + sample_id + "_shading.pfm";
        rec.paths.specular = "layers/" + sample_id + "_specular.pfm";
        rec.paths.mask = "layers/" + sample_id + "_mask.pfm";
        write_pfm(out_dir / rec.paths.image, tr.I);
        write_pfm(out_dir / rec.paths.albedo, tr.A);
        write_pfm(out_dir / rec.paths.shading, tr.S);
        write_pfm(out_dir / rec.paths.specular, tr.R);
        write_pfm(out_dir / rec.paths.mask, tr.M);
        if (params.write_previews)
          write_png(out_dir / "previews" / (sample_id + ".png"),
                    montage_row({tonemap(tr.I), tonemap(tr.A), tonemap(tr.S),
                                 tonemap(tr.R)}));
        mf.records.push_back(std::move(rec));
      }
    }
  }

  std::ostringstream lines;
  {
    ordered_json head;
    head["dataset_seed"] = mf.seed;
    head["resolution"] = mf.resolution;
    lines << head.dump() << "\n";
  }
  for (const auto& r : mf.records) {
    ordered_json j;
    j["sample_id"] = r.sample_id;
    j["object_id"] = r.object_id;
    j["category"] = r.category;
    j["env_id"] = r.env_id;
    j["seed"] = seed_hex(r.seed);
    j["split"] = r.split;
    j["paths"] = {{"image", r.paths.image},
                  {"albedo", r.paths.albedo},
                  {"shading", r.paths.shading},
                  {"specular", r.paths.specular},
                  {"mask", r.paths.mask}};
    lines << j.dump() << "\n";
  }
  write_file_atomic(manifest_path, lines.str());
  return mf;
}

DatasetManifest load_manifest(const fs::path& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw std::runtime_error("cannot open manifest: " + manifest_path.string());
  DatasetManifest mf;
  mf.root = manifest_path.parent_path();
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (first) {
      first = false;
      mf.seed = j.at("dataset_seed").get<std::uint64_t>();
      mf.resolution = j.at("resolution").get<int>();
      continue;
    }
    SampleRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.object_id = j.at("object_id").get<std::string>();
    r.category = j.at("category").get<std::string>();
    r.env_id = j.at("env_id").get<std::string>();
    r.seed = std::stoull(j.at("seed").get<std::string>(), nullptr, 16);
    r.split = j.at("split").get<std::string>();
    const auto& p = j.at("paths");
    r.paths.image = p.at("image").get<std::string>();
    r.paths.albedo = p.at("albedo").get<std::string>();
    r.paths.shading = p.at("shading").get<std::string>();
    r.paths.specular = p.at("specular").get<std::string>();
    r.paths.mask = p.at("mask").get<std::string>();
    mf.records.push_back(std::move(r));
  }
  return mf;
}

IntrinsicTriple load_triple(const DatasetManifest& manifest, const SampleRecord& rec) {
  IntrinsicTriple tr;
  tr.I = read_pfm(manifest.root / rec.paths.image);
  tr.A = read_pfm(manifest.root / rec.paths.albedo);
  tr.S = read_pfm(manifest.root / rec.paths.shading);
  tr.R = read_pfm(manifest.root / rec.paths.specular);
  tr.M = read_pfm(manifest.root / rec.paths.mask);
  return tr;
}

}  // namespace intrin
