#ifndef INTRIN_DATASET_HPP
#define INTRIN_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "intrin/render.hpp"

namespace intrin {

struct SamplePaths {
  std::string image, albedo, shading, specular, mask;
};

struct SampleRecord {
  std::string sample_id;
  std::string object_id;
  std::string category;
  std::string env_id;
  std::uint64_t seed = 0;
  std::string split;  // "train" | "test"
  SamplePaths paths;  // relative to the manifest directory
};

struct DatasetManifest {
  std::filesystem::path root;  // directory holding manifest.jsonl
  std::uint64_t seed = 0;
  int resolution = 64;
  std::vector<SampleRecord> records;

  std::vector<SampleRecord> select(const std::string& split,
                                   const std::string& category = "") const;
  std::vector<std::string> categories() const;
};

struct BuildParams {
  std::vector<std::string> categories{"sphere", "box", "torus"};
  int objects_per_category = 10;
  int envs_per_object = 1;  // train samples per object; test objects get 1
  int resolution = 64;
  int env_width = 64;
  int env_height = 32;
  int env_lobes = 2;
  std::uint64_t seed = 0;
  bool force = false;
  bool write_previews = true;
};

// Renders all layers to PFM plus PNG previews and writes manifest.jsonl.
// The train/test split is assigned per object before rendering.
DatasetManifest build_dataset(const BuildParams& params,
                              const std::filesystem::path& out_dir);

DatasetManifest load_manifest(const std::filesystem::path& manifest_path);

IntrinsicTriple load_triple(const DatasetManifest& manifest, const SampleRecord& rec);

}  // namespace intrin

#endif  // INTRIN_DATASET_HPP
