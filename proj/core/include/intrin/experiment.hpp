#ifndef INTRIN_EXPERIMENT_HPP
#define INTRIN_EXPERIMENT_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "intrin/adam.hpp"
#include "intrin/dataset.hpp"
#include "intrin/loss.hpp"
#include "intrin/metrics.hpp"
#include "intrin/network.hpp"

namespace intrin {

struct TrainConfig {
  int epochs = 30;
  int batch = 8;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  LossConfig loss;
  NetworkConfig network;
  std::string category_filter;  // empty = all categories
  std::int64_t max_steps = 0;   // > 0: stop after this many optimizer steps,
                                // cycling through epochs as needed
};

struct StepRecord {
  int epoch = 0;
  std::int64_t step = 0;
  double total = 0, albedo = 0, shading = 0, specular = 0;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<double> epoch_loss;  // mean total loss per epoch

  std::string to_csv() const;
};

struct TrainingDiverged : std::runtime_error {
  std::int64_t step;
  explicit TrainingDiverged(std::int64_t s)
      : std::runtime_error("training diverged (non-finite loss) at step " +
                           std::to_string(s)),
        step(s) {}
};

// In-memory copy of the samples a training/evaluation run touches.
struct SampleSet {
  std::vector<SampleRecord> records;
  std::vector<IntrinsicTriple> triples;

  static SampleSet load(const DatasetManifest& mf, const std::string& split,
                        const std::string& category = "");
};

TrainHistory train(MirrorLinkNet<float>& net, const SampleSet& data,
                   const TrainConfig& cfg, AdamState<float>* opt_state = nullptr);

// pred(gt) -> {albedo, shading, specular} images
using Predictor =
    std::function<std::array<Image, 3>(const IntrinsicTriple&)>;

MetricReport evaluate_with_predictor(const SampleSet& data, const Predictor& pred);
MetricReport evaluate(MirrorLinkNet<float>& net, const SampleSet& data);
MetricReport evaluate_baseline(const SampleSet& data);  // albedo = input, shading = 1, specular = 0

struct CrossCategoryReport {
  std::vector<std::string> categories;            // columns
  std::vector<std::string> rows;                  // "ALL" + categories
  // component -> rows x columns DSSIM means
  std::map<std::string, std::vector<std::vector<double>>> dssim;

  std::string to_json_string() const;
  std::string to_table() const;
  static CrossCategoryReport from_json_string(const std::string& s);
  double diagonal_mean(const std::string& component) const;
  double off_diagonal_mean(const std::string& component) const;
};

// Trains one model per category plus one on ALL, each with the same step
// budget, then evaluates every model on every category's test split.
CrossCategoryReport cross_category(const DatasetManifest& mf, const TrainConfig& cfg,
                                   std::int64_t step_budget);

// Freezes the encoder and fine-tunes the decoders on the target category's
// train split.
TrainHistory finetune_decoder(MirrorLinkNet<float>& net, const DatasetManifest& mf,
                              const std::string& target_category, TrainConfig cfg);

// Table-style rows for encoder-freeze fine-tuning between two categories:
// "X" (trained on X), "X-Y" (X model, decoders fine-tuned on Y), and the
// mirrored pair. Each entry holds per-category DSSIM means.
struct FinetunePairReport {
  std::vector<std::string> categories;  // evaluation columns
  std::vector<std::pair<std::string, std::vector<SampleMetrics>>> rows;

  std::string to_table() const;
};

FinetunePairReport finetune_pair(const DatasetManifest& mf, const TrainConfig& cfg,
                                 const std::string& cat_x, const std::string& cat_y,
                                 std::int64_t step_budget);

struct AblationRow {
  Variant variant;
  MetricReport report;
  std::int64_t steps = 0;
};

std::vector<AblationRow> ablate(const std::vector<Variant>& variants,
                                const DatasetManifest& mf, const TrainConfig& cfg,
                                std::int64_t step_budget);

// I' = (tint * A) * S + spec_scale * GaussianBlur(R, sigma); unmasked pixels
// keep their original value.
Image edit_material(const IntrinsicTriple& triple, const Rgb& albedo_tint,
                    double spec_scale, double spec_blur_sigma);

Image gaussian_blur(const Image& img, double sigma);

}  // namespace intrin

#endif  // INTRIN_EXPERIMENT_HPP
