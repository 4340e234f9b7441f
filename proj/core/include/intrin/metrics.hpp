#ifndef INTRIN_METRICS_HPP
#define INTRIN_METRICS_HPP

#include <optional>
#include <string>
#include <vector>

#include "intrin/image.hpp"
#include "intrin/render.hpp"

namespace intrin {

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Scale-invariant MSE over the mask (uniform weights, alpha jointly over
// channels). Shares the loss module's alpha machinery.
double si_mse(const Image& pred, const Image& gt, const Image& mask);

// Plain masked MSE (used for the specular row).
double masked_mse(const Image& pred, const Image& gt, const Image& mask);

// Mean of per-window SMSE over a regular window grid; windows need >= 25%
// masked coverage. Absent when no window qualifies.
std::optional<double> lmse(const Image& pred, const Image& gt, const Image& mask,
                           double window_frac = 0.125);

// Mean (1 - SSIM)/2 over masked window centers, channels averaged; inputs
// clamped to [0,1].
double dssim(const Image& pred, const Image& gt, const Image& mask,
             const SsimParams& params = {});

struct ComponentMetrics {
  double mse = 0;    // si_mse for albedo/shading, plain mse for specular
  double lmse = 0;
  double dssim = 0;
};

struct SampleMetrics {
  ComponentMetrics albedo, shading, specular;
};

struct MetricReport {
  std::vector<SampleMetrics> samples;
  int excluded = 0;  // empty-mask samples

  SampleMetrics mean() const;
  std::string to_json_string() const;
  std::string to_table() const;  // aligned text, rows albedo/shading/specular
  static MetricReport from_json_string(const std::string& s);
};

SampleMetrics evaluate_triple(const Image& pred_albedo, const Image& pred_shading,
                              const Image& pred_specular, const IntrinsicTriple& gt);

}  // namespace intrin

#endif  // INTRIN_METRICS_HPP
