#ifndef MSUNET_METRICS_SEGMENTATION_H_
#define MSUNET_METRICS_SEGMENTATION_H_

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msunet/nn/mc.h"
#include "msunet/tensor.h"

namespace msunet::metrics {

inline constexpr double kDefaultThreshold = 0.5;
inline constexpr int kMaxPrLevels = 1024;

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  long total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
};

// A pixel is predicted positive iff prob >= threshold; only pixels with
// roi == 1 are counted. label and roi must be binary.
ConfusionCounts Confusion(const Tensor& prob, const Tensor& label, const Tensor& roi,
                          double threshold = kDefaultThreshold);

inline constexpr int kNumMetrics = 5;
inline constexpr std::array<std::string_view, kNumMetrics> kMetricNames = {
    "iou", "sensitivity", "specificity", "fpr", "fnr"};

// Ratios with an empty denominator are left unset.
struct MetricSet {
  std::optional<double> iou;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> fpr;
  std::optional<double> fnr;

  std::optional<double>& Get(int i);
  const std::optional<double>& Get(int i) const;
};

MetricSet ComputeMetrics(const ConfusionCounts& counts);

struct AggregateMetrics {
  MetricSet mean;
  std::array<int, kNumMetrics> skipped{};
  int images = 0;
};

// Unweighted mean over images, skipping unset values. Throws
// DegenerateInputError naming a metric that is unset for every image.
AggregateMetrics MeanOverImages(std::span<const MetricSet> per_image);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // descending threshold, non-decreasing recall
  double average_precision = 0.0;
  double prevalence = 0.0;
};

// Micro-averaged curve over the pooled ROI pixels of all images.
PrCurve ComputePrCurve(std::span<const Tensor> probs, std::span<const Tensor> labels,
                       const Tensor& roi, int max_levels = kMaxPrLevels);

struct UncertaintyPools {
  std::vector<double> correct;
  std::vector<double> incorrect;
};

UncertaintyPools SplitUncertainty(std::span<const Tensor> prob_means,
                                  std::span<const Tensor> epistemic,
                                  std::span<const Tensor> labels, const Tensor& roi,
                                  double threshold = kDefaultThreshold);
UncertaintyPools SplitUncertainty(std::span<const nn::McOutput> outputs,
                                  std::span<const Tensor> labels, const Tensor& roi,
                                  double threshold = kDefaultThreshold);

enum class PairedTestKind { kNone, kPairedT, kWilcoxon };

PairedTestKind ParsePairedTestKind(std::string_view name);
std::string_view ToString(PairedTestKind kind);

struct PairedTestResult {
  PairedTestKind kind = PairedTestKind::kNone;
  size_t n = 0;  // pairs used (both values defined, non-zero difference for Wilcoxon)
  double mean_difference = 0.0;
  double statistic = 0.0;
  double p_value = 1.0;  // two-sided
};

// Per-image paired differences b - a; pairs with an unset side are dropped.
std::vector<double> PairedDifferences(std::span<const std::optional<double>> a,
                                      std::span<const std::optional<double>> b);

// Paired t-test or Wilcoxon signed-rank test (normal approximation with
// tie correction) on the differences.
PairedTestResult PairedTest(std::span<const double> differences, PairedTestKind kind);

std::string MetricsCsv(std::span<const std::string> ids, std::span<const MetricSet> per_image,
                       const AggregateMetrics& aggregate);
std::string AggregateToJson(const AggregateMetrics& aggregate);
std::string PrCurveCsv(const PrCurve& curve);

}  // namespace msunet::metrics

#endif  // MSUNET_METRICS_SEGMENTATION_H_
