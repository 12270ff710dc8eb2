#include "msunet/metrics/segmentation.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "msunet/error.h"

namespace msunet::metrics {
namespace {

void CheckBinary(const Tensor& t, const char* what) {
  for (float v : t.values()) {
    if (v != 0.0f && v != 1.0f) throw Error(std::string(what) + " must be binary");
  }
}

void CheckSameShape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + " shape " + ShapeString(b.shape()) + " does not match " +
                     ShapeString(a.shape()));
  }
}

std::optional<double> Ratio(long num, long den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> OneMinus(const std::optional<double>& v) {
  if (!v) return std::nullopt;
  return 1.0 - *v;
}

double NormalTwoSided(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

std::string Cell(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(10);
  os << *v;
  return os.str();
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ConfusionCounts Confusion(const Tensor& prob, const Tensor& label, const Tensor& roi,
                          double threshold) {
  CheckSameShape(prob, label, "label");
  CheckSameShape(prob, roi, "roi");
  CheckBinary(label, "label");
  CheckBinary(roi, "roi");
  ConfusionCounts c;
  const auto p = prob.values();
  const auto y = label.values();
  const auto r = roi.values();
  for (size_t i = 0; i < p.size(); ++i) {
    if (r[i] == 0.0f) continue;
    const bool pos = p[i] >= threshold;
    const bool truth = y[i] == 1.0f;
    if (pos && truth) ++c.tp;
    else if (pos) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

std::optional<double>& MetricSet::Get(int i) {
  switch (i) {
    case 0: return iou;
    case 1: return sensitivity;
    case 2: return specificity;
    case 3: return fpr;
    default: return fnr;
  }
}

const std::optional<double>& MetricSet::Get(int i) const {
  return const_cast<MetricSet*>(this)->Get(i);
}

MetricSet ComputeMetrics(const ConfusionCounts& c) {
  MetricSet m;
  m.iou = Ratio(c.tp, c.tp + c.fp + c.fn);
  m.sensitivity = Ratio(c.tp, c.tp + c.fn);
  m.specificity = Ratio(c.tn, c.tn + c.fp);
  m.fpr = OneMinus(m.specificity);
  m.fnr = OneMinus(m.sensitivity);
  return m;
}

AggregateMetrics MeanOverImages(std::span<const MetricSet> per_image) {
  AggregateMetrics agg;
  agg.images = static_cast<int>(per_image.size());
  for (int k = 0; k < kNumMetrics; ++k) {
    double sum = 0.0;
    int n = 0;
    for (const MetricSet& m : per_image) {
      if (const auto& v = m.Get(k)) {
        sum += *v;
        ++n;
      } else {
        ++agg.skipped[static_cast<size_t>(k)];
      }
    }
    if (n == 0) {
      throw DegenerateInputError("metric " + std::string(kMetricNames[static_cast<size_t>(k)]) +
                                 " is undefined for every image");
    }
    agg.mean.Get(k) = sum / n;
  }
  return agg;
}

PrCurve ComputePrCurve(std::span<const Tensor> probs, std::span<const Tensor> labels,
                       const Tensor& roi, int max_levels) {
  if (probs.size() != labels.size()) throw ShapeError("probability and label counts differ");
  if (max_levels < 2) throw Error("max_levels must be >= 2");
  CheckBinary(roi, "roi");
  std::vector<std::pair<float, bool>> pixels;
  for (size_t i = 0; i < probs.size(); ++i) {
    CheckSameShape(roi, probs[i], "probability map");
    CheckSameShape(roi, labels[i], "label");
    CheckBinary(labels[i], "label");
    const auto p = probs[i].values();
    const auto y = labels[i].values();
    const auto r = roi.values();
    for (size_t j = 0; j < p.size(); ++j) {
      if (r[j] != 0.0f) pixels.emplace_back(p[j], y[j] == 1.0f);
    }
  }
  const long positives = std::count_if(pixels.begin(), pixels.end(), [](const auto& px) { return px.second; });
  if (positives == 0) throw DegenerateInputError("precision-recall curve needs at least one positive pixel");

  std::sort(pixels.begin(), pixels.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<float> distinct;
  for (const auto& px : pixels) {
    if (distinct.empty() || px.first != distinct.back()) distinct.push_back(px.first);
  }
  std::vector<float> thresholds;
  if (distinct.size() <= static_cast<size_t>(max_levels)) {
    thresholds = distinct;
  } else {
    // Quantile-spaced levels over the distinct values, always keeping the
    // smallest so the sweep ends at recall 1.
    const size_t d = distinct.size();
    for (int j = 0; j < max_levels; ++j) {
      const size_t idx = static_cast<size_t>(std::llround(static_cast<double>(j) * (d - 1) / (max_levels - 1)));
      if (thresholds.empty() || distinct[idx] != thresholds.back()) thresholds.push_back(distinct[idx]);
    }
  }

  PrCurve curve;
  curve.prevalence = static_cast<double>(positives) / static_cast<double>(pixels.size());
  long tp = 0, fp = 0;
  size_t cursor = 0;
  double prev_recall = 0.0;
  for (float t : thresholds) {
    while (cursor < pixels.size() && pixels[cursor].first >= t) {
      (pixels[cursor].second ? tp : fp) += 1;
      ++cursor;
    }
    PrPoint pt;
    pt.threshold = t;
    pt.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
    pt.recall = static_cast<double>(tp) / static_cast<double>(positives);
    curve.average_precision += (pt.recall - prev_recall) * pt.precision;
    prev_recall = pt.recall;
    curve.points.push_back(pt);
  }
  return curve;
}

UncertaintyPools SplitUncertainty(std::span<const Tensor> prob_means,
                                  std::span<const Tensor> epistemic,
                                  std::span<const Tensor> labels, const Tensor& roi,
                                  double threshold) {
  if (prob_means.size() != labels.size() || epistemic.size() != labels.size()) {
    throw ShapeError("prediction, uncertainty and label counts differ");
  }
  CheckBinary(roi, "roi");
  UncertaintyPools pools;
  for (size_t i = 0; i < labels.size(); ++i) {
    CheckSameShape(roi, prob_means[i], "probability map");
    CheckSameShape(roi, epistemic[i], "uncertainty map");
    CheckSameShape(roi, labels[i], "label");
    CheckBinary(labels[i], "label");
    const auto p = prob_means[i].values();
    const auto u = epistemic[i].values();
    const auto y = labels[i].values();
    const auto r = roi.values();
    for (size_t j = 0; j < p.size(); ++j) {
      if (r[j] == 0.0f) continue;
      const bool correct = (p[j] >= threshold) == (y[j] == 1.0f);
      (correct ? pools.correct : pools.incorrect).push_back(u[j]);
    }
  }
  return pools;
}

UncertaintyPools SplitUncertainty(std::span<const nn::McOutput> outputs,
                                  std::span<const Tensor> labels, const Tensor& roi,
                                  double threshold) {
  std::vector<Tensor> probs, eps;
  probs.reserve(outputs.size());
  eps.reserve(outputs.size());
  for (const auto& o : outputs) {
    probs.push_back(o.prob_mean);
    eps.push_back(o.epistemic);
  }
  return SplitUncertainty(probs, eps, labels, roi, threshold);
}

PairedTestKind ParsePairedTestKind(std::string_view name) {
  if (name == "none") return PairedTestKind::kNone;
  if (name == "t") return PairedTestKind::kPairedT;
  if (name == "wilcoxon") return PairedTestKind::kWilcoxon;
  throw ConfigError("eval.paired_test", "expected none, t or wilcoxon, got '" + std::string(name) + "'");
}

std::string_view ToString(PairedTestKind kind) {
  switch (kind) {
    case PairedTestKind::kPairedT: return "t";
    case PairedTestKind::kWilcoxon: return "wilcoxon";
    default: return "none";
  }
}

std::vector<double> PairedDifferences(std::span<const std::optional<double>> a,
                                      std::span<const std::optional<double>> b) {
  if (a.size() != b.size()) throw ShapeError("paired samples have different lengths");
  std::vector<double> d;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] && b[i]) d.push_back(*b[i] - *a[i]);
  }
  return d;
}

PairedTestResult PairedTest(std::span<const double> diffs, PairedTestKind kind) {
  PairedTestResult r;
  r.kind = kind;
  r.n = diffs.size();
  if (!diffs.empty()) r.mean_difference = std::accumulate(diffs.begin(), diffs.end(), 0.0) / diffs.size();
  if (kind == PairedTestKind::kNone) return r;
  if (diffs.size() < 2) throw DegenerateInputError("paired test needs at least 2 pairs");

  if (kind == PairedTestKind::kPairedT) {
    double ss = 0.0;
    for (double d : diffs) ss += (d - r.mean_difference) * (d - r.mean_difference);
    const double n = static_cast<double>(diffs.size());
    const double se = std::sqrt(ss / (n - 1.0) / n);
    if (se == 0.0) {
      r.statistic = r.mean_difference == 0.0 ? 0.0 : std::copysign(INFINITY, r.mean_difference);
      r.p_value = r.mean_difference == 0.0 ? 1.0 : 0.0;
      return r;
    }
    r.statistic = r.mean_difference / se;
    boost::math::students_t dist(n - 1.0);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.statistic)));
    return r;
  }

  // Wilcoxon signed-rank, zero differences dropped, average ranks for ties.
  std::vector<double> nz;
  for (double d : diffs) {
    if (d != 0.0) nz.push_back(d);
  }
  r.n = nz.size();
  if (nz.empty()) return r;
  std::vector<size_t> order(nz.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return std::fabs(nz[a]) < std::fabs(nz[b]); });
  std::vector<double> rank(nz.size());
  double tie_term = 0.0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && std::fabs(nz[order[j + 1]]) == std::fabs(nz[order[i]])) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    const double ties = static_cast<double>(j - i + 1);
    tie_term += ties * ties * ties - ties;
    i = j + 1;
  }
  double w_plus = 0.0;
  for (size_t i = 0; i < nz.size(); ++i) {
    if (nz[i] > 0) w_plus += rank[i];
  }
  const double n = static_cast<double>(nz.size());
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  r.statistic = w_plus;
  r.p_value = var > 0.0 ? std::min(1.0, NormalTwoSided((w_plus - mean) / std::sqrt(var))) : 1.0;
  return r;
}

std::string MetricsCsv(std::span<const std::string> ids, std::span<const MetricSet> per_image,
                       const AggregateMetrics& aggregate) {
  std::ostringstream os;
  os << "image";
  for (auto name : kMetricNames) os << ',' << name;
  os << '\n';
  for (size_t i = 0; i < per_image.size(); ++i) {
    os << (i < ids.size() ? ids[i] : std::to_string(i));
    for (int k = 0; k < kNumMetrics; ++k) os << ',' << Cell(per_image[i].Get(k));
    os << '\n';
  }
  os << "mean";
  for (int k = 0; k < kNumMetrics; ++k) os << ',' << Cell(aggregate.mean.Get(k));
  os << '\n';
  return os.str();
}

std::string AggregateToJson(const AggregateMetrics& aggregate) {
  nlohmann::json j;
  j["images"] = aggregate.images;
  for (int k = 0; k < kNumMetrics; ++k) {
    const std::string name(kMetricNames[static_cast<size_t>(k)]);
    const auto& v = aggregate.mean.Get(k);
    j["mean"][name] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    j["skipped"][name] = aggregate.skipped[static_cast<size_t>(k)];
  }
  return j.dump(2);
}

std::string PrCurveCsv(const PrCurve& curve) {
  std::ostringstream os;
  os.precision(10);
  os << "threshold,precision,recall\n";
  for (const auto& p : curve.points) os << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
  return os.str();
}

}  // namespace msunet::metrics
