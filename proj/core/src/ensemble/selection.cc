#include "msunet/ensemble/selection.h"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "msunet/error.h"
#include "msunet/nn/mc.h"
#include "msunet/parallel.h"

namespace msunet::ensemble {

using nlohmann::json;

Matrix BrierMatrix(const std::vector<std::vector<Tensor>>& probs, std::span<const Tensor> labels,
                   const Tensor& roi) {
  if (labels.empty()) throw DegenerateInputError("Brier matrix needs a non-empty VS2 split");
  size_t roi_pixels = 0;
  for (float v : roi.values()) roi_pixels += v > 0.5f;
  if (roi_pixels == 0) throw DegenerateInputError("Brier matrix needs a non-empty ROI");
  const int models = static_cast<int>(probs.size());
  const int images = static_cast<int>(labels.size());
  Matrix e(models, images);
  for (int i = 0; i < models; ++i) {
    if (probs[static_cast<size_t>(i)].size() != labels.size()) {
      throw ShapeError("model " + std::to_string(i) + " has predictions for " +
                       std::to_string(probs[static_cast<size_t>(i)].size()) + " images, expected " +
                       std::to_string(images));
    }
    for (int j = 0; j < images; ++j) {
      const Tensor& p = probs[static_cast<size_t>(i)][static_cast<size_t>(j)];
      const Tensor& y = labels[static_cast<size_t>(j)];
      if (p.size() != roi.size() || y.size() != roi.size()) {
        throw ShapeError("Brier matrix: prediction, label and ROI sizes differ");
      }
      double s = 0.0;
      for (size_t k = 0; k < roi.size(); ++k) {
        if (roi[k] > 0.5f) {
          const double d = static_cast<double>(p[k]) - y[k];
          s += d * d;
        }
      }
      e(i, j) = s / static_cast<double>(roi_pixels);
    }
  }
  return e;
}

Matrix BrierMatrixFromModels(std::vector<nn::MiniSegNet>& models, std::span<const Tensor> inputs,
                             std::span<const Tensor> labels, const Tensor& roi, int threads) {
  std::vector<std::vector<Tensor>> probs(models.size());
  ParallelFor(models.size(), threads, [&](size_t i) {
    probs[i].reserve(inputs.size());
    for (const Tensor& x : inputs) probs[i].push_back(nn::PredictProbabilities(models[i], x));
  });
  return BrierMatrix(probs, labels, roi);
}

Matrix CorrelationMatrix(const Matrix& e) {
  if (e.cols < 2) throw DegenerateInputError("correlation needs at least two VS2 images");
  const int m = e.rows, n = e.cols;
  std::vector<std::vector<double>> centered(static_cast<size_t>(m), std::vector<double>(n));
  std::vector<double> norm(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += e(i, j);
    mean /= n;
    double ss = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = e(i, j) - mean;
      centered[i][j] = d;
      ss += d * d;
    }
    if (!(ss > 0.0)) {
      throw DegenerateInputError("candidate " + std::to_string(i) +
                                 " has constant Brier scores over VS2 (zero variance)");
    }
    norm[i] = std::sqrt(ss);
  }
  Matrix r(m, m);
  for (int i = 0; i < m; ++i) {
    r(i, i) = 1.0;
    for (int j = i + 1; j < m; ++j) {
      double dot = 0.0;
      for (int k = 0; k < n; ++k) dot += centered[i][k] * centered[j][k];
      const double c = dot / (norm[i] * norm[j]);
      r(i, j) = c;
      r(j, i) = c;
    }
  }
  return r;
}

PluralCorrelation PluralCorrelationCoefficient(const Matrix& r, int i) {
  const int m = r.rows;
  if (r.cols != m) throw ShapeError("correlation matrix must be square");
  if (m < 2) throw DegenerateInputError("plural correlation needs at least two candidates");
  if (i < 0 || i >= m) throw Error("candidate index out of range");

  Eigen::MatrixXd sub(m - 1, m - 1);
  Eigen::VectorXd cross(m - 1);
  for (int a = 0, ra = 0; a < m; ++a) {
    if (a == i) continue;
    cross(ra) = r(a, i);
    for (int b = 0, rb = 0; b < m; ++b) {
      if (b == i) continue;
      sub(ra, rb++) = r(a, b);
    }
    ++ra;
  }

  PluralCorrelation out;
  Eigen::VectorXd x;
  Eigen::LLT<Eigen::MatrixXd> llt(sub);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    x = llt.solve(cross);
    ok = x.allFinite();
  }
  if (!ok) {
    out.ridge_used = true;
    sub.diagonal().array() += kRidge;
    x = sub.partialPivLu().solve(cross);
    if (!x.allFinite()) throw DegenerateInputError("plural correlation solve failed for candidate " + std::to_string(i));
  }
  double rho2 = cross.dot(x);
  if (rho2 < 0.0 || rho2 > 1.0) {
    out.clamped = true;
    rho2 = std::clamp(rho2, 0.0, 1.0);
  }
  out.rho2 = rho2;
  return out;
}

std::string SelectionPolicy::Describe() const {
  std::ostringstream s;
  if (kind == Kind::kTopK) s << "top_k(k=" << k << ")";
  else s << "threshold(theta=" << theta << ")";
  return s.str();
}

SelectionReport SelectMembers(const Matrix& r, const SelectionPolicy& policy) {
  const int m = r.rows;
  SelectionReport rep;
  rep.policy = policy;
  for (int i = 0; i < m; ++i) {
    const PluralCorrelation pc = PluralCorrelationCoefficient(r, i);
    rep.rho2.push_back(pc.rho2);
    rep.clamped.push_back(pc.clamped);
    rep.ridge_used.push_back(pc.ridge_used);
  }
  if (policy.kind == SelectionPolicy::Kind::kTopK) {
    if (policy.k < 1 || policy.k > m) {
      throw ConfigError("ensemble.k", "top_k needs 1 <= k <= " + std::to_string(m));
    }
    std::vector<int> order(static_cast<size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return rep.rho2[static_cast<size_t>(a)] < rep.rho2[static_cast<size_t>(b)]; });
    rep.selected.assign(order.begin(), order.begin() + policy.k);
  } else {
    for (int i = 0; i < m; ++i) {
      if (rep.rho2[static_cast<size_t>(i)] <= policy.theta) rep.selected.push_back(i);
    }
    if (rep.selected.empty()) {
      throw DegenerateInputError("threshold " + std::to_string(policy.theta) +
                                 " selects no candidates; use the top_k policy instead");
    }
  }
  std::sort(rep.selected.begin(), rep.selected.end());
  return rep;
}

std::string SelectionReportToJson(const SelectionReport& rep) {
  json policy = rep.policy.kind == SelectionPolicy::Kind::kTopK
                    ? json{{"kind", "top_k"}, {"k", rep.policy.k}}
                    : json{{"kind", "threshold"}, {"theta", rep.policy.theta}};
  std::vector<int> clamped, ridge;
  for (size_t i = 0; i < rep.rho2.size(); ++i) {
    if (rep.clamped[i]) clamped.push_back(static_cast<int>(i));
    if (rep.ridge_used[i]) ridge.push_back(static_cast<int>(i));
  }
  json j{{"rho2", rep.rho2}, {"policy", policy}, {"selected", rep.selected},
         {"clamped", clamped}, {"ridge", ridge}};
  return j.dump(2) + "\n";
}

SelectionReport SelectionReportFromJson(const std::string& text) {
  try {
    const json j = json::parse(text);
    SelectionReport rep;
    rep.rho2 = j.at("rho2").get<std::vector<double>>();
    rep.selected = j.at("selected").get<std::vector<int>>();
    rep.clamped.assign(rep.rho2.size(), false);
    rep.ridge_used.assign(rep.rho2.size(), false);
    if (j.contains("clamped")) {
      for (int i : j.at("clamped").get<std::vector<int>>()) rep.clamped.at(static_cast<size_t>(i)) = true;
    }
    if (j.contains("ridge")) {
      for (int i : j.at("ridge").get<std::vector<int>>()) rep.ridge_used.at(static_cast<size_t>(i)) = true;
    }
    const json& p = j.at("policy");
    if (p.at("kind") == "top_k") rep.policy = SelectionPolicy::TopK(p.at("k").get<int>());
    else rep.policy = SelectionPolicy::Threshold(p.at("theta").get<double>());
    return rep;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed selection report: ") + e.what());
  }
}

std::string MatrixCsv(const Matrix& m, const std::string& row_prefix) {
  std::ostringstream s;
  s.precision(12);
  s << "row";
  for (int c = 0; c < m.cols; ++c) s << ",c" << c;
  s << '\n';
  for (int r = 0; r < m.rows; ++r) {
    s << row_prefix << r;
    for (int c = 0; c < m.cols; ++c) s << ',' << m(r, c);
    s << '\n';
  }
  return s.str();
}

}  // namespace msunet::ensemble
