#ifndef MSUNET_ENSEMBLE_SELECTION_H_
#define MSUNET_ENSEMBLE_SELECTION_H_

#include <span>
#include <string>
#include <vector>

#include "msunet/nn/segnet.h"
#include "msunet/tensor.h"

namespace msunet::ensemble {

// Dense row-major matrix of doubles.
struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}
  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

// Per-image Brier score inside the ROI: e(i, j) is the mean over ROI
// pixels of (prob_i(x_j) - label(x_j))^2. probs[i][j] is model i's
// probability map for image j.
Matrix BrierMatrix(const std::vector<std::vector<Tensor>>& probs, std::span<const Tensor> labels,
                   const Tensor& roi);

// Deterministic single passes of every model over every image, then
// BrierMatrix. Parallel over models.
Matrix BrierMatrixFromModels(std::vector<nn::MiniSegNet>& models, std::span<const Tensor> inputs,
                             std::span<const Tensor> labels, const Tensor& roi, int threads = 1);

// Pearson correlation between rows of E (one row per candidate). Throws
// DegenerateInputError naming the candidate whose row has zero variance.
Matrix CorrelationMatrix(const Matrix& e);

struct PluralCorrelation {
  double rho2 = 0.0;
  bool clamped = false;     // raw value fell outside [0, 1]
  bool ridge_used = false;  // plain solve failed; diagonal ridge added
};

inline constexpr double kRidge = 1e-8;

// rho_i^2 = r_i^T R_{-i}^{-1} r_i, where R_{-i} removes row and column i
// and r_i is column i without its diagonal entry.
PluralCorrelation PluralCorrelationCoefficient(const Matrix& r, int i);

struct SelectionPolicy {
  enum class Kind { kTopK, kThreshold };
  Kind kind = Kind::kTopK;
  int k = 3;
  double theta = 0.5;

  static SelectionPolicy TopK(int k) { return {Kind::kTopK, k, 0.0}; }
  static SelectionPolicy Threshold(double theta) { return {Kind::kThreshold, 0, theta}; }
  std::string Describe() const;
};

struct SelectionReport {
  std::vector<double> rho2;
  std::vector<bool> clamped;
  std::vector<bool> ridge_used;
  SelectionPolicy policy;
  std::vector<int> selected;  // ascending candidate index
};

// Single pass over the full R. Threshold mode keeps every i with
// rho_i^2 <= theta; top-k keeps the k smallest (ties to lower index).
SelectionReport SelectMembers(const Matrix& r, const SelectionPolicy& policy);

std::string SelectionReportToJson(const SelectionReport& report);
SelectionReport SelectionReportFromJson(const std::string& json);
std::string MatrixCsv(const Matrix& m, const std::string& row_prefix);

}  // namespace msunet::ensemble

#endif  // MSUNET_ENSEMBLE_SELECTION_H_
