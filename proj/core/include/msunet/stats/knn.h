#ifndef MSUNET_STATS_KNN_H_
#define MSUNET_STATS_KNN_H_

#include <span>
#include <vector>

namespace msunet::stats {

// n points of dimension `dim`, row-major.
struct PointSet {
  int dim = 1;
  std::vector<double> coords;

  PointSet() = default;
  PointSet(int d, std::vector<double> c) : dim(d), coords(std::move(c)) {}
  size_t size() const { return dim > 0 ? coords.size() / static_cast<size_t>(dim) : 0; }
  const double* point(size_t i) const { return coords.data() + i * dim; }
};

// Exact Euclidean distance from every query point to its k-th nearest
// reference point. With exclude_self, query and reference must be the same
// set and point i does not count as its own neighbour. d = 1 uses sorting;
// d > 1 uses a kd-tree. Throws DegenerateInputError when the reference set
// has fewer than k (+1 with exclude_self) points.
std::vector<double> KnnDistances(const PointSet& query, const PointSet& reference, int k,
                                 bool exclude_self);

std::vector<double> KnnDistances1d(std::span<const double> query, std::span<const double> reference,
                                   int k, bool exclude_self);

// Inputs already sorted ascending; output is in query order. Used by the
// resampling loops, which keep their pools sorted.
std::vector<double> KnnDistancesSorted1d(std::span<const double> query,
                                         std::span<const double> reference, int k,
                                         bool exclude_self);

// kd-tree over a fixed reference set (leaf buckets, median splits).
class KdTree {
 public:
  explicit KdTree(const PointSet& points);
  // k-th nearest distance to `q`; `skip` is a reference index to ignore
  // (or SIZE_MAX).
  double KthDistance(const double* q, int k, size_t skip) const;

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    size_t begin = 0, end = 0;
  };
  int Build(size_t begin, size_t end, int depth);

  const PointSet& points_;
  std::vector<size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace msunet::stats

#endif  // MSUNET_STATS_KNN_H_
