#include "msunet/stats/knn.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <string>

#include "msunet/error.h"

namespace msunet::stats {
namespace {

constexpr size_t kLeafSize = 16;

void RequireEnough(size_t reference, int k, bool exclude_self) {
  if (k < 1) throw Error("k must be >= 1");
  const size_t need = static_cast<size_t>(k) + (exclude_self ? 1 : 0);
  if (reference < need) {
    throw DegenerateInputError("k-NN needs at least " + std::to_string(need) +
                               " reference points, got " + std::to_string(reference));
  }
}

// k-th smallest of |x - ref[j]| scanning outward from the split index
// `right` (first element >= x); position `self` is skipped.
double KthFromSplit(std::span<const double> ref, double x, size_t right, int k, size_t self) {
  ptrdiff_t l = static_cast<ptrdiff_t>(right) - 1;
  size_t r = right;
  const ptrdiff_t skip = self == SIZE_MAX ? -1 : static_cast<ptrdiff_t>(self);
  double dist = 0.0;
  for (int taken = 0; taken < k;) {
    if (l == skip) --l;
    if (static_cast<ptrdiff_t>(r) == skip) ++r;
    const bool has_l = l >= 0;
    const bool has_r = r < ref.size();
    if (!has_l && !has_r) break;
    const double dl = has_l ? x - ref[static_cast<size_t>(l)] : INFINITY;
    const double dr = has_r ? ref[r] - x : INFINITY;
    if (dl <= dr) {
      dist = dl;
      --l;
    } else {
      dist = dr;
      ++r;
    }
    ++taken;
  }
  return dist;
}

}  // namespace

std::vector<double> KnnDistancesSorted1d(std::span<const double> query,
                                         std::span<const double> reference, int k,
                                         bool exclude_self) {
  RequireEnough(reference.size(), k, exclude_self);
  std::vector<double> out(query.size());
  if (exclude_self) {
    for (size_t i = 0; i < query.size(); ++i) out[i] = KthFromSplit(reference, query[i], i, k, i);
    return out;
  }
  size_t j = 0;
  for (size_t i = 0; i < query.size(); ++i) {
    while (j < reference.size() && reference[j] < query[i]) ++j;
    out[i] = KthFromSplit(reference, query[i], j, k, SIZE_MAX);
  }
  return out;
}

std::vector<double> KnnDistances1d(std::span<const double> query, std::span<const double> reference,
                                   int k, bool exclude_self) {
  RequireEnough(reference.size(), k, exclude_self);
  if (exclude_self && query.size() != reference.size()) {
    throw Error("exclude_self requires query and reference to be the same set");
  }
  std::vector<size_t> qorder(query.size());
  std::iota(qorder.begin(), qorder.end(), size_t{0});
  std::stable_sort(qorder.begin(), qorder.end(), [&](size_t a, size_t b) { return query[a] < query[b]; });
  std::vector<double> qs(query.size());
  for (size_t i = 0; i < qorder.size(); ++i) qs[i] = query[qorder[i]];
  std::vector<double> rs;
  if (exclude_self) {
    rs = qs;
  } else {
    rs.assign(reference.begin(), reference.end());
    std::sort(rs.begin(), rs.end());
  }
  const std::vector<double> sorted = KnnDistancesSorted1d(qs, rs, k, exclude_self);
  std::vector<double> out(query.size());
  for (size_t i = 0; i < qorder.size(); ++i) out[qorder[i]] = sorted[i];
  return out;
}

KdTree::KdTree(const PointSet& points) : points_(points), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), size_t{0});
  if (!order_.empty()) Build(0, order_.size(), 0);
}

int KdTree::Build(size_t begin, size_t end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  nodes_[static_cast<size_t>(id)].begin = begin;
  nodes_[static_cast<size_t>(id)].end = end;
  if (end - begin <= kLeafSize) return id;
  // Split along the widest axis.
  int axis = 0;
  double widest = -1.0;
  for (int a = 0; a < points_.dim; ++a) {
    double lo = INFINITY, hi = -INFINITY;
    for (size_t i = begin; i < end; ++i) {
      const double v = points_.point(order_[i])[a];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > widest) {
      widest = hi - lo;
      axis = a;
    }
  }
  const size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<ptrdiff_t>(begin), order_.begin() + static_cast<ptrdiff_t>(mid),
                   order_.begin() + static_cast<ptrdiff_t>(end), [&](size_t a, size_t b) {
                     return points_.point(a)[axis] < points_.point(b)[axis];
                   });
  const double split = points_.point(order_[mid])[axis];
  const int left = Build(begin, mid, depth + 1);
  const int right = Build(mid, end, depth + 1);
  Node& n = nodes_[static_cast<size_t>(id)];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

double KdTree::KthDistance(const double* q, int k, size_t skip) const {
  // Max-heap of the k best squared distances so far.
  std::priority_queue<double> best;
  auto bound = [&] { return static_cast<int>(best.size()) < k ? INFINITY : best.top(); };
  auto visit = [&](auto&& self, int id) -> void {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.axis < 0) {
      for (size_t i = n.begin; i < n.end; ++i) {
        const size_t p = order_[i];
        if (p == skip) continue;
        double d2 = 0.0;
        const double* x = points_.point(p);
        for (int a = 0; a < points_.dim; ++a) {
          const double d = x[a] - q[a];
          d2 += d * d;
        }
        if (static_cast<int>(best.size()) < k) {
          best.push(d2);
        } else if (d2 < best.top()) {
          best.pop();
          best.push(d2);
        }
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    self(self, near);
    if (diff * diff <= bound()) self(self, far);
  };
  visit(visit, 0);
  return std::sqrt(best.top());
}

std::vector<double> KnnDistances(const PointSet& query, const PointSet& reference, int k,
                                 bool exclude_self) {
  if (query.dim != reference.dim) throw ShapeError("k-NN query and reference dimensions differ");
  RequireEnough(reference.size(), k, exclude_self);
  if (exclude_self && query.size() != reference.size()) {
    throw Error("exclude_self requires query and reference to be the same set");
  }
  if (query.dim == 1) return KnnDistances1d(query.coords, reference.coords, k, exclude_self);
  KdTree tree(reference);
  std::vector<double> out(query.size());
  for (size_t i = 0; i < query.size(); ++i) {
    out[i] = tree.KthDistance(query.point(i), k, exclude_self ? i : SIZE_MAX);
  }
  return out;
}

}  // namespace msunet::stats
