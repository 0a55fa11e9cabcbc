#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace treebridge {

// Dense row-major matrix of doubles. Deliberately minimal: the hot paths in
// kernels.hpp operate on raw row pointers.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  double* data() { return a.data(); }
  const double* data() const { return a.data(); }
  size_t size() const { return a.size(); }

  void fill(double v) { std::fill(a.begin(), a.end(), v); }
  bool all_finite() const;
};

inline bool operator==(const Mat& x, const Mat& y) {
  return x.rows == y.rows && x.cols == y.cols && x.a == y.a;
}

}  // namespace treebridge
