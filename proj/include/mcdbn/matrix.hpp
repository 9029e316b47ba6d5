#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "mcdbn/errors.hpp"

namespace mcdbn {

// The universal tensor of the pipeline: dense, row-major, double precision.
// Row-major storage is load-bearing: golden sampling files, checkpoint bytes
// and the documented RNG draw order all assume it.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

// Throws ShapeError naming both shapes unless a is rows x cols.
inline void require_shape(const Mat& a, Eigen::Index rows, Eigen::Index cols,
                          const char* what) {
  if (a.rows() != rows || a.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + shape_str(rows, cols) +
                     ", got " + shape_str(a));
  }
}

inline void require_same_shape(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shapes " + shape_str(a) + " and " +
                     shape_str(b) + " differ");
  }
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

inline void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite entry in " + shape_str(m) +
                       " matrix");
  }
}

// (r x k) * (k x c) -> (r x c); mismatch names both shapes.
inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions of " + shape_str(a) + " and " +
                     shape_str(b) + " do not match");
  }
  return a * b;
}

}  // namespace mcdbn
