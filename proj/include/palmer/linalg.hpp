#pragma once

#include <Eigen/Dense>

namespace palmer {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Induced infinity norm (max absolute row sum). Used for every matrix bound
// in the toolkit so estimates compose with the vector sup norm.
inline double inf_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

inline double inf_norm(const Vec& v) {
  if (v.size() == 0) return 0.0;
  return v.lpNorm<Eigen::Infinity>();
}

// Column-major flattening of square matrices into ODE state vectors.
inline void vec_into(const Mat& m, Eigen::Ref<Vec> out) {
  Eigen::Map<const Vec> flat(m.data(), m.size());
  out = flat;
}

inline Mat unvec(const Eigen::Ref<const Vec>& v, int rows, int cols) {
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

}  // namespace palmer
