#pragma once

#include "eqgraph/types.hpp"

#include <Eigen/Core>

#include <vector>

namespace eqgraph {

/// Orthonormal principal directions (rows of `components`) around `mean`.
struct PcaBasis {
  Vector mean;
  Eigen::MatrixXd components;  // k x d_raw

  int k() const { return static_cast<int>(components.rows()); }
  int raw_dimension() const { return static_cast<int>(mean.size()); }
};

/// Top-k principal directions of the sample covariance, by descending
/// eigenvalue. Each row's largest-magnitude entry is made positive.
/// `samples` holds one sample per row.
PcaBasis pca_fit(const Eigen::MatrixXd& samples, int k = 20);

/// components * (vector - mean).
Vector pca_project(const Vector& vector, const PcaBasis& basis);

/// Inverse map mean + components^T * coefficients (exact when k = d_raw).
Vector pca_reconstruct(const Vector& coefficients, const PcaBasis& basis);

}  // namespace eqgraph
