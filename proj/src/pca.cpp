#include "eqgraph/pca.hpp"

#include "eqgraph/error.hpp"

#include <Eigen/Eigenvalues>

#include <string>

namespace eqgraph {

PcaBasis pca_fit(const Eigen::MatrixXd& samples, int k) {
  const auto n = samples.rows();
  const auto d = samples.cols();
  if (k < 1) throw InvalidArgument("pca_fit: k must be at least 1");
  if (k > n)
    throw InvalidArgument("pca_fit: k = " + std::to_string(k) + " exceeds sample count " +
                          std::to_string(n));
  if (k > d)
    throw InvalidArgument("pca_fit: k = " + std::to_string(k) + " exceeds dimension " +
                          std::to_string(d));

  PcaBasis basis;
  basis.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - basis.mean.transpose();
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  const Eigen::MatrixXd covariance = (centered.transpose() * centered) / denom;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
  if (solver.info() != Eigen::Success) throw Error("pca_fit: eigendecomposition failed");

  basis.components.resize(k, d);
  for (int r = 0; r < k; ++r) {
    Vector row = solver.eigenvectors().col(d - 1 - r);  // eigenvalues ascend
    Eigen::Index arg = 0;
    row.cwiseAbs().maxCoeff(&arg);
    if (row[arg] < 0) row = -row;
    basis.components.row(r) = row.transpose();
  }
  return basis;
}

Vector pca_project(const Vector& vector, const PcaBasis& basis) {
  if (vector.size() != basis.mean.size())
    throw DimensionMismatch("pca_project: dimension " + std::to_string(vector.size()) +
                            " vs basis " + std::to_string(basis.mean.size()));
  return basis.components * (vector - basis.mean);
}

Vector pca_reconstruct(const Vector& coefficients, const PcaBasis& basis) {
  if (coefficients.size() != basis.components.rows())
    throw DimensionMismatch("pca_reconstruct: coefficient count mismatch");
  return basis.mean + basis.components.transpose() * coefficients;
}

}  // namespace eqgraph
