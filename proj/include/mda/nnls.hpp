#pragma once

#include <Eigen/Dense>

namespace mda {

struct NnlsResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// min ||A x - b|| subject to x >= 0 (Lawson-Hanson active set). Columns are
/// rescaled to unit norm internally; zero columns get x = 0.
NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations = 0);

/// Smallest singular value of A after scaling every column to unit norm.
double scaled_min_singular_value(const Eigen::MatrixXd& a);

}  // namespace mda
