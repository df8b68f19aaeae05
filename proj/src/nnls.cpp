#include "mda/nnls.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace mda {

namespace {

Eigen::VectorXd column_norms(const Eigen::MatrixXd& a) {
  Eigen::VectorXd n(a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) n(j) = a.col(j).norm();
  return n;
}

}  // namespace

NnlsResult nnls(const Eigen::MatrixXd& a_in, const Eigen::VectorXd& b, int max_iterations) {
  const Eigen::Index n = a_in.cols();
  const Eigen::VectorXd norms = column_norms(a_in);
  Eigen::MatrixXd a = a_in;
  for (Eigen::Index j = 0; j < n; ++j)
    if (norms(j) > 0.0) a.col(j) /= norms(j);
  if (max_iterations <= 0) max_iterations = static_cast<int>(30 * n + 30);

  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, b.norm()) *
                     static_cast<double>(std::max<Eigen::Index>(n, a.rows()));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  NnlsResult out;

  auto solve_passive = [&]() {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
    const Eigen::VectorXd s_sub = sub.colPivHouseholderQr().solve(b);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) s(idx[k]) = s_sub(static_cast<Eigen::Index>(k));
    return s;
  };

  Eigen::VectorXd w = a.transpose() * (b - a * x);
  while (out.iterations < max_iterations) {
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && norms(j) > 0.0 && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;
    ++out.iterations;

    Eigen::VectorXd s = solve_passive();
    while (true) {
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) feasible = false;
      if (feasible) break;
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) alpha = std::min(alpha, x(j) / (x(j) - s(j)));
      }
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
      s = solve_passive();
      if (++out.iterations >= max_iterations) break;
    }
    x = s;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[static_cast<std::size_t>(j)]) x(j) = 0.0;
    w = a.transpose() * (b - a * x);
  }
  out.converged = out.iterations < max_iterations;
  out.residual_norm = (a * x - b).norm();
  for (Eigen::Index j = 0; j < n; ++j) x(j) = norms(j) > 0.0 ? std::max(0.0, x(j)) / norms(j) : 0.0;
  out.x = x;
  return out;
}

double scaled_min_singular_value(const Eigen::MatrixXd& a_in) {
  Eigen::MatrixXd a = a_in;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double n = a.col(j).norm();
    if (n == 0.0) return 0.0;
    a.col(j) /= n;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues().minCoeff();
}

}  // namespace mda
