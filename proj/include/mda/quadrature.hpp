#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace mda::quadrature {

/// Integrand writing `dim` values for abscissa x into `out`.
using VectorIntegrand = std::function<void(double x, std::span<double> out)>;

struct Options {
  double abs_tol = 1e-13;
  double rel_tol = 1e-11;
  std::size_t max_intervals = 20000;
  /// Map every segment through u = a + (b - a)(1 - cos(pi t))/2 so that
  /// square-root endpoint behaviour (kz -> 0 at u = n) becomes smooth.
  bool cosine_map = true;
};

struct Result {
  std::vector<double> value;
  double error = 0.0;  // max-norm error estimate
  std::size_t intervals = 0;
  bool converged = true;
};

/// Adaptive 7/15-point Gauss-Kronrod over [breakpoints.front(), breakpoints.back()],
/// never evaluating the integrand at a breakpoint. Breakpoints must be sorted.
Result integrate(const VectorIntegrand& f, std::size_t dim, std::span<const double> breakpoints,
                 const Options& options = {});

/// Convenience for scalar integrands on [a, b].
double integrate_scalar(const std::function<double(double)>& f, double a, double b, const Options& options = {});

}  // namespace mda::quadrature
