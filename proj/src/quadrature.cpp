#include "mda/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <queue>

#include "mda/error.hpp"

namespace mda::quadrature {

namespace {

// Kronrod nodes on [-1, 1]; odd entries are the embedded Gauss nodes.
constexpr std::array<double, 8> kNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b;                 // bounds in the integration variable
  double map_a, map_b;         // physical segment the variable is mapped onto
  std::vector<double> value;
  double error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

class Evaluator {
 public:
  Evaluator(const VectorIntegrand& f, std::size_t dim, bool cosine_map)
      : f_(f), dim_(dim), cosine_map_(cosine_map), scratch_(dim) {}

  // Integral over t in [a, b] of g(t), where g includes the Jacobian of the map
  // t -> x on the physical segment [xa, xb].
  void rule(Segment& seg) {
    const double center = 0.5 * (seg.a + seg.b);
    const double half = 0.5 * (seg.b - seg.a);
    std::vector<double> kronrod(dim_, 0.0), gauss(dim_, 0.0);
    auto accumulate = [&](double t, double wk, double wg) {
      eval(t, seg.map_a, seg.map_b);
      for (std::size_t d = 0; d < dim_; ++d) {
        kronrod[d] += wk * scratch_[d];
        gauss[d] += wg * scratch_[d];
      }
    };
    accumulate(center, kKronrodWeights[7], kGaussWeights[3]);
    for (std::size_t j = 0; j < 7; ++j) {
      const double wg = (j % 2 == 1) ? kGaussWeights[j / 2] : 0.0;
      accumulate(center - half * kNodes[j], kKronrodWeights[j], wg);
      accumulate(center + half * kNodes[j], kKronrodWeights[j], wg);
    }
    seg.value.assign(dim_, 0.0);
    seg.error = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      seg.value[d] = half * kronrod[d];
      seg.error = std::max(seg.error, std::abs(half * (kronrod[d] - gauss[d])));
    }
  }

 private:
  void eval(double t, double xa, double xb) {
    double x = t;
    double jac = 1.0;
    if (cosine_map_) {
      x = xa + (xb - xa) * 0.5 * (1.0 - std::cos(std::numbers::pi * t));
      jac = (xb - xa) * 0.5 * std::numbers::pi * std::sin(std::numbers::pi * t);
    }
    f_(x, scratch_);
    for (auto& v : scratch_) v *= jac;
  }

  const VectorIntegrand& f_;
  std::size_t dim_;
  bool cosine_map_;
  std::vector<double> scratch_;
};

}  // namespace

Result integrate(const VectorIntegrand& f, std::size_t dim, std::span<const double> breakpoints,
                 const Options& options) {
  if (breakpoints.size() < 2) throw DomainError("integrate: need at least two breakpoints");
  if (!std::is_sorted(breakpoints.begin(), breakpoints.end())) throw DomainError("integrate: breakpoints unsorted");

  Evaluator evaluator(f, dim, options.cosine_map);
  std::priority_queue<Segment> queue;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    const double xa = breakpoints[i], xb = breakpoints[i + 1];
    if (!(xb > xa)) continue;
    Segment seg{options.cosine_map ? 0.0 : xa, options.cosine_map ? 1.0 : xb, xa, xb, {}, 0.0};
    evaluator.rule(seg);
    queue.push(std::move(seg));
  }

  Result result;
  result.value.assign(dim, 0.0);
  if (queue.empty()) return result;

  auto totals = [&](std::vector<double>& value, double& error) {
    auto copy = queue;
    value.assign(dim, 0.0);
    error = 0.0;
    while (!copy.empty()) {
      const auto& s = copy.top();
      for (std::size_t d = 0; d < dim; ++d) value[d] += s.value[d];
      error += s.error;
      copy.pop();
    }
  };

  std::vector<double> value;
  double error = 0.0;
  totals(value, error);
  while (true) {
    double scale = 0.0;
    for (double v : value) scale = std::max(scale, std::abs(v));
    const double target = std::max(options.abs_tol, options.rel_tol * scale);
    if (error <= target) break;
    if (queue.size() >= options.max_intervals) {
      result.converged = false;
      break;
    }
    Segment worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Segment left{worst.a, mid, worst.map_a, worst.map_b, {}, 0.0};
    Segment right{mid, worst.b, worst.map_a, worst.map_b, {}, 0.0};
    evaluator.rule(left);
    evaluator.rule(right);
    for (std::size_t d = 0; d < dim; ++d) value[d] += left.value[d] + right.value[d] - worst.value[d];
    error += left.error + right.error - worst.error;
    queue.push(std::move(left));
    queue.push(std::move(right));
    // Re-sum periodically to avoid drift from incremental updates.
    if (queue.size() % 512 == 0) totals(value, error);
  }
  totals(value, error);
  result.value = std::move(value);
  result.error = error;
  result.intervals = queue.size();
  return result;
}

double integrate_scalar(const std::function<double(double)>& f, double a, double b, const Options& options) {
  const std::array<double, 2> bp{a, b};
  auto r = integrate([&](double x, std::span<double> out) { out[0] = f(x); }, 1, bp, options);
  return r.value[0];
}

}  // namespace mda::quadrature
