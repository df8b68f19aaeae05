#include "mda/dipole_radiation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <span>

#include <json.hpp>

#include "mda/error.hpp"
#include "mda/parallel.hpp"
#include "mda/quadrature.hpp"

namespace mda {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDipoleNorm = 3.0 / (8.0 * kPi);  // free-space dipole: dP/dOmega = kDipoleNorm |p_perp|^2
const cplx kI{0.0, 1.0};

// Plane-wave classes of the source. Axial dipoles radiate p only; the x and y
// dipoles share s and p spectra that differ only by their azimuthal factors.
enum Class { kAxialP = 0, kInplaneS = 1, kInplaneP = 2 };
constexpr std::array<double, 3> kAzimuthalIntegral{2.0 * kPi, kPi, kPi};

struct ClassResponse {
  cplx a_up, a_down;  // direct source amplitudes (tangential E for s, tangential H for p)
  cplx up, down;      // total up/down-going amplitudes at the source plane
  cplx t_down, t_up;  // amplitudes in the outer half-spaces
};

struct Response {
  double u;
  cplx w_host;
  std::array<ClassResponse, 3> cls;
};

class SourceModel {
 public:
  SourceModel(const LayerStack& stack, const DipoleEmitter& emitter)
      : stack_(stack),
        host_(emitter.host_layer),
        k0_(2.0 * kPi / emitter.wavelength_nm),
        host_eps_(stack.layer(emitter.host_layer).material.permittivity()),
        n_host_(stack.layer(emitter.host_layer).material.n),
        above_(stack.layer(emitter.host_layer).thickness() - emitter.z_offset_nm),
        below_(emitter.z_offset_nm) {}

  double n_host() const { return n_host_; }
  double k0() const { return k0_; }

  Response at(double u) const {
    cplx w = normalized_kz(host_eps_, u);
    // kz -> 0 is a removable singularity of the normalised spectrum; step off it.
    if (std::abs(w) < 1e-9) {
      u = u > 1e-6 ? u * (1.0 - 1e-8) : u + 1e-8;
      w = normalized_kz(host_eps_, u);
    }
    Response res{u, w, {}};
    const cplx kz = k0_ * w;
    const cplx e_up = std::exp(kI * kz * above_);
    const cplx e_down = std::exp(kI * kz * below_);

    for (const Polarization pol : {Polarization::s, Polarization::p}) {
      const auto channel = PlaneWaveChannel{k0_, u, pol};
      const Coefficients lower = substack_coefficients(stack_, channel, host_ - 1, Direction::down);
      const Coefficients upper = substack_coefficients(stack_, channel, host_, Direction::up);
      const cplx round_trip = 1.0 - upper.r * lower.r * e_up * e_up * e_down * e_down;
      auto fill = [&](Class k, cplx a_up, cplx a_down) {
        ClassResponse& c = res.cls[k];
        c.a_up = a_up;
        c.a_down = a_down;
        c.up = (a_up + lower.r * e_down * e_down * a_down) / round_trip;
        c.down = (a_down + upper.r * e_up * e_up * a_up) / round_trip;
        c.t_down = lower.t * c.down * e_down;
        c.t_up = upper.t * c.up * e_up;
        if (!std::isfinite(std::abs(c.up)) || !std::isfinite(std::abs(c.down)))
          throw SingularChannelError("non-finite source response at u = " + std::to_string(u) +
                                     " (lossless guided-mode pole on the real axis?)");
      };
      if (pol == Polarization::s) {
        fill(kInplaneS, 1.0, 1.0);
      } else {
        fill(kAxialP, -u, -u);
        fill(kInplaneP, w, -w);
      }
    }
    return res;
  }

  // Dissipated power per du (azimuth integrated) relative to the unbounded host.
  double dissipated_density(const Response& r, Class k) const {
    const ClassResponse& c = r.cls[k];
    const double g = (k == kInplaneS) ? 1.0 : 1.0 / (n_host_ * n_host_);
    const cplx work = g * (c.a_up * (2.0 * c.up - c.a_up) + c.a_down * (2.0 * c.down - c.a_down)) / r.w_host;
    return kAzimuthalIntegral[k] * kDipoleNorm / n_host_ * r.u * work.real();
  }

  // Far-field flux per du into a lossless outer half-space.
  double flux_density(const Response& r, Class k, HalfSpace h) const {
    const OpticalMaterial& m = h == HalfSpace::down ? stack_.bottom() : stack_.top();
    if (!m.lossless() || r.u >= m.n) return 0.0;
    const Polarization pol = k == kInplaneS ? Polarization::s : Polarization::p;
    const cplx t = h == HalfSpace::down ? r.cls[k].t_down : r.cls[k].t_up;
    const double q = admittance(m, r.u, pol).real();
    return kAzimuthalIntegral[k] * kDipoleNorm / (n_host_ * std::norm(r.w_host)) * r.u * std::norm(t) * q;
  }

  // Far-field amplitude per unit free-space host power, without azimuthal factor.
  cplx farfield(const Response& r, Class k, HalfSpace h) const {
    const OpticalMaterial& m = h == HalfSpace::down ? stack_.bottom() : stack_.top();
    if (!m.lossless()) return 0.0;
    const double n_out = m.n;
    const double w_out = std::sqrt(std::max(0.0, n_out * n_out - r.u * r.u));
    const cplx t = h == HalfSpace::down ? r.cls[k].t_down : r.cls[k].t_up;
    const cplx field = k == kInplaneS ? t : t / n_out;  // p amplitudes carry H = n E
    return std::sqrt(kDipoleNorm / n_host_) / r.w_host * field * std::sqrt(n_out) * w_out;
  }

 private:
  const LayerStack& stack_;
  std::size_t host_;
  double k0_;
  cplx host_eps_;
  double n_host_;
  double above_;
  double below_;
};

// Integrated spectrum of both component families.
struct SpectrumIntegrals {
  // [0] axial, [1] in-plane (x or y)
  std::array<double, 2> total{}, host{}, near{}, down{}, collected{}, up{};
  std::array<double, 2> tail{};
  double u_max = 0.0;
  bool converged = true;
};

enum Slot {
  kTotalZ, kTotalIp, kDownZ, kDownIp, kCollZ, kCollIp, kUpZ, kUpIp, kHostZ, kHostIp, kNearZ, kNearIp, kSlotCount
};

SpectrumIntegrals integrate_spectrum(const LayerStack& stack, const DipoleEmitter& emitter, double na,
                                     const SpectrumOptions& options) {
  const SourceModel model(stack, emitter);
  double max_index = 0.0;
  for (const auto& l : stack.layers()) max_index = std::max(max_index, l.material.n);
  const double u_max = options.u_max.value_or(1.5 * max_index);
  const double n_host = model.n_host();
  const double cutoff = stack.radiative_cutoff();
  if (!(u_max > std::max(cutoff, n_host))) throw DomainError("u_max must exceed every propagating index");

  std::vector<double> breaks{0.0, u_max, n_host, cutoff};
  if (na > 0.0) breaks.push_back(na);
  for (const auto& l : stack.layers())
    if (l.material.n < u_max) breaks.push_back(l.material.n);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  auto integrand = [&](double u, std::span<double> out) {
    const Response r = model.at(u);
    const double tz = model.dissipated_density(r, kAxialP);
    const double tip = model.dissipated_density(r, kInplaneS) + model.dissipated_density(r, kInplaneP);
    const double dz = model.flux_density(r, kAxialP, HalfSpace::down);
    const double dip =
        model.flux_density(r, kInplaneS, HalfSpace::down) + model.flux_density(r, kInplaneP, HalfSpace::down);
    const double uz = model.flux_density(r, kAxialP, HalfSpace::up);
    const double uip =
        model.flux_density(r, kInplaneS, HalfSpace::up) + model.flux_density(r, kInplaneP, HalfSpace::up);
    const bool collected = u <= na;
    out[kTotalZ] = tz;
    out[kTotalIp] = tip;
    out[kDownZ] = dz;
    out[kDownIp] = dip;
    out[kCollZ] = collected ? dz : 0.0;
    out[kCollIp] = collected ? dip : 0.0;
    out[kUpZ] = uz;
    out[kUpIp] = uip;
    out[kHostZ] = u <= n_host ? tz : 0.0;
    out[kHostIp] = u <= n_host ? tip : 0.0;
    out[kNearZ] = u > cutoff ? tz : 0.0;
    out[kNearIp] = u > cutoff ? tip : 0.0;
  };

  quadrature::Options qopt;
  qopt.rel_tol = options.rel_tol;
  const auto result = quadrature::integrate(integrand, kSlotCount, breaks, qopt);
  const auto& v = result.value;

  SpectrumIntegrals s;
  s.u_max = u_max;
  s.converged = result.converged;
  for (int f = 0; f < 2; ++f) {
    s.total[f] = v[kTotalZ + f];
    s.down[f] = v[kDownZ + f];
    s.collected[f] = v[kCollZ + f];
    s.up[f] = v[kUpZ + f];
    s.host[f] = v[kHostZ + f];
    s.near[f] = v[kNearZ + f];
  }

  // Exponential-tail extrapolation of the dissipated-power integrand beyond u_max.
  std::array<double, kSlotCount> end{}, before{};
  integrand(u_max, end);
  integrand(0.95 * u_max, before);
  for (int f = 0; f < 2; ++f) {
    const double f1 = std::abs(end[kTotalZ + f]);
    const double f0 = std::abs(before[kTotalZ + f]);
    double tail = 0.0;
    if (f1 > 0.0) {
      const double rate = (f0 > f1) ? std::log(f0 / f1) / (0.05 * u_max) : 0.0;
      tail = rate > 0.0 ? f1 / rate : f1 * u_max;
    }
    s.tail[f] = std::abs(s.total[f]) > 0.0 ? tail / std::abs(s.total[f]) : 0.0;
  }
  return s;
}

int family(DipoleComponent c) { return c == DipoleComponent::z ? 0 : 1; }

EmittedPower emitted_from(const SpectrumIntegrals& s, int f, const SpectrumOptions& options) {
  EmittedPower p;
  p.total = s.total[f];
  p.host_propagating = s.host[f];
  p.near_field = s.near[f];
  p.supercritical = p.total - p.host_propagating - p.near_field;
  p.u_max = s.u_max;
  p.tail_estimate = s.tail[f];
  p.accuracy_warning = !s.converged || s.tail[f] > options.tail_tol;
  return p;
}

RadiationBudget budget_from(const SpectrumIntegrals& s, int f) {
  const double total = s.total[f];
  RadiationBudget b;
  b.collected_na = s.collected[f] / total;
  b.substrate_beyond_na = (s.down[f] - s.collected[f]) / total;
  b.leaked_top = s.up[f] / total;
  b.absorbed = 1.0 - (s.down[f] + s.up[f]) / total;
  if (b.absorbed < 0.0 && b.absorbed > -1e-9) b.absorbed = 0.0;
  return b;
}

void check_na(const LayerStack& stack, double na) {
  if (!(na > 0.0) || na > stack.bottom().n)
    throw InvalidApertureError("numerical aperture " + std::to_string(na) + " exceeds the collection index " +
                               std::to_string(stack.bottom().n));
}

}  // namespace

const char* to_string(DipoleComponent c) {
  switch (c) {
    case DipoleComponent::z: return "z";
    case DipoleComponent::x: return "x";
    case DipoleComponent::y: return "y";
  }
  return "?";
}

const char* to_string(HalfSpace h) { return h == HalfSpace::down ? "down" : "up"; }
const char* to_string(Polarization p) { return p == Polarization::s ? "s" : "p"; }

double DipoleWeights::operator[](DipoleComponent c) const {
  switch (c) {
    case DipoleComponent::z: return axial;
    case DipoleComponent::x: return x;
    case DipoleComponent::y: return y;
  }
  return 0.0;
}

void DipoleWeights::validate() const {
  if (!(axial >= 0.0 && x >= 0.0 && y >= 0.0)) throw DomainError("dipole weights must be non-negative");
  if (std::abs(axial + x + y - 1.0) > 1e-9) throw DomainError("dipole weights must sum to 1");
}

void DipoleEmitter::validate(const LayerStack& stack) const {
  weights.validate();
  if (!(wavelength_nm > 0.0)) throw DomainError("emitter wavelength must be positive");
  if (host_layer == 0 || host_layer + 1 >= stack.size())
    throw DomainError("the emitter must sit in a finite layer of the stack");
  const Layer& host = stack.layer(host_layer);
  if (!host.material.lossless()) throw DomainError("the emitter host layer must be lossless");
  if (!(z_offset_nm >= 0.0 && z_offset_nm <= host.thickness()))
    throw DomainError("emitter z offset lies outside its host layer");
  if (!stack.bottom().lossless()) throw DomainError("the collection half-space must be lossless");
}

DipoleEmitter antenna_emitter(DipoleWeights weights) {
  return DipoleEmitter{1, presets::kEmitterHeightNm, presets::kWavelengthNm, weights};
}

FarField farfield_amplitudes(const LayerStack& stack, const DipoleEmitter& emitter, DipoleComponent component,
                             double theta, double phi, HalfSpace half_space) {
  emitter.validate(stack);
  if (!(theta >= 0.0 && theta < kPi / 2.0))
    throw OutOfDomainError("theta must lie in [0, pi/2) of the target half-space");
  const OpticalMaterial& medium = half_space == HalfSpace::down ? stack.bottom() : stack.top();
  if (!medium.lossless()) return {0.0, 0.0};
  const SourceModel model(stack, emitter);
  const Response r = model.at(medium.n * std::sin(theta));
  switch (component) {
    case DipoleComponent::z: return {0.0, model.farfield(r, kAxialP, half_space)};
    case DipoleComponent::x:
      return {-std::sin(phi) * model.farfield(r, kInplaneS, half_space),
              std::cos(phi) * model.farfield(r, kInplaneP, half_space)};
    case DipoleComponent::y:
      return {std::cos(phi) * model.farfield(r, kInplaneS, half_space),
              std::sin(phi) * model.farfield(r, kInplaneP, half_space)};
  }
  return {};
}

EmittedPower total_emitted_power(const LayerStack& stack, const DipoleEmitter& emitter, DipoleComponent component,
                                 const SpectrumOptions& options) {
  emitter.validate(stack);
  const auto s = integrate_spectrum(stack, emitter, 0.0, options);
  return emitted_from(s, family(component), options);
}

BudgetReport budget_report(const LayerStack& stack, const DipoleEmitter& emitter, double na,
                           const SpectrumOptions& options) {
  emitter.validate(stack);
  check_na(stack, na);
  const auto s = integrate_spectrum(stack, emitter, na, options);
  BudgetReport report;
  report.na = na;
  for (const auto c : kAllComponents) {
    const int f = family(c);
    report.per_component[static_cast<int>(c)] = budget_from(s, f);
    report.emitted[static_cast<int>(c)] = emitted_from(s, f, options);
    report.accuracy_warning = report.accuracy_warning || report.emitted[static_cast<int>(c)].accuracy_warning;
  }
  RadiationBudget& w = report.weighted;
  for (const auto c : kAllComponents) {
    const double weight = emitter.weights[c];
    const RadiationBudget& b = report.component(c);
    w.collected_na += weight * b.collected_na;
    w.substrate_beyond_na += weight * b.substrate_beyond_na;
    w.leaked_top += weight * b.leaked_top;
    w.absorbed += weight * b.absorbed;
  }
  return report;
}

RadiationBudget radiation_budget(const LayerStack& stack, const DipoleEmitter& emitter, double na,
                                 const SpectrumOptions& options) {
  return budget_report(stack, emitter, na, options).weighted;
}

double mirror_gain(const LayerStack& stack_no_mirror, const LayerStack& stack_with_mirror,
                   const DipoleEmitter& emitter, double na, const SpectrumOptions& options) {
  for (std::size_t i = 0; i <= emitter.host_layer; ++i) {
    if (i >= stack_no_mirror.size() || i >= stack_with_mirror.size() ||
        !(stack_no_mirror.layer(i) == stack_with_mirror.layer(i)))
      throw DomainError("mirror_gain: stacks must agree from the collection medium up to the emitter host");
  }
  const double without = radiation_budget(stack_no_mirror, emitter, na, options).collected_na;
  const double with = radiation_budget(stack_with_mirror, emitter, na, options).collected_na;
  return with / without - 1.0;
}

// ---------------------------------------------------------------------------

AngularPattern::AngularPattern(std::size_t theta_samples, std::size_t phi_samples,
                               std::array<double, 2> medium_index, std::array<bool, 2> radiating,
                               std::array<Channel, 2> channels, DipoleWeights weights,
                               std::array<EmittedPower, 3> emitted, double wavelength_nm)
    : theta_count_(theta_samples),
      phi_count_(phi_samples),
      index_(medium_index),
      radiating_(radiating),
      channels_(std::move(channels)),
      weights_(weights),
      emitted_(emitted),
      wavelength_nm_(wavelength_nm) {}

double AngularPattern::theta_step() const { return 0.5 * kPi / static_cast<double>(theta_count_); }
double AngularPattern::phi_step() const { return 2.0 * kPi / static_cast<double>(phi_count_); }
double AngularPattern::theta(std::size_t i) const { return (static_cast<double>(i) + 0.5) * theta_step(); }
double AngularPattern::phi(std::size_t j) const { return (static_cast<double>(j) + 0.5) * phi_step(); }

AngularPattern AngularPattern::with_weights(const DipoleWeights& w) const {
  w.validate();
  AngularPattern copy = *this;
  copy.weights_ = w;
  return copy;
}

FarField AngularPattern::amplitude(HalfSpace h, DipoleComponent c, std::size_t i, double phi_) const {
  const Channel& ch = channels_[idx(h)];
  switch (c) {
    case DipoleComponent::z: return {0.0, ch.axial_p[i]};
    case DipoleComponent::x: return {-std::sin(phi_) * ch.inplane_s[i], std::cos(phi_) * ch.inplane_p[i]};
    case DipoleComponent::y: return {std::cos(phi_) * ch.inplane_s[i], std::sin(phi_) * ch.inplane_p[i]};
  }
  return {};
}

FarField AngularPattern::amplitude_at(HalfSpace h, DipoleComponent c, double theta_, double phi_) const {
  const double pos = theta_ / theta_step() - 0.5;
  if (pos <= 0.0) {
    const FarField a = amplitude(h, c, 0, phi_);
    // The axial field vanishes on axis; in-plane fields extrapolate from the first two samples.
    if (c == DipoleComponent::z) return {0.0, a.p * std::max(0.0, theta_) / theta(0)};
    const FarField b = amplitude(h, c, 1, phi_);
    return {a.s + pos * (b.s - a.s), a.p + pos * (b.p - a.p)};
  }
  const auto last = theta_count_ - 1;
  if (pos >= static_cast<double>(last)) return amplitude(h, c, last, phi_);
  const auto i0 = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i0);
  const FarField a = amplitude(h, c, i0, phi_);
  const FarField b = amplitude(h, c, i0 + 1, phi_);
  return {a.s + frac * (b.s - a.s), a.p + frac * (b.p - a.p)};
}

double AngularPattern::density(HalfSpace h, DipoleComponent c, Polarization pol, std::size_t i,
                               std::size_t j) const {
  const FarField f = amplitude(h, c, i, phi(j));
  return pol == Polarization::s ? std::norm(f.s) : std::norm(f.p);
}

double AngularPattern::weighted_density(HalfSpace h, std::size_t i, std::size_t j) const {
  double total = 0.0;
  for (const auto c : kAllComponents) {
    const double w = weights_[c];
    if (w != 0.0) total += w * amplitude(h, c, i, phi(j)).power();
  }
  return total;
}

double AngularPattern::half_space_power(HalfSpace h, double theta_max) const {
  double total = 0.0;
  for (std::size_t i = 0; i < theta_count_; ++i) {
    if (theta(i) > theta_max) break;
    double ring = 0.0;
    for (std::size_t j = 0; j < phi_count_; ++j) ring += weighted_density(h, i, j);
    total += ring * std::sin(theta(i));
  }
  return total * theta_step() * phi_step();
}

AngularPattern angular_pattern(const LayerStack& stack, const DipoleEmitter& emitter, std::size_t theta_samples,
                               std::size_t phi_samples, const SpectrumOptions& options) {
  emitter.validate(stack);
  if (theta_samples < 8 || phi_samples < 8) throw DomainError("angular_pattern: sample counts must be >= 8");

  const auto spectrum = integrate_spectrum(stack, emitter, 0.0, options);
  std::array<EmittedPower, 3> emitted;
  for (const auto c : kAllComponents) emitted[static_cast<int>(c)] = emitted_from(spectrum, family(c), options);
  const double norm_axial = 1.0 / std::sqrt(spectrum.total[0]);
  const double norm_inplane = 1.0 / std::sqrt(spectrum.total[1]);

  const SourceModel model(stack, emitter);
  const std::array<const OpticalMaterial*, 2> media{&stack.bottom(), &stack.top()};
  std::array<AngularPattern::Channel, 2> channels;
  for (auto& ch : channels) {
    ch.axial_p.assign(theta_samples, 0.0);
    ch.inplane_s.assign(theta_samples, 0.0);
    ch.inplane_p.assign(theta_samples, 0.0);
  }
  const double step = 0.5 * kPi / static_cast<double>(theta_samples);
  parallel_for(theta_samples, [&](std::size_t i) {
    const double theta = (static_cast<double>(i) + 0.5) * step;
    for (int h = 0; h < 2; ++h) {
      if (!media[h]->lossless()) continue;
      const HalfSpace half = h == 0 ? HalfSpace::down : HalfSpace::up;
      const Response r = model.at(media[h]->n * std::sin(theta));
      channels[h].axial_p[i] = norm_axial * model.farfield(r, kAxialP, half);
      channels[h].inplane_s[i] = norm_inplane * model.farfield(r, kInplaneS, half);
      channels[h].inplane_p[i] = norm_inplane * model.farfield(r, kInplaneP, half);
    }
  });

  return AngularPattern(theta_samples, phi_samples, {media[0]->n, media[1]->n},
                        {media[0]->lossless(), media[1]->lossless()}, std::move(channels), emitter.weights, emitted,
                        emitter.wavelength_nm);
}

Profile phi_integrated_profile(const AngularPattern& pattern, HalfSpace half_space,
                               std::optional<DipoleComponent> component) {
  Profile profile(pattern.theta_samples());
  for (std::size_t i = 0; i < pattern.theta_samples(); ++i) {
    double ring = 0.0;
    for (std::size_t j = 0; j < pattern.phi_samples(); ++j) {
      if (component) {
        ring += pattern.amplitude(half_space, *component, i, pattern.phi(j)).power();
      } else {
        ring += pattern.weighted_density(half_space, i, j);
      }
    }
    profile[i] = {pattern.theta(i), ring * std::sin(pattern.theta(i)) * pattern.phi_step()};
  }
  return profile;
}

std::vector<SweepPoint> mirror_distance_sweep(const LayerStack& stack_template, std::size_t gap_layer,
                                              const DipoleEmitter& emitter, const std::vector<double>& distances_nm,
                                              double na, std::size_t theta_samples, std::size_t phi_samples,
                                              const SpectrumOptions& options) {
  for (double d : distances_nm)
    if (!(d > 0.0)) throw DomainError("mirror distances must be positive");
  std::vector<std::optional<SweepPoint>> slots(distances_nm.size());
  // Parallel over distances; nested loops inside a worker run serially.
  parallel_for(distances_nm.size(), [&](std::size_t i) {
    const LayerStack stack = stack_template.with_thickness(gap_layer, distances_nm[i]);
    slots[i].emplace(SweepPoint{distances_nm[i], angular_pattern(stack, emitter, theta_samples, phi_samples, options),
                                budget_report(stack, emitter, na, options)});
  });
  std::vector<SweepPoint> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

void write_pattern_csv(std::ostream& out, const AngularPattern& pattern) {
  out << "theta,phi,component,pol,half_space,power_density\n";
  out << std::setprecision(12);
  for (const HalfSpace h : {HalfSpace::down, HalfSpace::up}) {
    for (std::size_t i = 0; i < pattern.theta_samples(); ++i) {
      for (std::size_t j = 0; j < pattern.phi_samples(); ++j) {
        for (const auto c : kAllComponents) {
          for (const Polarization pol : {Polarization::s, Polarization::p}) {
            if (c == DipoleComponent::z && pol == Polarization::s) continue;
            out << pattern.theta(i) << ',' << pattern.phi(j) << ',' << to_string(c) << ',' << to_string(pol) << ','
                << to_string(h) << ',' << pattern.density(h, c, pol, i, j) << '\n';
          }
        }
      }
    }
  }
}

namespace {
nlohmann::json to_json(const RadiationBudget& b) {
  return {{"collected_NA", b.collected_na},
          {"substrate_beyond_NA", b.substrate_beyond_na},
          {"leaked_top", b.leaked_top},
          {"absorbed", b.absorbed}};
}
}  // namespace

nlohmann::json budget_to_json(const BudgetReport& report) {
  nlohmann::json components, emitted;
  for (const auto c : kAllComponents) {
    components[to_string(c)] = to_json(report.component(c));
    const EmittedPower& e = report.emitted[static_cast<int>(c)];
    emitted[to_string(c)] = {{"total", e.total},
                             {"host_propagating", e.host_propagating},
                             {"supercritical", e.supercritical},
                             {"near_field", e.near_field},
                             {"u_max", e.u_max},
                             {"tail_estimate", e.tail_estimate}};
  }
  return {{"NA", report.na},
          {"weighted", to_json(report.weighted)},
          {"components", components},
          {"emitted_power", emitted},
          {"accuracy_warning", report.accuracy_warning}};
}

}  // namespace mda
