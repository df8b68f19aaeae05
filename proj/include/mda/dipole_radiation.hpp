#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "mda/layered_stack.hpp"

namespace mda {

enum class DipoleComponent { z, x, y };
enum class HalfSpace { down, up };

inline constexpr std::array<DipoleComponent, 3> kAllComponents{DipoleComponent::z, DipoleComponent::x,
                                                                DipoleComponent::y};

const char* to_string(DipoleComponent c);
const char* to_string(HalfSpace h);
const char* to_string(Polarization p);

/// Relative emitted-power fractions of three incoherent orthogonal dipoles.
struct DipoleWeights {
  double axial = 1.0;
  double x = 0.0;
  double y = 0.0;

  double operator[](DipoleComponent c) const;
  /// Throws DomainError unless all weights are >= 0 and sum to 1 (1e-9).
  void validate() const;
};

/// Point emitter inside a finite, lossless layer of a stack.
struct DipoleEmitter {
  std::size_t host_layer = 1;
  double z_offset_nm = 0.0;  // above the bottom of the host layer
  double wavelength_nm = presets::kWavelengthNm;
  DipoleWeights weights;

  void validate(const LayerStack& stack) const;
};

/// The emitter of the dielectric-antenna sample: host layer 1, 200 nm above sapphire.
DipoleEmitter antenna_emitter(DipoleWeights weights);

/// Complex far-field amplitudes along the s (azimuthal) and p unit vectors of
/// the propagation direction. |s|^2 + |p|^2 is the power per steradian.
struct FarField {
  cplx s;
  cplx p;
  double power() const { return std::norm(s) + std::norm(p); }
};

/// Far field of a unit-power free-space dipole (power normalised to the same
/// dipole radiating in an unbounded host medium). theta is measured in the
/// half-space medium from the outward normal.
FarField farfield_amplitudes(const LayerStack& stack, const DipoleEmitter& emitter, DipoleComponent component,
                             double theta, double phi, HalfSpace half_space);

struct SpectrumOptions {
  std::optional<double> u_max;  // default: 1.5 x largest real index in the stack
  double rel_tol = 1e-11;
  double tail_tol = 1e-6;  // relative tail estimate that raises the accuracy warning
};

/// Power emitted by one dipole component, relative to the same dipole in an
/// unbounded host medium, split over the in-plane wavevector u.
struct EmittedPower {
  double total = 0.0;
  double host_propagating = 0.0;  // u <= n_host
  double supercritical = 0.0;     // n_host < u <= radiative cutoff
  double near_field = 0.0;        // u > radiative cutoff: bound to the stack, absorbed or guided
  double u_max = 0.0;
  double tail_estimate = 0.0;  // estimated integral beyond u_max, relative to total
  bool accuracy_warning = false;

  double near_field_fraction() const { return near_field / total; }
};

EmittedPower total_emitted_power(const LayerStack& stack, const DipoleEmitter& emitter, DipoleComponent component,
                                 const SpectrumOptions& options = {});

struct RadiationBudget {
  double collected_na = 0.0;
  double substrate_beyond_na = 0.0;
  double leaked_top = 0.0;
  double absorbed = 0.0;

  double sum() const { return collected_na + substrate_beyond_na + leaked_top + absorbed; }
};

struct BudgetReport {
  double na = 0.0;
  RadiationBudget weighted;
  std::array<RadiationBudget, 3> per_component;  // indexed by DipoleComponent
  std::array<EmittedPower, 3> emitted;
  bool accuracy_warning = false;

  const RadiationBudget& component(DipoleComponent c) const { return per_component[static_cast<int>(c)]; }
};

/// Budget of every dipole component plus the weight-averaged configuration.
/// Throws InvalidApertureError when na exceeds the collection-medium index.
BudgetReport budget_report(const LayerStack& stack, const DipoleEmitter& emitter, double na,
                           const SpectrumOptions& options = {});

RadiationBudget radiation_budget(const LayerStack& stack, const DipoleEmitter& emitter, double na,
                                 const SpectrumOptions& options = {});

/// collected_na(with mirror) / collected_na(without) - 1 at fixed emitted-photon
/// number. The two stacks must agree from the collection medium up to the host.
double mirror_gain(const LayerStack& stack_no_mirror, const LayerStack& stack_with_mirror,
                   const DipoleEmitter& emitter, double na, const SpectrumOptions& options = {});

struct ProfilePoint {
  double theta;
  double value;  // power per unit polar angle
};
using Profile = std::vector<ProfilePoint>;

/// Sampled far field of an emitter configuration over both half-spaces.
///
/// The azimuthal dependence of each dipole component is analytic (cos, sin or
/// constant), so amplitudes are stored on the polar grid only and expanded on
/// the azimuthal grid on demand. Each component is normalised to its own total
/// emitted power; `weights` then gives the configuration.
class AngularPattern {
 public:
  struct Channel {
    std::vector<cplx> axial_p;   // z dipole, p-pol (no s field)
    std::vector<cplx> inplane_s;  // x dipole at phi = 90 deg, s-pol reduced amplitude
    std::vector<cplx> inplane_p;  // x dipole at phi = 0, p-pol reduced amplitude
  };

  AngularPattern(std::size_t theta_samples, std::size_t phi_samples, std::array<double, 2> medium_index,
                 std::array<bool, 2> radiating, std::array<Channel, 2> channels, DipoleWeights weights,
                 std::array<EmittedPower, 3> emitted, double wavelength_nm);

  std::size_t theta_samples() const { return theta_count_; }
  std::size_t phi_samples() const { return phi_count_; }
  double theta(std::size_t i) const;  // midpoint grid on [0, pi/2)
  double phi(std::size_t j) const;    // midpoint grid on [0, 2 pi)
  double theta_step() const;
  double phi_step() const;
  double medium_index(HalfSpace h) const { return index_[idx(h)]; }
  bool radiating(HalfSpace h) const { return radiating_[idx(h)]; }
  const DipoleWeights& weights() const { return weights_; }
  double wavelength_nm() const { return wavelength_nm_; }
  const EmittedPower& emitted(DipoleComponent c) const { return emitted_[static_cast<int>(c)]; }

  /// Copy with a different weight triple (amplitudes are weight-independent).
  AngularPattern with_weights(const DipoleWeights& w) const;

  FarField amplitude(HalfSpace h, DipoleComponent c, std::size_t theta_index, double phi) const;
  /// Linear interpolation between polar samples. Below the first sample the
  /// axial field goes to zero on axis and in-plane fields extrapolate; above
  /// the last sample the value is held.
  FarField amplitude_at(HalfSpace h, DipoleComponent c, double theta, double phi) const;

  double density(HalfSpace h, DipoleComponent c, Polarization pol, std::size_t theta_index,
                 std::size_t phi_index) const;
  /// Weighted sum over components and polarisations.
  double weighted_density(HalfSpace h, std::size_t theta_index, std::size_t phi_index) const;

  /// Midpoint-rule power into the half-space for theta <= theta_max.
  double half_space_power(HalfSpace h, double theta_max = 10.0) const;

 private:
  static int idx(HalfSpace h) { return h == HalfSpace::down ? 0 : 1; }

  std::size_t theta_count_;
  std::size_t phi_count_;
  std::array<double, 2> index_;
  std::array<bool, 2> radiating_;
  std::array<Channel, 2> channels_;
  DipoleWeights weights_;
  std::array<EmittedPower, 3> emitted_;
  double wavelength_nm_;
};

AngularPattern angular_pattern(const LayerStack& stack, const DipoleEmitter& emitter, std::size_t theta_samples = 1024,
                               std::size_t phi_samples = 720, const SpectrumOptions& options = {});

/// P(theta) = integral of the density times sin(theta) over phi. With a component
/// given, that component alone (unit weight); otherwise the weighted configuration.
Profile phi_integrated_profile(const AngularPattern& pattern, HalfSpace half_space,
                               std::optional<DipoleComponent> component = std::nullopt);

struct SweepPoint {
  double distance_nm;
  AngularPattern pattern;
  BudgetReport budget;
};

/// Recomputes pattern and budget with the gap layer set to each distance.
std::vector<SweepPoint> mirror_distance_sweep(const LayerStack& stack_template, std::size_t gap_layer,
                                              const DipoleEmitter& emitter, const std::vector<double>& distances_nm,
                                              double na, std::size_t theta_samples = 1024,
                                              std::size_t phi_samples = 720, const SpectrumOptions& options = {});

/// Rows: theta, phi, component, pol, half_space, power_density. Structurally
/// zero rows (s-pol of the axial dipole) are omitted.
void write_pattern_csv(std::ostream& out, const AngularPattern& pattern);
nlohmann::json budget_to_json(const BudgetReport& report);

}  // namespace mda
