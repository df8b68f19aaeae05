#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mda {

using cplx = std::complex<double>;

/// Isotropic, non-magnetic optical material with complex index n + i*kappa.
struct OpticalMaterial {
  std::string name;
  double n = 1.0;
  double kappa = 0.0;

  OpticalMaterial() = default;
  OpticalMaterial(std::string name, double n, double kappa = 0.0);

  cplx index() const { return {n, kappa}; }
  cplx permittivity() const { return index() * index(); }
  bool lossless() const { return kappa == 0.0; }

  friend bool operator==(const OpticalMaterial&, const OpticalMaterial&) = default;
};

/// One layer of a planar stack. Only the outermost layers may be semi-infinite.
struct Layer {
  OpticalMaterial material;
  std::optional<double> thickness_nm;  // nullopt: semi-infinite

  static Layer finite(OpticalMaterial m, double thickness_nm);
  static Layer semi_infinite(OpticalMaterial m);

  bool is_semi_infinite() const { return !thickness_nm.has_value(); }
  double thickness() const { return thickness_nm.value_or(0.0); }

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Ordered planar stack, index 0 is the bottom (collection) half-space.
///
/// Interface i separates layer i from layer i + 1. A stack is immutable once
/// built; the `with_*` members return modified copies.
class LayerStack {
 public:
  explicit LayerStack(std::vector<Layer> layers);

  std::size_t size() const { return layers_.size(); }
  std::size_t interface_count() const { return layers_.size() - 1; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  const std::vector<Layer>& layers() const { return layers_; }
  const OpticalMaterial& bottom() const { return layers_.front().material; }
  const OpticalMaterial& top() const { return layers_.back().material; }

  /// z of interface i, measured from the bottom of `origin_layer`
  /// (the lower interface of the origin layer sits at z = 0).
  double interface_z(std::size_t i, std::size_t origin_layer) const;

  /// n_first > n_second > n_third for the three designated layers.
  bool antenna_compliant(std::size_t first, std::size_t second, std::size_t third) const;

  LayerStack with_thickness(std::size_t layer, double thickness_nm) const;
  LayerStack with_layer_inserted(std::size_t position, Layer layer) const;
  LayerStack with_layer_removed(std::size_t position) const;

  /// Largest real index among lossless semi-infinite outer media; plane waves
  /// with u above this cannot reach the far field.
  double radiative_cutoff() const;

  friend bool operator==(const LayerStack&, const LayerStack&) = default;

 private:
  std::vector<Layer> layers_;
};

enum class Polarization { s, p };

/// Plane-wave channel: vacuum wavenumber and normalised in-plane wavevector
/// u = k_parallel / k0. u may exceed every index (evanescent everywhere).
struct PlaneWaveChannel {
  double k0 = 0.0;  // rad / nm
  double u = 0.0;
  Polarization pol = Polarization::s;

  static PlaneWaveChannel from_wavelength(double wavelength_nm, double u, Polarization pol);
};

/// Longitudinal wavenumber kz = k0 sqrt(eps - u^2) with Im(kz) >= 0, and
/// Re(kz) >= 0 when Im(kz) == 0.
cplx longitudinal_wavevector(const OpticalMaterial& material, const PlaneWaveChannel& channel);

/// kz / k0 on the same branch.
cplx normalized_kz(const cplx& permittivity, double u);

/// Interface admittance: kz/k0 for s, kz/(k0 eps) for p. Fresnel coefficients of
/// every interface take the form r = (q_a - q_b)/(q_a + q_b), t = 2 q_a/(q_a + q_b).
cplx admittance(const OpticalMaterial& material, double u, Polarization pol);

struct Coefficients {
  cplx r;
  cplx t;
};

/// Single-interface amplitude coefficients for a wave in `from` hitting `to`.
/// s-pol amplitudes are tangential E, p-pol amplitudes are tangential H.
Coefficients fresnel(const OpticalMaterial& from, const OpticalMaterial& to, const PlaneWaveChannel& channel);

enum class Direction { up, down };

/// Composite response of everything on the far side of interface
/// `from_interface`, seen by a wave travelling in `direction`.
///
/// `up`: wave in layer i incident on interface i, structure = layers i+1..N-1.
/// `down`: wave in layer i+1 incident on interface i, structure = layers i..0.
/// r is referenced at the interface; t is the amplitude in the exit half-space
/// at its own boundary per unit incident amplitude.
Coefficients substack_coefficients(const LayerStack& stack, const PlaneWaveChannel& channel,
                                   std::size_t from_interface, Direction direction);

/// Flux ratio factor Re(q_exit)/Re(q_incident) used in |r|^2 + f |t|^2 = 1.
double transmission_flux_factor(const OpticalMaterial& incident, const OpticalMaterial& exit, double u,
                                Polarization pol);

/// A stack together with its design wavelength, as ingested from JSON.
struct StackDocument {
  LayerStack stack;
  double wavelength_nm;
};

/// Parses {"wavelength_nm": .., "layers": [{name, n, kappa, thickness_nm | "semi-infinite"}]}.
StackDocument stack_from_json(const nlohmann::json& doc);
nlohmann::json stack_to_json(const LayerStack& stack, double wavelength_nm);

namespace presets {

inline constexpr double kWavelengthNm = 637.0;
inline constexpr double kPolymerThicknessNm = 350.0;
inline constexpr double kEmitterHeightNm = 200.0;

OpticalMaterial sapphire();
OpticalMaterial polymer();  // merged PMMA/PVA layer, n = 1.5
OpticalMaterial pmma();
OpticalMaterial pva();
OpticalMaterial air();
/// Gold at 637 nm. Configurable through the stack document; not a measured value.
OpticalMaterial gold();

/// Sapphire / 350 nm polymer / air. The emitter host is layer 1.
LayerStack dielectric_antenna();
/// Same with PMMA (200 nm) and PVA (150 nm) kept as separate layers.
LayerStack dielectric_antenna_two_sublayers();
/// Sapphire / polymer / air gap / gold. The gap is layer 2.
LayerStack metallo_dielectric_antenna(double gap_nm, const OpticalMaterial& mirror = gold());

}  // namespace presets

}  // namespace mda
