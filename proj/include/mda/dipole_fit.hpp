#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "mda/bfp_imaging.hpp"

namespace mda {

/// Exclusion mask shared by both fit stages.
struct FitMask {
  std::optional<double> theta_max_deg;  // exclude the annulus beyond this polar angle
};

/// Polar-angle cut that masks the defect annulus of the measured images.
inline constexpr double kExperimentalMaskDeg = 62.0;

/// Basis images of the three dipole components for one geometry and polarizer,
/// plus their phi-integrated profiles. Intensity for an in-plane dipole at
/// azimuth psi is cos^2 I_x + sin^2 I_y + sin(2 psi) I_c.
struct FitModel {
  BfpGeometry geometry;
  std::optional<double> polarizer_deg;
  FitMask mask;
  std::vector<double> axial, x, y, cross;
  std::vector<bool> pixel_used;
  std::size_t radial_bins = 0;
  std::vector<double> profile_axial, profile_inplane, profile_background;
  std::vector<bool> bin_used;
};

FitModel make_fit_model(const AngularPattern& pattern, const BfpGeometry& geometry,
                        std::optional<double> polarizer_deg, const FitMask& mask = {}, std::size_t radial_bins = 128);

struct AxialFit {
  double axial_fraction = 0.0;
  double amplitude = 0.0;
  double background = 0.0;
};

/// Stage 1: non-negative least squares of a profile over the axial and in-plane
/// basis profiles plus a background profile (a constant when empty). `mask`
/// marks the bins used (all when empty).
AxialFit fit_axial_ratio(const std::vector<double>& measured, const std::vector<double>& basis_axial,
                         const std::vector<double>& basis_inplane, const std::vector<bool>& mask = {},
                         const std::vector<double>& basis_background = {});

struct InplaneFit {
  double w_x = 0.0;
  double w_y = 0.0;
  std::optional<double> azimuth_deg;  // principal in-plane axis in [0, 180); empty when indeterminate
  bool indeterminate = false;
  double amplitude = 0.0;
  double background = 0.0;
  double residual_rms = 0.0;
};

/// Stage 2: image-space fit of the in-plane tensor with the axial fraction held.
InplaneFit fit_inplane_split(const BfpImage& image, double axial_fraction, const FitModel& model);

struct FitConfig {
  std::size_t theta_samples = 1024;
  std::size_t phi_samples = 720;
  std::size_t radial_bins = 128;
  FitMask mask;
};

struct FitResult {
  DipoleWeights weights;
  std::optional<double> inplane_azimuth_deg;
  bool split_indeterminate = false;
  double amplitude = 0.0;
  double background = 0.0;  // per pixel
  double residual_rms = 0.0;
  double stage1_residual_rms = 0.0;  // stage-1 model evaluated on the same pixels
  FitMask mask;
};

/// Stage 1 on the phi-integrated image, stage 2 on the image. The emitter's
/// weights are ignored; its position and wavelength define the forward model.
FitResult full_fit(const BfpImage& image, const LayerStack& stack, const DipoleEmitter& emitter,
                   const FitConfig& config = {});
FitResult full_fit(const BfpImage& image, const FitModel& model);

nlohmann::json fit_to_json(const FitResult& result);

}  // namespace mda
