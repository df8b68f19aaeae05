#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "mda/dipole_radiation.hpp"

namespace mda {

/// Pixel grid of a back-focal-plane image. Column i maps to x, row j to y, both
/// increasing; the BFP radius is rho = n1 sin(theta) in NA units.
struct BfpGeometry {
  std::size_t size = 512;   // square, >= 32
  double pixel_pitch = 0.0;  // NA units per pixel
  double center_x = 0.0;     // pixel coordinates of the optical axis
  double center_y = 0.0;
  double na_limit = 0.0;
  double n1 = 1.0;

  double x(std::size_t i) const { return (static_cast<double>(i) - center_x) * pixel_pitch; }
  double y(std::size_t j) const { return (static_cast<double>(j) - center_y) * pixel_pitch; }
  /// Throws GeometryError / InvalidApertureError for inconsistent values.
  void validate() const;
};

/// Centred geometry whose rim touches the grid edges.
BfpGeometry centered_geometry(std::size_t size, double na_limit, double n1);

struct BfpImage {
  BfpGeometry geometry;
  std::vector<double> pixels;  // row-major, pixels[j * size + i]
  std::optional<double> polarizer_deg;

  double at(std::size_t i, std::size_t j) const { return pixels[j * geometry.size + i]; }
  double total() const;
};

struct RenderOptions {
  /// Objective transmission versus polar angle in the collection medium; unity when empty.
  std::function<double(double theta)> transmission;
  /// Overrides the default centred geometry (grid_size and na_limit must still match).
  std::optional<BfpGeometry> geometry;
};

/// Transverse BFP field of each dipole component at every pixel, scaled so that
/// |E|^2 is the power collected by the pixel. p maps to the radial, s to the
/// azimuthal unit vector.
struct ComponentFields {
  BfpGeometry geometry;
  std::array<std::vector<std::array<cplx, 2>>, 3> field;  // [component][pixel] -> (Ex, Ey)

  const std::array<cplx, 2>& at(DipoleComponent c, std::size_t pixel) const {
    return field[static_cast<int>(c)][pixel];
  }
};

ComponentFields render_fields(const AngularPattern& pattern, const BfpGeometry& geometry,
                              const std::function<double(double)>& transmission = {});

/// Incoherent sum over components of |E . a|^2 (or |E|^2 without polarizer).
BfpImage image_from_fields(const ComponentFields& fields, const DipoleWeights& weights,
                           std::optional<double> polarizer_deg);

BfpImage render_bfp(const AngularPattern& pattern, std::size_t grid_size, double na_limit,
                    std::optional<double> polarizer_deg = std::nullopt, const RenderOptions& options = {});

/// Polarizer angle folded into [0, 360).
double normalize_polarizer(double degrees);

struct RadialBin {
  double theta_lo;
  double theta_hi;
  double theta;  // bin centre in rho, mapped to theta
  double value;  // mean power per unit polar angle over the bin
};
using RadialProfile = std::vector<RadialBin>;

/// Azimuthal integration in uniform rho bins over [0, na_limit], converted back
/// to power per unit polar angle.
RadialProfile phi_integrate_image(const BfpImage& image, std::size_t radial_bins);

/// Rotation about the optical axis by `degrees` (counter-clockwise). Multiples
/// of 90 degrees permute pixels exactly; other angles resample bilinearly.
BfpImage rotate_image(const BfpImage& image, double degrees);

/// 16-bit quantisation with scale max/65535, as stored on disk.
BfpImage quantize(const BfpImage& image);

nlohmann::json metadata_to_json(const BfpImage& image, double intensity_scale);

/// Writes a 16-bit PNG (".png") or binary PGM (anything else) plus a JSON sidecar.
/// `extra` is merged into the sidecar (used to embed the run configuration).
void save_image(const BfpImage& image, const std::filesystem::path& image_file,
                const std::filesystem::path& metadata_file, const nlohmann::json& extra = nlohmann::json::object());

BfpImage load_measurement(const std::filesystem::path& image_file, const std::filesystem::path& metadata_file);

}  // namespace mda
