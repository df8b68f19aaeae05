#include "mda/dipole_fit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mda/error.hpp"
#include "mda/nnls.hpp"

namespace mda {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kCollinearTol = 1e-8;
constexpr double kPureAxial = 1.0 - 1e-9;

bool same_geometry(const BfpGeometry& a, const BfpGeometry& b) {
  return a.size == b.size && a.pixel_pitch == b.pixel_pitch && a.center_x == b.center_x &&
         a.center_y == b.center_y && a.na_limit == b.na_limit && a.n1 == b.n1;
}

std::vector<double> profile_values(const BfpGeometry& g, const std::vector<double>& pixels, std::size_t bins) {
  const auto profile = phi_integrate_image(BfpImage{g, pixels, std::nullopt}, bins);
  std::vector<double> v(profile.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = profile[k].value;
  return v;
}

double relative_rms(const Eigen::VectorXd& residual, const Eigen::VectorXd& data) {
  if (residual.size() == 0) return 0.0;
  const double peak = data.maxCoeff();
  const double rms = std::sqrt(residual.squaredNorm() / static_cast<double>(residual.size()));
  return peak > 0.0 ? rms / peak : rms;
}

struct MaskedImage {
  std::vector<std::size_t> index;
  Eigen::VectorXd data;
};

MaskedImage masked(const BfpImage& image, const FitModel& model) {
  MaskedImage m;
  for (std::size_t k = 0; k < model.pixel_used.size(); ++k)
    if (model.pixel_used[k]) m.index.push_back(k);
  m.data.resize(static_cast<Eigen::Index>(m.index.size()));
  for (std::size_t r = 0; r < m.index.size(); ++r) m.data(static_cast<Eigen::Index>(r)) = image.pixels[m.index[r]];
  if (m.index.empty()) throw GeometryError("the fit mask excludes every pixel");
  return m;
}

}  // namespace

FitModel make_fit_model(const AngularPattern& pattern, const BfpGeometry& geometry,
                        std::optional<double> polarizer_deg, const FitMask& mask, std::size_t radial_bins) {
  const ComponentFields fields = render_fields(pattern, geometry);
  const std::size_t n = geometry.size * geometry.size;
  FitModel m;
  m.geometry = geometry;
  m.polarizer_deg = polarizer_deg ? std::optional(normalize_polarizer(*polarizer_deg)) : std::nullopt;
  m.mask = mask;
  m.radial_bins = radial_bins;
  m.axial.assign(n, 0.0);
  m.x.assign(n, 0.0);
  m.y.assign(n, 0.0);
  m.cross.assign(n, 0.0);
  m.pixel_used.assign(n, false);

  double ax = 0.0, ay = 0.0;
  if (m.polarizer_deg) {
    const double axis = std::fmod(*m.polarizer_deg, 180.0) * kPi / 180.0;
    ax = std::cos(axis);
    ay = std::sin(axis);
  }
  const double rho_cut =
      mask.theta_max_deg ? geometry.n1 * std::sin(std::min(90.0, *mask.theta_max_deg) * kPi / 180.0) : 1e300;
  std::vector<double> ones(n, 0.0);
  for (std::size_t j = 0; j < geometry.size; ++j) {
    for (std::size_t i = 0; i < geometry.size; ++i) {
      const std::size_t k = j * geometry.size + i;
      const double rho = std::hypot(geometry.x(i), geometry.y(j));
      if (rho > geometry.na_limit) continue;
      ones[k] = 1.0;
      m.pixel_used[k] = rho <= rho_cut;
      const auto& ez = fields.at(DipoleComponent::z, k);
      const auto& ex = fields.at(DipoleComponent::x, k);
      const auto& ey = fields.at(DipoleComponent::y, k);
      if (m.polarizer_deg) {
        const cplx pz = ax * ez[0] + ay * ez[1];
        const cplx px = ax * ex[0] + ay * ex[1];
        const cplx py = ax * ey[0] + ay * ey[1];
        m.axial[k] = std::norm(pz);
        m.x[k] = std::norm(px);
        m.y[k] = std::norm(py);
        m.cross[k] = 2.0 * (px * std::conj(py)).real();
      } else {
        m.axial[k] = std::norm(ez[0]) + std::norm(ez[1]);
        m.x[k] = std::norm(ex[0]) + std::norm(ex[1]);
        m.y[k] = std::norm(ey[0]) + std::norm(ey[1]);
        m.cross[k] = 2.0 * (ex[0] * std::conj(ey[0]) + ex[1] * std::conj(ey[1])).real();
      }
    }
  }

  std::vector<double> inplane(n);
  for (std::size_t k = 0; k < n; ++k) inplane[k] = 0.5 * (m.x[k] + m.y[k]);
  m.profile_axial = profile_values(geometry, m.axial, radial_bins);
  m.profile_inplane = profile_values(geometry, inplane, radial_bins);
  m.profile_background = profile_values(geometry, ones, radial_bins);
  const auto bins = phi_integrate_image(BfpImage{geometry, ones, std::nullopt}, radial_bins);
  m.bin_used.assign(radial_bins, false);
  for (std::size_t k = 0; k < radial_bins; ++k) {
    const bool inside = !mask.theta_max_deg || bins[k].theta_hi <= *mask.theta_max_deg * kPi / 180.0 + 1e-12;
    m.bin_used[k] = inside && bins[k].value > 0.0;
  }
  return m;
}

AxialFit fit_axial_ratio(const std::vector<double>& measured, const std::vector<double>& basis_axial,
                         const std::vector<double>& basis_inplane, const std::vector<bool>& mask,
                         const std::vector<double>& basis_background) {
  const std::size_t n = measured.size();
  if (basis_axial.size() != n || basis_inplane.size() != n || (!mask.empty() && mask.size() != n) ||
      (!basis_background.empty() && basis_background.size() != n))
    throw GeometryError("stage-1 profiles have different lengths");
  std::vector<std::size_t> rows;
  for (std::size_t k = 0; k < n; ++k)
    if (mask.empty() || mask[k]) rows.push_back(k);
  if (rows.size() < 3) throw IllConditionedFitError("fewer than three profile bins survive the mask");

  Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    a(row, 0) = basis_axial[rows[r]];
    a(row, 1) = basis_inplane[rows[r]];
    a(row, 2) = basis_background.empty() ? 1.0 : basis_background[rows[r]];
    b(row) = measured[rows[r]];
  }
  if (scaled_min_singular_value(a) < kCollinearTol)
    throw IllConditionedFitError("axial, in-plane and background profiles are collinear");
  const NnlsResult sol = nnls(a, b);
  AxialFit fit;
  fit.amplitude = sol.x(0) + sol.x(1);
  if (!(fit.amplitude > 0.0)) throw IllConditionedFitError("no dipole signal above the background");
  fit.axial_fraction = sol.x(0) / fit.amplitude;
  fit.background = sol.x(2);
  return fit;
}

InplaneFit fit_inplane_split(const BfpImage& image, double axial_fraction, const FitModel& model) {
  if (!same_geometry(image.geometry, model.geometry)) throw GeometryError("image geometry differs from the fit model");
  if (image.pixels.size() != model.axial.size()) throw GeometryError("image size differs from the fit model");
  const auto pol = image.polarizer_deg ? std::optional(normalize_polarizer(*image.polarizer_deg)) : std::nullopt;
  const bool pol_match = pol.has_value() == model.polarizer_deg.has_value() &&
                         (!pol || std::fmod(*pol, 180.0) == std::fmod(*model.polarizer_deg, 180.0));
  if (!pol_match) throw GeometryError("image polarizer differs from the fit model");
  if (!(axial_fraction >= 0.0 && axial_fraction <= 1.0)) throw DomainError("axial fraction must lie in [0, 1]");

  const MaskedImage data = masked(image, model);
  const auto rows = static_cast<Eigen::Index>(data.index.size());
  InplaneFit fit;

  if (axial_fraction >= kPureAxial) {
    Eigen::MatrixXd a(rows, 2);
    for (Eigen::Index r = 0; r < rows; ++r) {
      a(r, 0) = model.axial[data.index[static_cast<std::size_t>(r)]];
      a(r, 1) = 1.0;
    }
    const NnlsResult sol = nnls(a, data.data);
    fit.indeterminate = true;
    fit.amplitude = sol.x(0);
    fit.background = sol.x(1);
    fit.residual_rms = relative_rms(a * sol.x - data.data, data.data);
    return fit;
  }

  const double kappa = axial_fraction / (1.0 - axial_fraction);
  Eigen::MatrixXd a(rows, 5);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::size_t k = data.index[static_cast<std::size_t>(r)];
    a(r, 0) = model.x[k] + kappa * model.axial[k];
    a(r, 1) = model.y[k] + kappa * model.axial[k];
    a(r, 2) = model.cross[k];
    a(r, 3) = -model.cross[k];
    a(r, 4) = 1.0;
  }
  const NnlsResult sol = nnls(a, data.data);
  const double cx = sol.x(0), cy = sol.x(1), cxy = sol.x(2) - sol.x(3);
  const double inplane = cx + cy;
  fit.background = sol.x(4);
  fit.residual_rms = relative_rms(a * sol.x - data.data, data.data);
  if (!(inplane > 0.0)) {
    fit.indeterminate = true;
    return fit;
  }
  fit.amplitude = inplane / (1.0 - axial_fraction);
  fit.w_x = (1.0 - axial_fraction) * cx / inplane;
  fit.w_y = (1.0 - axial_fraction) * cy / inplane;
  const double anisotropy = std::hypot(cx - cy, 2.0 * cxy);
  if (anisotropy > 1e-9 * inplane) {
    double az = 0.5 * std::atan2(2.0 * cxy, cx - cy) * 180.0 / kPi;
    if (az < 0.0) az += 180.0;
    fit.azimuth_deg = az >= 180.0 ? 0.0 : az;
  }
  return fit;
}

FitResult full_fit(const BfpImage& image, const FitModel& model) {
  const auto profile = phi_integrate_image(image, model.radial_bins);
  std::vector<double> measured(profile.size());
  for (std::size_t k = 0; k < profile.size(); ++k) measured[k] = profile[k].value;
  const AxialFit stage1 =
      fit_axial_ratio(measured, model.profile_axial, model.profile_inplane, model.bin_used, model.profile_background);
  const double f = stage1.axial_fraction >= kPureAxial ? 1.0 : stage1.axial_fraction;
  const InplaneFit stage2 = fit_inplane_split(image, f, model);

  FitResult r;
  r.mask = model.mask;
  r.split_indeterminate = stage2.indeterminate;
  r.amplitude = stage2.amplitude;
  r.background = stage2.background;
  r.residual_rms = stage2.residual_rms;
  r.inplane_azimuth_deg = stage2.azimuth_deg;
  if (stage2.indeterminate) {
    r.weights = {f, 0.5 * (1.0 - f), 0.5 * (1.0 - f)};
  } else {
    r.weights = {f, stage2.w_x, stage2.w_y};
  }

  // Stage-1 model on the image pixels, for the residual comparison.
  const MaskedImage data = masked(image, model);
  Eigen::VectorXd res(data.data.size());
  for (Eigen::Index row = 0; row < res.size(); ++row) {
    const std::size_t k = data.index[static_cast<std::size_t>(row)];
    const double model1 = stage1.amplitude * (stage1.axial_fraction * model.axial[k] +
                                              (1.0 - stage1.axial_fraction) * 0.5 * (model.x[k] + model.y[k])) +
                          stage1.background;
    res(row) = model1 - data.data(row);
  }
  r.stage1_residual_rms = relative_rms(res, data.data);
  return r;
}

FitResult full_fit(const BfpImage& image, const LayerStack& stack, const DipoleEmitter& emitter,
                   const FitConfig& config) {
  DipoleEmitter e = emitter;
  e.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  const AngularPattern pattern = angular_pattern(stack, e, config.theta_samples, config.phi_samples);
  const FitModel model = make_fit_model(pattern, image.geometry, image.polarizer_deg, config.mask, config.radial_bins);
  return full_fit(image, model);
}

nlohmann::json fit_to_json(const FitResult& r) {
  nlohmann::json j;
  j["weights"] = {{"axial", r.weights.axial}, {"x", r.weights.x}, {"y", r.weights.y}};
  j["azimuth_deg"] = r.inplane_azimuth_deg ? nlohmann::json(*r.inplane_azimuth_deg) : nlohmann::json(nullptr);
  j["split_indeterminate"] = r.split_indeterminate;
  j["amplitude"] = r.amplitude;
  j["background"] = r.background;
  j["residual_rms"] = r.residual_rms;
  j["stage1_residual_rms"] = r.stage1_residual_rms;
  j["mask"] = {{"theta_max_deg", r.mask.theta_max_deg ? nlohmann::json(*r.mask.theta_max_deg) : nlohmann::json(nullptr)}};
  return j;
}

}  // namespace mda
