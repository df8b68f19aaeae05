#include "mda/layered_stack.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "mda/error.hpp"

namespace mda {

OpticalMaterial::OpticalMaterial(std::string name_, double n_, double kappa_)
    : name(std::move(name_)), n(n_), kappa(kappa_) {
  if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("material '" + name + "': n must be positive");
  if (!(kappa >= 0.0) || !std::isfinite(kappa))
    throw DomainError("material '" + name + "': kappa must be non-negative");
}

Layer Layer::finite(OpticalMaterial m, double thickness_nm) {
  if (!(thickness_nm >= 0.0) || !std::isfinite(thickness_nm))
    throw DomainError("layer '" + m.name + "': thickness must be finite and non-negative");
  return Layer{std::move(m), thickness_nm};
}

Layer Layer::semi_infinite(OpticalMaterial m) { return Layer{std::move(m), std::nullopt}; }

LayerStack::LayerStack(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.size() < 2) throw DomainError("a stack needs at least two layers");
  if (!layers_.front().is_semi_infinite() || !layers_.back().is_semi_infinite())
    throw DomainError("the first and last layers must be semi-infinite");
  for (std::size_t i = 1; i + 1 < layers_.size(); ++i) {
    if (layers_[i].is_semi_infinite())
      throw DomainError("only the outermost layers may be semi-infinite (layer " + std::to_string(i) + ")");
  }
}

double LayerStack::interface_z(std::size_t i, std::size_t origin_layer) const {
  if (i >= interface_count()) throw DomainError("interface index out of range");
  if (origin_layer >= size()) throw DomainError("origin layer out of range");
  // Interface k is the top of layer k; semi-infinite layers contribute no thickness.
  double z = 0.0;
  if (i >= origin_layer) {
    for (std::size_t k = origin_layer; k <= i; ++k) z += layers_[k].thickness();
  } else {
    for (std::size_t k = i + 1; k < origin_layer; ++k) z -= layers_[k].thickness();
  }
  return z;
}

bool LayerStack::antenna_compliant(std::size_t first, std::size_t second, std::size_t third) const {
  const double n1 = layer(first).material.n;
  const double n2 = layer(second).material.n;
  const double n3 = layer(third).material.n;
  return n1 > n2 && n2 > n3;
}

LayerStack LayerStack::with_thickness(std::size_t layer_index, double thickness_nm) const {
  auto layers = layers_;
  if (layer_index >= layers.size() || layers[layer_index].is_semi_infinite())
    throw DomainError("with_thickness: layer " + std::to_string(layer_index) + " is not a finite layer");
  layers[layer_index] = Layer::finite(layers[layer_index].material, thickness_nm);
  return LayerStack(std::move(layers));
}

LayerStack LayerStack::with_layer_inserted(std::size_t position, Layer layer_) const {
  if (position == 0 || position >= layers_.size())
    throw DomainError("inserted layers must sit strictly between the outer half-spaces");
  auto layers = layers_;
  layers.insert(layers.begin() + static_cast<std::ptrdiff_t>(position), std::move(layer_));
  return LayerStack(std::move(layers));
}

LayerStack LayerStack::with_layer_removed(std::size_t position) const {
  if (position >= layers_.size()) throw DomainError("layer index out of range");
  auto layers = layers_;
  layers.erase(layers.begin() + static_cast<std::ptrdiff_t>(position));
  if (!layers.empty()) {
    layers.front().thickness_nm.reset();
    layers.back().thickness_nm.reset();
  }
  return LayerStack(std::move(layers));
}

double LayerStack::radiative_cutoff() const {
  double cutoff = 0.0;
  for (const auto* l : {&layers_.front(), &layers_.back()}) {
    if (l->material.lossless()) cutoff = std::max(cutoff, l->material.n);
  }
  return cutoff;
}

PlaneWaveChannel PlaneWaveChannel::from_wavelength(double wavelength_nm, double u, Polarization pol) {
  if (!(wavelength_nm > 0.0)) throw DomainError("wavelength must be positive");
  if (!(u >= 0.0)) throw DomainError("in-plane wavevector must be non-negative");
  return {2.0 * std::numbers::pi / wavelength_nm, u, pol};
}

cplx normalized_kz(const cplx& permittivity, double u) {
  cplx w = std::sqrt(permittivity - u * u);
  if (w.imag() < 0.0 || (w.imag() == 0.0 && w.real() < 0.0)) w = -w;
  return w;
}

cplx longitudinal_wavevector(const OpticalMaterial& material, const PlaneWaveChannel& channel) {
  return channel.k0 * normalized_kz(material.permittivity(), channel.u);
}

cplx admittance(const OpticalMaterial& material, double u, Polarization pol) {
  const cplx eps = material.permittivity();
  const cplx w = normalized_kz(eps, u);
  return pol == Polarization::s ? w : w / eps;
}

Coefficients fresnel(const OpticalMaterial& from, const OpticalMaterial& to, const PlaneWaveChannel& channel) {
  if (from.n == to.n && from.kappa == to.kappa) return {0.0, 1.0};
  const cplx qa = admittance(from, channel.u, channel.pol);
  const cplx qb = admittance(to, channel.u, channel.pol);
  const cplx denom = qa + qb;
  if (std::abs(denom) <= 1e-12 * (std::abs(qa) + std::abs(qb)))
    throw SingularChannelError("singular Fresnel channel between '" + from.name + "' and '" + to.name +
                               "' at u = " + std::to_string(channel.u));
  return {(qa - qb) / denom, 2.0 * qa / denom};
}

Coefficients substack_coefficients(const LayerStack& stack, const PlaneWaveChannel& channel,
                                   std::size_t from_interface, Direction direction) {
  if (from_interface >= stack.interface_count()) throw DomainError("interface index out of range");

  // Walk from the far end of the structure back to the reference interface.
  // Each step wraps the accumulated (r, t) with one more layer via the Airy relation.
  std::vector<std::size_t> order;  // layers from the incident medium to the exit medium
  if (direction == Direction::up) {
    for (std::size_t k = from_interface; k < stack.size(); ++k) order.push_back(k);
  } else {
    for (std::size_t k = from_interface + 2; k-- > 0;) order.push_back(k);
  }

  const std::size_t m = order.size();
  Coefficients acc =
      fresnel(stack.layer(order[m - 2]).material, stack.layer(order[m - 1]).material, channel);
  for (std::size_t j = m - 2; j >= 1; --j) {
    const Layer& inner = stack.layer(order[j]);
    const cplx kz = longitudinal_wavevector(inner.material, channel);
    const cplx half_phase = std::exp(cplx(0.0, 1.0) * kz * inner.thickness());
    const cplx phase = half_phase * half_phase;
    const Coefficients step = fresnel(stack.layer(order[j - 1]).material, inner.material, channel);
    const cplx denom = 1.0 + step.r * acc.r * phase;
    if (denom == 0.0) throw SingularChannelError("singular multilayer resonance");
    acc = {(step.r + acc.r * phase) / denom, step.t * acc.t * half_phase / denom};
  }
  return acc;
}

double transmission_flux_factor(const OpticalMaterial& incident, const OpticalMaterial& exit, double u,
                                Polarization pol) {
  const double qi = admittance(incident, u, pol).real();
  const double qe = admittance(exit, u, pol).real();
  if (qi == 0.0) throw DomainError("incident channel carries no flux");
  return qe / qi;
}

StackDocument stack_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SchemaError("stack document must be a JSON object");
  if (!doc.contains("wavelength_nm") || !doc["wavelength_nm"].is_number())
    throw SchemaError("stack document: 'wavelength_nm' (number) is required");
  if (!doc.contains("layers") || !doc["layers"].is_array())
    throw SchemaError("stack document: 'layers' (array) is required");
  const double wavelength = doc["wavelength_nm"].get<double>();
  if (!(wavelength > 0.0)) throw SchemaError("stack document: 'wavelength_nm' must be positive");

  std::vector<Layer> layers;
  std::size_t index = 0;
  for (const auto& entry : doc["layers"]) {
    const std::string where = "layers[" + std::to_string(index++) + "]";
    if (!entry.is_object()) throw SchemaError(where + " must be an object");
    if (!entry.contains("n") || !entry["n"].is_number()) throw SchemaError(where + ": 'n' (number) is required");
    if (!entry.contains("thickness_nm")) throw SchemaError(where + ": 'thickness_nm' is required");
    const std::string name = entry.value("name", std::string("layer") + std::to_string(index - 1));
    const double kappa = entry.contains("kappa") ? entry["kappa"].get<double>() : 0.0;
    OpticalMaterial material;
    try {
      material = OpticalMaterial(name, entry["n"].get<double>(), kappa);
    } catch (const DomainError& e) {
      throw SchemaError(where + ": " + e.what());
    }
    const auto& t = entry["thickness_nm"];
    if (t.is_string()) {
      if (t.get<std::string>() != "semi-infinite")
        throw SchemaError(where + ": thickness_nm must be a number or \"semi-infinite\"");
      layers.push_back(Layer::semi_infinite(material));
    } else if (t.is_number()) {
      const double d = t.get<double>();
      if (!(d > 0.0)) throw SchemaError(where + ": finite thickness must be > 0");
      layers.push_back(Layer::finite(material, d));
    } else {
      throw SchemaError(where + ": thickness_nm must be a number or \"semi-infinite\"");
    }
  }
  try {
    return {LayerStack(std::move(layers)), wavelength};
  } catch (const DomainError& e) {
    throw SchemaError(std::string("stack document: ") + e.what());
  }
}

nlohmann::json stack_to_json(const LayerStack& stack, double wavelength_nm) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : stack.layers()) {
    nlohmann::json entry{{"name", l.material.name}, {"n", l.material.n}, {"kappa", l.material.kappa}};
    if (l.is_semi_infinite())
      entry["thickness_nm"] = "semi-infinite";
    else
      entry["thickness_nm"] = l.thickness();
    layers.push_back(std::move(entry));
  }
  return {{"wavelength_nm", wavelength_nm}, {"layers", std::move(layers)}};
}

namespace presets {

OpticalMaterial sapphire() { return {"sapphire", 1.78}; }
OpticalMaterial polymer() { return {"polymer", 1.5}; }
OpticalMaterial pmma() { return {"PMMA", 1.49}; }
OpticalMaterial pva() { return {"PVA", 1.5}; }
OpticalMaterial air() { return {"air", 1.0}; }
OpticalMaterial gold() { return {"gold", 0.18, 3.44}; }

LayerStack dielectric_antenna() {
  return LayerStack({Layer::semi_infinite(sapphire()), Layer::finite(polymer(), kPolymerThicknessNm),
                     Layer::semi_infinite(air())});
}

LayerStack dielectric_antenna_two_sublayers() {
  return LayerStack({Layer::semi_infinite(sapphire()), Layer::finite(pmma(), 200.0), Layer::finite(pva(), 150.0),
                     Layer::semi_infinite(air())});
}

LayerStack metallo_dielectric_antenna(double gap_nm, const OpticalMaterial& mirror) {
  return LayerStack({Layer::semi_infinite(sapphire()), Layer::finite(polymer(), kPolymerThicknessNm),
                     Layer::finite(air(), gap_nm), Layer::semi_infinite(mirror)});
}

}  // namespace presets

}  // namespace mda
