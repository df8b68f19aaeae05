#include "mda/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>

#include "mda/bfp_imaging.hpp"
#include "mda/config_schema.hpp"
#include "mda/dipole_fit.hpp"
#include "mda/dipole_radiation.hpp"
#include "mda/layered_stack.hpp"
#include "mda/parallel.hpp"
#include "mda/photon_stats.hpp"

namespace mda {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kDefaultNa = 1.65;
constexpr double kDefaultGapNm = 284.0;

const char* command_name(Command c) {
  switch (c) {
    case Command::pattern: return "pattern";
    case Command::bfp: return "bfp";
    case Command::sweep: return "sweep";
    case Command::fit: return "fit";
    case Command::photon: return "photon";
  }
  return "";
}

void require_valid(const json& doc) {
  if (auto v = validate_schema(doc, run_config_schema())) throw ConfigError(v->pointer, v->message);
}

void set_default(json& obj, const char* key, const json& value) {
  if (!obj.contains(key)) obj[key] = value;
}

LayerStack build_stack(const json& s) {
  if (s.contains("preset")) {
    const std::string name = s["preset"].get<std::string>();
    if (name == "dielectric_antenna") return presets::dielectric_antenna();
    if (name == "dielectric_antenna_two_sublayers") return presets::dielectric_antenna_two_sublayers();
    return presets::metallo_dielectric_antenna(s.value("gap_nm", kDefaultGapNm));
  }
  return stack_from_json(s).stack;
}

double stack_wavelength(const json& s) {
  return s.contains("preset") ? presets::kWavelengthNm : s["wavelength_nm"].get<double>();
}

DipoleEmitter build_emitter(const json& config, const LayerStack& stack) {
  const json& e = config["emitter"];
  DipoleEmitter emitter;
  emitter.host_layer = e["host_layer"].get<std::size_t>();
  emitter.z_offset_nm = e["z_offset_nm"].get<double>();
  emitter.wavelength_nm = stack_wavelength(config["stack"]);
  emitter.weights = {e["weights"]["axial"].get<double>(), e["weights"]["x"].get<double>(),
                     e["weights"]["y"].get<double>()};
  try {
    emitter.validate(stack);
  } catch (const DomainError& ex) {
    throw ConfigError("/emitter", ex.what());
  }
  return emitter;
}

SpectrumOptions spectrum_options(const json& config) {
  SpectrumOptions o;
  if (config["grid"].contains("u_max")) o.u_max = config["grid"]["u_max"].get<double>();
  return o;
}

EmitterPhotophysics photophysics(const json& section) {
  json physics = section;
  for (const char* key : {"duration_s", "g2_bin_width_ns", "g2_span_ns", "trace_bin_width_ms"}) physics.erase(key);
  try {
    return photophysics_from_json(physics);
  } catch (const SchemaError& e) {
    throw ConfigError("/photon", e.what());
  }
}

// ---------------------------------------------------------------------------

struct Outputs {
  fs::path dir;
  json config;
  std::string command;

  fs::path path(const std::string& name) const { return dir / name; }

  void text(const std::string& name, const std::string& body) const {
    fs::create_directories(path(name).parent_path());
    std::ofstream f(path(name), std::ios::binary);
    if (!f) throw Error("cannot write " + path(name).string());
    f << body;
  }

  void json_file(const std::string& name, json body) const {
    body["command"] = command;
    body["config"] = config;
    text(name, body.dump(2) + "\n");
  }

  template <class Writer>
  void csv(const std::string& name, Writer&& writer) const {
    std::ostringstream s;
    s << "# config: " << config.dump() << '\n';
    writer(s);
    text(name, s.str());
  }
};

void write_profile_csv(std::ostream& s, const AngularPattern& pattern) {
  const Profile down = phi_integrated_profile(pattern, HalfSpace::down);
  const Profile up = phi_integrated_profile(pattern, HalfSpace::up);
  s << "theta_deg,down,up\n" << std::setprecision(12);
  for (std::size_t i = 0; i < down.size(); ++i)
    s << down[i].theta * 180.0 / std::numbers::pi << ',' << down[i].value << ',' << up[i].value << '\n';
}

std::string angle_tag(double degrees) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(degrees == std::floor(degrees) ? 0 : 2) << degrees;
  return s.str();
}

std::string distance_tag(double nm) {
  std::ostringstream s;
  s << "d_" << std::fixed << std::setprecision(nm == std::floor(nm) ? 0 : 2) << nm;
  return s.str();
}

bool any_accuracy_warning(const AngularPattern& pattern) {
  for (const auto c : kAllComponents)
    if (pattern.emitted(c).accuracy_warning) return true;
  return false;
}

void save_bfp_series(const Outputs& out, const std::string& prefix, const AngularPattern& pattern, const json& bfp) {
  const std::size_t size = bfp["size"].get<std::size_t>();
  const BfpGeometry geometry = centered_geometry(size, bfp["na_limit"].get<double>(), pattern.medium_index(HalfSpace::down));
  const ComponentFields fields = render_fields(pattern, geometry);
  const std::string ext = bfp["format"].get<std::string>() == "png" ? ".png" : ".pgm";
  const json extra = {{"config", out.config}};
  auto save = [&](const BfpImage& img, const std::string& stem) {
    fs::create_directories(out.path(prefix + stem).parent_path());
    save_image(img, out.path(prefix + stem + ext), out.path(prefix + stem + ".json"), extra);
  };
  save(image_from_fields(fields, pattern.weights(), std::nullopt), "bfp_unpolarized");
  for (const auto& a : bfp["polarizer_angles_deg"]) {
    const double angle = a.get<double>();
    save(image_from_fields(fields, pattern.weights(), angle), "bfp_pol_" + angle_tag(angle));
  }
}

// ---------------------------------------------------------------------------

struct RunResult {
  bool accuracy_warning = false;
  json summary;
};

RunResult cmd_pattern(const json& config, const Outputs& out) {
  const LayerStack stack = build_stack(config["stack"]);
  const DipoleEmitter emitter = build_emitter(config, stack);
  const auto options = spectrum_options(config);
  const double na = config["na"].get<double>();
  BudgetReport report;
  try {
    report = budget_report(stack, emitter, na, options);
  } catch (const InvalidApertureError& e) {
    throw ConfigError("/na", e.what());
  }
  const AngularPattern pattern = angular_pattern(stack, emitter, config["grid"]["theta_samples"].get<std::size_t>(),
                                                 config["grid"]["phi_samples"].get<std::size_t>(), options);
  out.csv("pattern.csv", [&](std::ostream& s) { write_pattern_csv(s, pattern); });
  out.csv("profile.csv", [&](std::ostream& s) { write_profile_csv(s, pattern); });
  const json budget = budget_to_json(report);
  out.json_file("budget.json", {{"budget", budget}, {"stack_resolved", stack_to_json(stack, emitter.wavelength_nm)}});
  return {report.accuracy_warning || any_accuracy_warning(pattern), budget};
}

RunResult cmd_bfp(const json& config, const Outputs& out) {
  const LayerStack stack = build_stack(config["stack"]);
  const DipoleEmitter emitter = build_emitter(config, stack);
  const AngularPattern pattern = angular_pattern(stack, emitter, config["grid"]["theta_samples"].get<std::size_t>(),
                                                 config["grid"]["phi_samples"].get<std::size_t>(),
                                                 spectrum_options(config));
  try {
    save_bfp_series(out, "", pattern, config["bfp"]);
  } catch (const InvalidApertureError& e) {
    throw ConfigError("/bfp/na_limit", e.what());
  } catch (const DomainError& e) {
    throw ConfigError("/bfp", e.what());
  }
  json images = json::array({"bfp_unpolarized"});
  for (const auto& a : config["bfp"]["polarizer_angles_deg"]) images.push_back("bfp_pol_" + angle_tag(a.get<double>()));
  return {any_accuracy_warning(pattern), {{"images", images}}};
}

RunResult cmd_sweep(const json& config, const Outputs& out) {
  const LayerStack stack = build_stack(config["stack"]);
  const DipoleEmitter emitter = build_emitter(config, stack);
  const auto options = spectrum_options(config);
  const json& sweep = config["sweep"];
  const auto gap_layer = sweep["gap_layer"].get<std::size_t>();
  if (gap_layer >= stack.size() || stack.layer(gap_layer).is_semi_infinite() || gap_layer <= emitter.host_layer)
    throw ConfigError("/sweep/gap_layer", "gap_layer must be a finite layer above the emitter host");
  const double na = config["na"].get<double>();
  const auto distances = sweep["distances_nm"].get<std::vector<double>>();

  std::optional<BudgetReport> reference;
  if (sweep.contains("reference_stack")) {
    const LayerStack ref = build_stack(sweep["reference_stack"]);
    for (std::size_t i = 0; i <= emitter.host_layer; ++i)
      if (i >= ref.size() || !(ref.layer(i) == stack.layer(i)))
        throw ConfigError("/sweep/reference_stack", "reference stack must match up to the emitter host");
    reference = budget_report(ref, emitter, na, options);
  }

  std::vector<SweepPoint> points;
  try {
    points = mirror_distance_sweep(stack, gap_layer, emitter, distances, na,
                                   config["grid"]["theta_samples"].get<std::size_t>(),
                                   config["grid"]["phi_samples"].get<std::size_t>(), options);
  } catch (const InvalidApertureError& e) {
    throw ConfigError("/na", e.what());
  }

  bool warning = reference && reference->accuracy_warning;
  json rows = json::array();
  std::size_t best = 0;
  std::array<std::size_t, 3> best_component{0, 0, 0};
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& p = points[k];
    warning = warning || p.budget.accuracy_warning || any_accuracy_warning(p.pattern);
    json row = {{"distance_nm", p.distance_nm}, {"budget", budget_to_json(p.budget)}};
    if (reference) row["mirror_gain"] = p.budget.weighted.collected_na / reference->weighted.collected_na - 1.0;
    rows.push_back(row);
    if (p.budget.weighted.collected_na > points[best].budget.weighted.collected_na) best = k;
    for (const auto c : kAllComponents) {
      auto& b = best_component[static_cast<int>(c)];
      if (p.budget.component(c).collected_na > points[b].budget.component(c).collected_na) b = k;
    }
    const std::string dir = distance_tag(p.distance_nm) + "/";
    out.csv(dir + "profile.csv", [&](std::ostream& s) { write_profile_csv(s, p.pattern); });
    if (sweep["write_patterns"].get<bool>())
      out.csv(dir + "pattern.csv", [&](std::ostream& s) { write_pattern_csv(s, p.pattern); });
    if (sweep["write_images"].get<bool>()) save_bfp_series(out, dir, p.pattern, config["bfp"]);
  }

  json optimum = {{"distance_nm", points[best].distance_nm},
                  {"collected_na", points[best].budget.weighted.collected_na}};
  for (const auto c : kAllComponents) {
    const auto& p = points[best_component[static_cast<int>(c)]];
    optimum["components"][to_string(c)] = {{"distance_nm", p.distance_nm},
                                           {"collected_na", p.budget.component(c).collected_na}};
  }
  json summary = {{"points", rows}, {"optimum", optimum}};
  if (reference) summary["reference_budget"] = budget_to_json(*reference);
  out.json_file("sweep.json", summary);
  out.csv("sweep.csv", [&](std::ostream& s) {
    s << "distance_nm,collected_na,collected_na_z,collected_na_x,collected_na_y,mirror_gain\n" << std::setprecision(12);
    for (std::size_t k = 0; k < points.size(); ++k) {
      const auto& b = points[k].budget;
      s << points[k].distance_nm << ',' << b.weighted.collected_na << ',' << b.component(DipoleComponent::z).collected_na
        << ',' << b.component(DipoleComponent::x).collected_na << ',' << b.component(DipoleComponent::y).collected_na
        << ',';
      if (reference) s << rows[k]["mirror_gain"].get<double>();
      s << '\n';
    }
  });
  return {warning, {{"optimum", optimum}}};
}

RunResult cmd_fit(const json& config, const Outputs& out) {
  const json& fit = config["fit"];
  if (!fit.contains("image")) throw ConfigError("/fit/image", "an image path is required (config or --image)");
  const LayerStack stack = build_stack(config["stack"]);
  const DipoleEmitter emitter = build_emitter(config, stack);
  const fs::path image_file = fit["image"].get<std::string>();
  fs::path metadata_file = image_file;
  metadata_file.replace_extension(".json");
  if (fit.contains("metadata")) metadata_file = fit["metadata"].get<std::string>();
  const BfpImage image = load_measurement(image_file, metadata_file);

  FitConfig cfg;
  cfg.theta_samples = config["grid"]["theta_samples"].get<std::size_t>();
  cfg.phi_samples = config["grid"]["phi_samples"].get<std::size_t>();
  cfg.radial_bins = fit["radial_bins"].get<std::size_t>();
  if (!fit["mask_theta_max_deg"].is_null()) cfg.mask.theta_max_deg = fit["mask_theta_max_deg"].get<double>();
  const FitResult result = full_fit(image, stack, emitter, cfg);
  const json report = fit_to_json(result);
  out.json_file("fit.json", {{"fit", report}});
  return {false, report};
}

RunResult cmd_photon(const json& config, const Outputs& out) {
  const json& section = config["photon"];
  const EmitterPhotophysics physics = photophysics(section);
  const auto seed = config["seed"].get<std::uint64_t>();
  TimestampStream stream;
  try {
    stream = simulate_source(physics, section["duration_s"].get<double>(), seed);
  } catch (const DomainError& e) {
    throw ConfigError("/photon/duration_s", e.what());
  }
  out.csv("stream.csv", [&](std::ostream& s) { write_stream_csv(s, stream); });

  json summary = {{"rng", "Philox4x32-10"},
                  {"seed", seed},
                  {"events", stream.events.size()},
                  {"duration_s", stream.duration_s},
                  {"noise_fraction", noise_fraction(physics.detection_efficiency)}};
  try {
    const G2Histogram g2 =
        g2_histogram(stream, section["g2_bin_width_ns"].get<double>(), section["g2_span_ns"].get<double>());
    out.csv("g2.csv", [&](std::ostream& s) { write_g2_csv(s, g2); });
    summary["g2"] = {{"center_ratio", g2.center_ratio},
                     {"center_area", g2.center_area},
                     {"side_peak_mean", g2.side_peak_mean},
                     {"side_peaks", g2.side_peaks}};
  } catch (const InsufficientDataError& e) {
    summary["g2"] = nullptr;
    summary["g2_note"] = e.what();
  } catch (const DomainError& e) {
    throw ConfigError("/photon/g2_span_ns", e.what());
  }
  TimeTrace trace;
  try {
    trace = time_trace(stream, section["trace_bin_width_ms"].get<double>());
  } catch (const DomainError& e) {
    throw ConfigError("/photon/trace_bin_width_ms", e.what());
  }
  out.csv("trace.csv", [&](std::ostream& s) { write_trace_csv(s, trace); });
  out.csv("intensity_histogram.csv", [&](std::ostream& s) { write_intensity_histogram_csv(s, trace); });
  out.json_file("photon.json", summary);
  return {false, summary};
}

json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("", "cannot read config file " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

json resolve_config(const json& raw, Command command) {
  require_valid(raw);
  json c = raw;
  if (!c.contains("stack"))
    c["stack"] = {{"preset", command == Command::sweep ? "metallo_dielectric_antenna" : "dielectric_antenna"}};
  json& stack = c["stack"];
  const bool metallo = stack.value("preset", "") == "metallo_dielectric_antenna";
  if (metallo) set_default(stack, "gap_nm", kDefaultGapNm);

  set_default(c, "emitter", json::object());
  set_default(c["emitter"], "host_layer", 1);
  set_default(c["emitter"], "z_offset_nm", presets::kEmitterHeightNm);
  set_default(c["emitter"], "weights", {{"axial", 0.31}, {"x", 0.345}, {"y", 0.345}});
  set_default(c, "na", kDefaultNa);
  set_default(c, "grid", json::object());
  set_default(c["grid"], "theta_samples", 1024);
  set_default(c["grid"], "phi_samples", 720);
  set_default(c, "seed", 1);
  set_default(c, "out", "out");

  auto bfp_defaults = [&] {
    set_default(c, "bfp", json::object());
    set_default(c["bfp"], "size", 256);
    set_default(c["bfp"], "na_limit", c["na"]);
    set_default(c["bfp"], "polarizer_angles_deg", json::array());
    set_default(c["bfp"], "format", "png");
  };

  switch (command) {
    case Command::pattern:
      break;
    case Command::bfp:
      bfp_defaults();
      break;
    case Command::sweep: {
      set_default(c, "sweep", json::object());
      json& s = c["sweep"];
      if (!s.contains("gap_layer")) {
        if (!metallo) throw ConfigError("/sweep", "gap_layer is required unless the stack is the metallo-dielectric preset");
        s["gap_layer"] = 2;
      }
      if (s.contains("range_nm")) {
        if (s.contains("distances_nm")) throw ConfigError("/sweep", "give either distances_nm or range_nm");
        const double a = s["range_nm"]["start"].get<double>(), b = s["range_nm"]["stop"].get<double>();
        const int n = s["range_nm"]["count"].get<int>();
        json d = json::array();
        for (int k = 0; k < n; ++k) d.push_back(n == 1 ? a : a + (b - a) * k / (n - 1));
        s["distances_nm"] = d;
        s.erase("range_nm");
      }
      set_default(s, "distances_nm", {225.0, 284.0, 355.0, 680.0});
      if (metallo) set_default(s, "reference_stack", {{"preset", "dielectric_antenna"}});
      set_default(s, "write_patterns", false);
      set_default(s, "write_images", false);
      if (s["write_images"].get<bool>()) bfp_defaults();
      break;
    }
    case Command::fit:
      set_default(c, "fit", json::object());
      set_default(c["fit"], "mask_theta_max_deg", kExperimentalMaskDeg);
      set_default(c["fit"], "radial_bins", 128);
      break;
    case Command::photon: {
      set_default(c, "photon", json::object());
      json& p = c["photon"];
      const json physics = photophysics_to_json(photophysics(p));
      for (const auto& [key, value] : physics.items()) set_default(p, key.c_str(), value);
      set_default(p, "duration_s", 1.0);
      set_default(p, "g2_bin_width_ns", 3.2);
      set_default(p, "g2_span_ns", 5.5e9 / p["rep_rate_hz"].get<double>());
      set_default(p, "trace_bin_width_ms", 1.0);
      break;
    }
  }
  require_valid(c);
  return c;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Planar metallo-dielectric antenna simulator", "mda"};
  app.require_subcommand(1);
  std::string config_path, out_dir, image, metadata;
  std::optional<std::uint64_t> seed;
  bool strict = false;
  std::size_t threads = 0;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_flag("--strict", strict, "exit with status 3 on numerical-accuracy warnings");
  app.add_option("--threads", threads, "worker threads, 0 for all cores");

  std::vector<std::pair<CLI::App*, Command>> subs;
  subs.push_back({app.add_subcommand("pattern", "angular pattern, profile and radiation budget"), Command::pattern});
  subs.push_back({app.add_subcommand("bfp", "back-focal-plane images"), Command::bfp});
  subs.push_back({app.add_subcommand("sweep", "mirror-distance sweep"), Command::sweep});
  auto* fit = app.add_subcommand("fit", "dipole-orientation fit of a measured image");
  fit->add_option("--image", image, "image file (PNG or PGM)");
  fit->add_option("--metadata", metadata, "JSON sidecar of the image");
  subs.push_back({fit, Command::fit});
  subs.push_back({app.add_subcommand("photon", "single-photon source statistics"), Command::photon});
  for (auto& s : subs) s.first->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return kExitConfig;
  }

  Command command = Command::pattern;
  for (const auto& s : subs)
    if (s.first->parsed()) command = s.second;
  set_thread_count(threads);

  json config;
  try {
    json raw = config_path.empty() ? json::object() : load_config_file(config_path);
    if (!out_dir.empty()) raw["out"] = out_dir;
    if (seed) raw["seed"] = *seed;
    if (command == Command::fit) {
      if (!raw.contains("fit")) raw["fit"] = json::object();
      if (!image.empty()) raw["fit"]["image"] = image;
      if (!metadata.empty()) raw["fit"]["metadata"] = metadata;
    }
    config = resolve_config(raw, command);
  } catch (const ConfigError& e) {
    err << json{{"error", "config"}, {"pointer", e.pointer()}, {"message", e.what()}}.dump() << '\n';
    return kExitConfig;
  }

  const Outputs outputs{config["out"].get<std::string>(), config, command_name(command)};
  try {
    fs::create_directories(outputs.dir);
    RunResult result;
    switch (command) {
      case Command::pattern: result = cmd_pattern(config, outputs); break;
      case Command::bfp: result = cmd_bfp(config, outputs); break;
      case Command::sweep: result = cmd_sweep(config, outputs); break;
      case Command::fit: result = cmd_fit(config, outputs); break;
      case Command::photon: result = cmd_photon(config, outputs); break;
    }
    out << result.summary.dump(2) << '\n';
    if (result.accuracy_warning) {
      err << json{{"warning", "accuracy"}, {"message", "u-integration tail estimate exceeds tolerance"}}.dump() << '\n';
      if (strict) return kExitAccuracy;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << json{{"error", "config"}, {"pointer", e.pointer()}, {"message", e.what()}}.dump() << '\n';
    return kExitConfig;
  } catch (const SchemaError& e) {
    err << json{{"error", "config"}, {"pointer", ""}, {"message", e.what()}}.dump() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << json{{"error", "runtime"}, {"message", e.what()}}.dump() << '\n';
    return kExitFailure;
  }
}

}  // namespace mda
