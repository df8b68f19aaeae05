#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "mda/bfp_imaging.hpp"
#include "mda/cli.hpp"
#include "mda/config_schema.hpp"

using namespace mda;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mda");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mda_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const json& config) {
  const fs::path file = dir / "config.json";
  std::ofstream(file) << config.dump(2);
  return file;
}

std::string slurp(const fs::path& file) {
  std::ifstream f(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& file) { return json::parse(slurp(file)); }

const json kSmallGrid = {{"theta_samples", 256}, {"phi_samples", 36}};

}  // namespace

TEST_CASE("schema validator") {
  const json schema = json::parse(R"({
    "type": "object", "additionalProperties": false, "required": ["a"],
    "properties": {
      "a": {"$ref": "#/$defs/p"},
      "b": {"type": ["string", "null"]},
      "c": {"type": "array", "minItems": 2, "items": {"type": "integer"}},
      "d": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"enum": ["auto"]}]}
    },
    "$defs": {"p": {"type": "number", "minimum": 0, "maximum": 1}}
  })");
  CHECK_FALSE(validate_schema(json{{"a", 0.5}}, schema));
  CHECK_FALSE(validate_schema(json{{"a", 1}, {"b", nullptr}, {"c", {1, 2}}, {"d", "auto"}}, schema));
  CHECK(validate_schema(json{{"b", "x"}}, schema)->pointer == "/");
  CHECK(validate_schema(json{{"a", 1.5}}, schema)->pointer == "/a");
  CHECK(validate_schema(json{{"a", 0.5}, {"z", 1}}, schema)->pointer == "/z");
  CHECK(validate_schema(json{{"a", 0.5}, {"b", 3}}, schema)->pointer == "/b");
  CHECK(validate_schema(json{{"a", 0.5}, {"c", {1}}}, schema)->pointer == "/c");
  CHECK(validate_schema(json{{"a", 0.5}, {"c", {1, 2.5}}}, schema)->pointer == "/c/1");
  CHECK(validate_schema(json{{"a", 0.5}, {"d", 0}}, schema));
  CHECK(validate_schema(json{{"a", 0.5}, {"d", "manual"}}, schema));
  CHECK(validate_schema(json::array(), schema)->pointer == "/");
}

TEST_CASE("resolved configuration") {
  for (const auto c : {Command::pattern, Command::bfp, Command::sweep, Command::fit, Command::photon}) {
    const json resolved = resolve_config(json::object(), c);
    CHECK_FALSE(validate_schema(resolved, run_config_schema()));
    CHECK(resolve_config(resolved, c) == resolved);
  }
  const json photon = resolve_config(json::object(), Command::photon);
  CHECK(photon["photon"]["g2_span_ns"].get<double>() == doctest::Approx(5500.0));
  CHECK(resolve_config(json::object(), Command::fit)["fit"]["mask_theta_max_deg"] == 62.0);
  const json sweep = resolve_config({{"sweep", {{"range_nm", {{"start", 200}, {"stop", 800}, {"count", 7}}}}}}, Command::sweep);
  CHECK(sweep["sweep"]["distances_nm"].size() == 7);
  CHECK(sweep["sweep"]["distances_nm"][6] == 800.0);
  CHECK_THROWS_AS(resolve_config({{"stack", {{"preset", "dielectric_antenna"}}}}, Command::sweep), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"photon", {{"quantum_yield", 2}}}}, Command::photon), ConfigError);
}

TEST_CASE("pattern command") {
  SUBCASE("uniform stack collects half the light at NA = n") {
    const auto dir = scratch("uniform");
    const json config = {{"stack",
                          {{"wavelength_nm", 637},
                           {"layers",
                            {{{"n", 1.5}, {"thickness_nm", "semi-infinite"}},
                             {{"n", 1.5}, {"thickness_nm", 400}},
                             {{"n", 1.5}, {"thickness_nm", "semi-infinite"}}}}}},
                         {"na", 1.5},
                         {"grid", kSmallGrid},
                         {"out", (dir / "out").string()}};
    const auto r = run({"pattern", "--config", write_config(dir, config).string()});
    REQUIRE(r.code == kExitOk);
    const json budget = read_json(dir / "out" / "budget.json");
    CHECK(budget["budget"]["weighted"]["collected_NA"].get<double>() == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(budget["config"]["na"] == 1.5);
  }
  SUBCASE("dielectric antenna, axial dipole") {
    const auto dir = scratch("antenna");
    const json config = {{"emitter", {{"weights", {{"axial", 1}, {"x", 0}, {"y", 0}}}}}, {"grid", kSmallGrid}};
    const auto r = run({"pattern", "--config", write_config(dir, config).string(), "--out", (dir / "out").string()});
    REQUIRE(r.code == kExitOk);
    const double leaked = json::parse(r.out)["weighted"]["leaked_top"].get<double>();
    CHECK(std::abs(leaked - 0.04) <= 0.015);
    CHECK(slurp(dir / "out" / "pattern.csv").rfind("# config: ", 0) == 0);
    CHECK(slurp(dir / "out" / "profile.csv").find("theta_deg,down,up") != std::string::npos);
  }
  SUBCASE("byte-identical reruns at any thread count") {
    const auto dir = scratch("determinism");
    const auto cfg = write_config(dir, {{"grid", kSmallGrid}});
    REQUIRE(run({"pattern", "--config", cfg.string(), "--out", (dir / "a").string(), "--threads", "1"}).code == 0);
    REQUIRE(run({"pattern", "--config", cfg.string(), "--out", (dir / "b").string(), "--threads", "4"}).code == 0);
    for (const char* f : {"pattern.csv", "profile.csv", "budget.json"}) {
      std::string a = slurp(dir / "a" / f), b = slurp(dir / "b" / f);
      const auto strip = [&](std::string s, const std::string& which) {
        for (std::size_t p; (p = s.find((dir / which).string())) != std::string::npos;) s.erase(p, (dir / which).string().size());
        return s;
      };
      CHECK(strip(a, "a") == strip(b, "b"));
    }
  }
  SUBCASE("strict mode escalates accuracy warnings") {
    const auto dir = scratch("strict");
    const json config = {{"stack", {{"preset", "metallo_dielectric_antenna"}, {"gap_nm", 10}}},
                         {"grid", {{"theta_samples", 64}, {"phi_samples", 8}, {"u_max", 1.8}}}};
    const auto cfg = write_config(dir, config).string();
    const auto lax = run({"pattern", "--config", cfg, "--out", (dir / "a").string()});
    CHECK(lax.code == kExitOk);
    CHECK(lax.err.find("accuracy") != std::string::npos);
    CHECK(run({"pattern", "--config", cfg, "--out", (dir / "b").string(), "--strict"}).code == kExitAccuracy);
  }
}

TEST_CASE("configuration errors") {
  const auto dir = scratch("errors");
  auto code_of = [&](const json& config, std::string* err = nullptr) {
    const auto r = run({"pattern", "--config", write_config(dir, config).string(), "--out", (dir / "o").string()});
    if (err) *err = r.err;
    return r.code;
  };
  std::string err;
  CHECK(code_of({{"na", "big"}}, &err) == kExitConfig);
  const json e = json::parse(err);
  CHECK(e["error"] == "config");
  CHECK(e["pointer"] == "/na");
  CHECK(code_of({{"unknown", 1}}) == kExitConfig);
  CHECK(code_of({{"emitter", {{"weights", {{"axial", 0.5}, {"x", 0.1}, {"y", 0.1}}}}}}) == kExitConfig);
  CHECK(code_of({{"emitter", {{"z_offset_nm", 900}}}}) == kExitConfig);
  CHECK(code_of({{"na", 2.5}}) == kExitConfig);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run({"pattern", "--config", (dir / "broken.json").string()}).code == kExitConfig);
  CHECK(run({"pattern", "--config", (dir / "missing.json").string()}).code == kExitConfig);
  CHECK(run({}).code == kExitConfig);
  CHECK(run({"fit", "--out", (dir / "o").string()}).code == kExitConfig);
}

TEST_CASE("bfp command") {
  const auto dir = scratch("bfp");
  const json base = {{"grid", {{"theta_samples", 256}, {"phi_samples", 72}}}};
  SUBCASE("thirty degree series") {
    json config = base;
    config["bfp"] = {{"size", 96}, {"polarizer_angles_deg", {0, 30, 60, 90, 120, 150}}};
    const auto r = run({"bfp", "--config", write_config(dir, config).string(), "--out", (dir / "s").string()});
    REQUIRE(r.code == kExitOk);
    std::size_t images = 0;
    for (const auto& f : fs::directory_iterator(dir / "s")) images += f.path().extension() == ".png";
    CHECK(images == 7);
    const BfpImage u = load_measurement(dir / "s" / "bfp_unpolarized.png", dir / "s" / "bfp_unpolarized.json");
    const BfpImage a = load_measurement(dir / "s" / "bfp_pol_0.png", dir / "s" / "bfp_pol_0.json");
    const BfpImage b = load_measurement(dir / "s" / "bfp_pol_90.png", dir / "s" / "bfp_pol_90.json");
    REQUIRE(a.polarizer_deg);
    CHECK(*a.polarizer_deg == 0.0);
    const auto scale = [&](const char* stem) {
      return read_json(dir / "s" / (std::string(stem) + ".json"))["intensity_scale"].get<double>();
    };
    // Half a quantisation step per stored image.
    const double tol = 0.5 * (scale("bfp_unpolarized") + scale("bfp_pol_0") + scale("bfp_pol_90")) * (1 + 1e-9);
    double worst = 0.0;
    for (std::size_t k = 0; k < u.pixels.size(); ++k)
      worst = std::max(worst, std::abs(a.pixels[k] + b.pixels[k] - u.pixels[k]));
    CHECK(worst <= tol);
    CHECK(read_json(dir / "s" / "bfp_pol_30.json").contains("config"));
  }
  SUBCASE("empty angle list") {
    json config = base;
    config["bfp"] = {{"size", 64}, {"format", "pgm"}};
    REQUIRE(run({"bfp", "--config", write_config(dir, config).string(), "--out", (dir / "e").string()}).code == 0);
    std::vector<std::string> names;
    for (const auto& f : fs::directory_iterator(dir / "e")) names.push_back(f.path().filename().string());
    std::sort(names.begin(), names.end());
    CHECK(names == std::vector<std::string>{"bfp_unpolarized.json", "bfp_unpolarized.pgm"});
  }
}

TEST_CASE("sweep command") {
  const auto dir = scratch("sweep");
  SUBCASE("four mirror distances give four result sets") {
    const auto r = run({"sweep", "--config", write_config(dir, {{"grid", kSmallGrid}}).string(), "--out",
                        (dir / "four").string()});
    REQUIRE(r.code == kExitOk);
    const json s = read_json(dir / "four" / "sweep.json");
    REQUIRE(s["points"].size() == 4);
    for (const char* d : {"d_225", "d_284", "d_355", "d_680"}) CHECK(fs::exists(dir / "four" / d / "profile.csv"));
    CHECK(s["points"][0].contains("mirror_gain"));
    double best = 0.0;
    for (const auto& p : s["points"]) best = std::max(best, p["budget"]["weighted"]["collected_NA"].get<double>());
    CHECK(s["optimum"]["collected_na"].get<double>() == best);
  }
  SUBCASE("one distance equals the pattern command with that mirror") {
    const json sweep = {{"grid", kSmallGrid}, {"sweep", {{"distances_nm", {355}}}}};
    REQUIRE(run({"sweep", "--config", write_config(dir, sweep).string(), "--out", (dir / "one").string()}).code == 0);
    const json pattern = {{"grid", kSmallGrid}, {"stack", {{"preset", "metallo_dielectric_antenna"}, {"gap_nm", 355}}}};
    REQUIRE(run({"pattern", "--config", write_config(dir, pattern).string(), "--out", (dir / "pat").string()}).code == 0);
    const json a = read_json(dir / "one" / "sweep.json")["points"][0]["budget"];
    const json b = read_json(dir / "pat" / "budget.json")["budget"];
    CHECK(a == b);
    const std::string pa = slurp(dir / "one" / "d_355" / "profile.csv"), pb = slurp(dir / "pat" / "profile.csv");
    CHECK(pa.substr(pa.find('\n')) == pb.substr(pb.find('\n')));
  }
}

TEST_CASE("fit command recovers the weights of a rendered image") {
  const auto dir = scratch("fit");
  const json render = {{"grid", {{"theta_samples", 512}, {"phi_samples", 72}}},
                       {"emitter", {{"weights", {{"axial", 0.44}, {"x", 0.21}, {"y", 0.35}}}}},
                       {"bfp", {{"size", 128}}}};
  REQUIRE(run({"bfp", "--config", write_config(dir, render).string(), "--out", (dir / "img").string()}).code == 0);
  json fit = render;
  fit.erase("bfp");
  fit["fit"] = {{"mask_theta_max_deg", nullptr}, {"radial_bins", 64}};
  const auto r = run({"fit", "--config", write_config(dir, fit).string(), "--image",
                      (dir / "img" / "bfp_unpolarized.png").string(), "--out", (dir / "res").string()});
  REQUIRE(r.code == kExitOk);
  const json w = read_json(dir / "res" / "fit.json")["fit"]["weights"];
  CHECK(std::abs(w["axial"].get<double>() - 0.44) < 1e-3);
  CHECK(std::abs(w["x"].get<double>() - 0.21) < 1e-3);
  CHECK(std::abs(w["y"].get<double>() - 0.35) < 1e-3);
  CHECK(run({"fit", "--image", (dir / "none.png").string(), "--out", (dir / "res").string()}).code == kExitFailure);
}

TEST_CASE("photon command") {
  const auto dir = scratch("photon");
  SUBCASE("ideal emitter") {
    const json config = {{"photon", {{"duration_s", 0.05}, {"rep_rate_hz", 1e6}, {"trace_bin_width_ms", 0.1}}}, {"seed", 4}};
    const auto r = run({"photon", "--config", write_config(dir, config).string(), "--out", (dir / "a").string()});
    REQUIRE(r.code == kExitOk);
    const json s = read_json(dir / "a" / "photon.json");
    CHECK(s["events"] == 50000);
    CHECK(s["g2"]["center_ratio"] == 0.0);
    CHECK(s["rng"] == "Philox4x32-10");
    CHECK(s["config"]["seed"] == 4);
    for (const char* f : {"stream.csv", "g2.csv", "trace.csv", "intensity_histogram.csv"}) {
      const std::string text = slurp(dir / "a" / f);
      CHECK(text.rfind("# config: ", 0) == 0);
    }
  }
  SUBCASE("seed flag and determinism") {
    const json config = {{"photon", {{"duration_s", 0.02}, {"p_biexciton", 0.3}, {"detection_efficiency", 0.5}, {"trace_bin_width_ms", 0.1}}}};
    const auto cfg = write_config(dir, config).string();
    REQUIRE(run({"photon", "--config", cfg, "--out", (dir / "x").string(), "--seed", "9", "--threads", "1"}).code == 0);
    REQUIRE(run({"photon", "--config", cfg, "--out", (dir / "x2").string(), "--seed", "9"}).code == 0);
    REQUIRE(run({"photon", "--config", cfg, "--out", (dir / "y").string(), "--seed", "10"}).code == 0);
    const auto body = [&](const char* d) {
      const std::string t = slurp(dir / d / "stream.csv");
      return t.substr(t.find('\n'));
    };
    CHECK(body("x") == body("x2"));
    CHECK(body("x") != body("y"));
  }
  SUBCASE("zero yield yields no g2") {
    const json config = {{"photon", {{"duration_s", 0.01}, {"quantum_yield", 0}, {"trace_bin_width_ms", 0.1}}}};
    const auto r = run({"photon", "--config", write_config(dir, config).string(), "--out", (dir / "z").string()});
    REQUIRE(r.code == kExitOk);
    CHECK(read_json(dir / "z" / "photon.json")["g2"].is_null());
  }
  SUBCASE("too short for a trace") {
    const json config = {{"photon", {{"duration_s", 0.01}, {"trace_bin_width_ms", 1.0}}}};
    CHECK(run({"photon", "--config", write_config(dir, config).string(), "--out", (dir / "t").string()}).code ==
          kExitConfig);
  }
}

TEST_CASE("shipped configurations resolve") {
  const std::vector<std::pair<std::string, Command>> files = {
      {"antenna_pattern.json", Command::pattern},   {"bfp_polarizer_series.json", Command::bfp},
      {"mirror_sweep.json", Command::sweep},      {"design_sweep.json", Command::sweep},
      {"fit_measurement.json", Command::fit},     {"photon_low_power.json", Command::photon},
      {"photon_high_power.json", Command::photon}};
  for (const auto& [name, command] : files) {
    CAPTURE(name);
    const json raw = read_json(fs::path(MDA_SOURCE_DIR) / "configs" / name);
    CHECK_NOTHROW(resolve_config(raw, command));
  }
}
