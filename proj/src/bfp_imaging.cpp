#include "mda/bfp_imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include "mda/error.hpp"
#include "mda/parallel.hpp"

namespace mda {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMaxLevel = 65535.0;

double quantization_scale(const BfpImage& image) {
  double peak = 0.0;
  for (double v : image.pixels) peak = std::max(peak, v);
  return peak > 0.0 ? peak / kMaxLevel : 1.0;
}

std::vector<std::uint16_t> to_levels(const BfpImage& image, double scale) {
  std::vector<std::uint16_t> levels(image.pixels.size());
  for (std::size_t k = 0; k < levels.size(); ++k)
    levels[k] = static_cast<std::uint16_t>(std::clamp(std::round(image.pixels[k] / scale), 0.0, kMaxLevel));
  return levels;
}

void write_pgm(const std::filesystem::path& path, const std::vector<std::uint16_t>& levels, std::size_t size) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << size << ' ' << size << "\n65535\n";
  for (std::uint16_t v : levels) {
    const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(bytes, 2);
  }
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint16_t> levels;
};

RawImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
      } else {
        t.push_back(c);
      }
    }
    return t;
  };
  if (token() != "P5") throw ImageFormatError("'" + path.string() + "' is not a binary PGM");
  RawImage raw;
  try {
    raw.width = std::stoul(token());
    raw.height = std::stoul(token());
    if (std::stoul(token()) != 65535) throw ImageFormatError("'" + path.string() + "' is not a 16-bit PGM");
  } catch (const std::logic_error&) {
    throw ImageFormatError("malformed PGM header in '" + path.string() + "'");
  }
  raw.levels.resize(raw.width * raw.height);
  for (auto& v : raw.levels) {
    unsigned char bytes[2];
    if (!in.read(reinterpret_cast<char*>(bytes), 2)) throw ImageFormatError("truncated PGM '" + path.string() + "'");
    v = static_cast<std::uint16_t>((bytes[0] << 8) | bytes[1]);
  }
  return raw;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

void write_png(const std::filesystem::path& path, const std::vector<std::uint16_t>& levels, std::size_t size) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error("cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng initialisation failed");
  }
  std::vector<png_byte> row(2 * size);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  const auto dim = static_cast<png_uint_32>(size);
  png_set_IHDR(png, info, dim, dim, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t j = 0; j < size; ++j) {
    for (std::size_t i = 0; i < size; ++i) {
      const std::uint16_t v = levels[j * size + i];
      row[2 * i] = static_cast<png_byte>(v >> 8);
      row[2 * i + 1] = static_cast<png_byte>(v & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RawImage read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error("cannot open '" + path.string() + "'");
  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0)
    throw ImageFormatError("'" + path.string() + "' is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng initialisation failed");
  }
  RawImage raw;
  std::vector<png_byte> row;
  volatile bool wrong_format = false;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageFormatError("libpng failed reading '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  if (png_get_bit_depth(png, info) != 16 || png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY ||
      png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    wrong_format = true;
  } else {
    raw.width = png_get_image_width(png, info);
    raw.height = png_get_image_height(png, info);
    raw.levels.resize(raw.width * raw.height);
    row.resize(png_get_rowbytes(png, info));
    for (std::size_t j = 0; j < raw.height; ++j) {
      png_read_row(png, row.data(), nullptr);
      for (std::size_t i = 0; i < raw.width; ++i)
        raw.levels[j * raw.width + i] = static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1]);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (wrong_format) throw ImageFormatError("'" + path.string() + "' is not a single-channel 16-bit PNG");
  return raw;
}

bool is_png(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

double required_number(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_number())
    throw SchemaError(std::string("image metadata: '") + key + "' (number) is required");
  return doc[key].get<double>();
}

}  // namespace

void BfpGeometry::validate() const {
  if (size < 32) throw GeometryError("BFP grid size must be at least 32");
  if (!(pixel_pitch > 0.0) || !std::isfinite(pixel_pitch)) throw GeometryError("pixel pitch must be positive");
  const double last = static_cast<double>(size - 1);
  if (!(center_x >= 0.0 && center_x <= last && center_y >= 0.0 && center_y <= last))
    throw GeometryError("BFP centre lies outside the image");
  if (!(n1 > 0.0)) throw DomainError("collection index must be positive");
  if (!(na_limit > 0.0)) throw InvalidApertureError("na_limit must be positive");
  if (na_limit > n1) throw InvalidApertureError("na_limit exceeds the collection-medium index");
}

BfpGeometry centered_geometry(std::size_t size, double na_limit, double n1) {
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  BfpGeometry g{size, 2.0 * na_limit / static_cast<double>(size), c, c, na_limit, n1};
  g.validate();
  return g;
}

double BfpImage::total() const {
  double sum = 0.0;
  for (double v : pixels) sum += v;
  return sum;
}

double normalize_polarizer(double degrees) {
  if (!std::isfinite(degrees)) throw DomainError("polarizer angle must be finite");
  double a = std::fmod(degrees, 360.0);
  if (a < 0.0) a += 360.0;
  return a == 360.0 ? 0.0 : a;
}

ComponentFields render_fields(const AngularPattern& pattern, const BfpGeometry& geometry,
                              const std::function<double(double)>& transmission) {
  geometry.validate();
  if (std::abs(geometry.n1 - pattern.medium_index(HalfSpace::down)) > 1e-12)
    throw GeometryError("image n1 differs from the pattern's collection medium");
  const std::size_t n = geometry.size;
  ComponentFields out{geometry, {}};
  for (auto& f : out.field) f.assign(n * n, {cplx(0.0), cplx(0.0)});

  parallel_for(n, [&](std::size_t j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double x = geometry.x(i), y = geometry.y(j);
      const double rho = std::hypot(x, y);
      if (rho > geometry.na_limit) continue;
      const double sin_t = rho / geometry.n1;
      const double cos_t = std::sqrt(std::max(0.0, 1.0 - sin_t * sin_t));
      if (cos_t <= 0.0) continue;
      const double theta = std::asin(sin_t);
      const double phi = std::atan2(y, x);
      const double t = transmission ? transmission(theta) : 1.0;
      if (t < 0.0) throw DomainError("objective transmission must be non-negative");
      const double scale = std::sqrt(geometry.pixel_pitch * geometry.pixel_pitch * t /
                                     (geometry.n1 * geometry.n1 * cos_t));
      const double c = std::cos(phi), s = std::sin(phi);
      for (const auto comp : kAllComponents) {
        const FarField f = pattern.amplitude_at(HalfSpace::down, comp, theta, phi);
        // s along the azimuthal unit vector (-sin, cos), p along the radial one.
        const cplx ex = scale * (-f.s * s - f.p * c);
        const cplx ey = scale * (f.s * c - f.p * s);
        out.field[static_cast<int>(comp)][j * n + i] = {ex, ey};
      }
    }
  });
  return out;
}

BfpImage image_from_fields(const ComponentFields& fields, const DipoleWeights& weights,
                           std::optional<double> polarizer_deg) {
  weights.validate();
  BfpImage image{fields.geometry, std::vector<double>(fields.geometry.size * fields.geometry.size, 0.0),
                 std::nullopt};
  double ax = 0.0, ay = 0.0;
  if (polarizer_deg) {
    image.polarizer_deg = normalize_polarizer(*polarizer_deg);
    // Projection depends on the axis only; fold to [0, 180) so alpha and alpha + 180 agree bit for bit.
    const double axis = std::fmod(*image.polarizer_deg, 180.0) * kPi / 180.0;
    ax = std::cos(axis);
    ay = std::sin(axis);
  }
  for (const auto comp : kAllComponents) {
    const double w = weights[comp];
    if (w == 0.0) continue;
    const auto& f = fields.field[static_cast<int>(comp)];
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double v = polarizer_deg ? std::norm(ax * f[k][0] + ay * f[k][1]) : std::norm(f[k][0]) + std::norm(f[k][1]);
      image.pixels[k] += w * v;
    }
  }
  return image;
}

BfpImage render_bfp(const AngularPattern& pattern, std::size_t grid_size, double na_limit,
                    std::optional<double> polarizer_deg, const RenderOptions& options) {
  const double n1 = pattern.medium_index(HalfSpace::down);
  if (na_limit > n1) throw InvalidApertureError("na_limit exceeds the collection-medium index");
  BfpGeometry geometry = options.geometry.value_or(centered_geometry(grid_size, na_limit, n1));
  if (geometry.size != grid_size || geometry.na_limit != na_limit)
    throw GeometryError("render geometry disagrees with grid_size / na_limit");
  const ComponentFields fields = render_fields(pattern, geometry, options.transmission);
  return image_from_fields(fields, pattern.weights(), polarizer_deg);
}

RadialProfile phi_integrate_image(const BfpImage& image, std::size_t radial_bins) {
  const BfpGeometry& g = image.geometry;
  g.validate();
  if (radial_bins == 0) throw DomainError("radial_bins must be positive");
  if (image.pixels.size() != g.size * g.size) throw GeometryError("pixel buffer does not match the grid size");
  const double d_rho = g.na_limit / static_cast<double>(radial_bins);
  std::vector<double> sum(radial_bins, 0.0);
  std::vector<std::size_t> count(radial_bins, 0);
  for (std::size_t j = 0; j < g.size; ++j) {
    for (std::size_t i = 0; i < g.size; ++i) {
      const double rho = std::hypot(g.x(i), g.y(j));
      if (rho > g.na_limit) continue;
      const auto k = std::min(static_cast<std::size_t>(rho / d_rho), radial_bins - 1);
      sum[k] += image.at(i, j);
      ++count[k];
    }
  }
  RadialProfile profile(radial_bins);
  for (std::size_t k = 0; k < radial_bins; ++k) {
    const double lo = d_rho * static_cast<double>(k);
    const double hi = d_rho * static_cast<double>(k + 1);
    RadialBin& b = profile[k];
    b.theta_lo = std::asin(std::min(1.0, lo / g.n1));
    b.theta_hi = std::asin(std::min(1.0, hi / g.n1));
    b.theta = std::asin(std::min(1.0, 0.5 * (lo + hi) / g.n1));
    if (count[k] == 0) {
      b.value = 0.0;
      continue;
    }
    // Mean pixel density times the exact annulus area: the BFP power of the bin.
    const double mean_density = sum[k] / static_cast<double>(count[k]) / (g.pixel_pitch * g.pixel_pitch);
    const double power = mean_density * kPi * (hi * hi - lo * lo);
    b.value = power / (b.theta_hi - b.theta_lo);
  }
  return profile;
}

BfpImage rotate_image(const BfpImage& image, double degrees) {
  const BfpGeometry& g = image.geometry;
  const double folded = normalize_polarizer(degrees);
  double c = std::cos(folded * kPi / 180.0), s = std::sin(folded * kPi / 180.0);
  if (folded == 0.0) c = 1.0, s = 0.0;
  if (folded == 90.0) c = 0.0, s = 1.0;
  if (folded == 180.0) c = -1.0, s = 0.0;
  if (folded == 270.0) c = 0.0, s = -1.0;
  BfpImage out{g, std::vector<double>(image.pixels.size(), 0.0), std::nullopt};
  if (image.polarizer_deg) out.polarizer_deg = normalize_polarizer(*image.polarizer_deg + degrees);
  const auto n = static_cast<long>(g.size);
  for (std::size_t j = 0; j < g.size; ++j) {
    for (std::size_t i = 0; i < g.size; ++i) {
      const double xr = static_cast<double>(i) - g.center_x, yr = static_cast<double>(j) - g.center_y;
      // Inverse rotation gives the source position.
      const double xs = g.center_x + c * xr + s * yr;
      const double ys = g.center_y - s * xr + c * yr;
      const double fx = std::floor(xs), fy = std::floor(ys);
      const auto i0 = static_cast<long>(fx), j0 = static_cast<long>(fy);
      const double tx = xs - fx, ty = ys - fy;
      auto px = [&](long ii, long jj) {
        if (ii < 0 || jj < 0 || ii >= n || jj >= n) return 0.0;
        return image.at(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj));
      };
      double v = px(i0, j0);
      if (tx != 0.0 || ty != 0.0) {
        v = (1 - tx) * (1 - ty) * px(i0, j0) + tx * (1 - ty) * px(i0 + 1, j0) + (1 - tx) * ty * px(i0, j0 + 1) +
            tx * ty * px(i0 + 1, j0 + 1);
      }
      out.pixels[j * g.size + i] = v;
    }
  }
  return out;
}

BfpImage quantize(const BfpImage& image) {
  const double scale = quantization_scale(image);
  const auto levels = to_levels(image, scale);
  BfpImage out = image;
  for (std::size_t k = 0; k < levels.size(); ++k) out.pixels[k] = static_cast<double>(levels[k]) * scale;
  return out;
}

nlohmann::json metadata_to_json(const BfpImage& image, double intensity_scale) {
  const BfpGeometry& g = image.geometry;
  nlohmann::json meta{{"pixel_pitch", g.pixel_pitch}, {"center_x", g.center_x}, {"center_y", g.center_y},
                      {"na_limit", g.na_limit},       {"n1", g.n1},             {"intensity_scale", intensity_scale}};
  meta["polarizer_deg"] = image.polarizer_deg ? nlohmann::json(*image.polarizer_deg) : nlohmann::json(nullptr);
  return meta;
}

void save_image(const BfpImage& image, const std::filesystem::path& image_file,
                const std::filesystem::path& metadata_file, const nlohmann::json& extra) {
  image.geometry.validate();
  const double scale = quantization_scale(image);
  const auto levels = to_levels(image, scale);
  if (is_png(image_file))
    write_png(image_file, levels, image.geometry.size);
  else
    write_pgm(image_file, levels, image.geometry.size);
  nlohmann::json meta = metadata_to_json(image, scale);
  for (const auto& [key, value] : extra.items()) meta[key] = value;
  std::ofstream out(metadata_file);
  if (!out) throw Error("cannot open '" + metadata_file.string() + "' for writing");
  out << meta.dump(2) << '\n';
}

BfpImage load_measurement(const std::filesystem::path& image_file, const std::filesystem::path& metadata_file) {
  std::ifstream in(metadata_file);
  if (!in) throw Error("cannot open '" + metadata_file.string() + "'");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("image metadata is not valid JSON: " + std::string(e.what()));
  }
  if (!meta.is_object()) throw SchemaError("image metadata must be a JSON object");
  BfpGeometry g;
  g.pixel_pitch = required_number(meta, "pixel_pitch");
  g.center_x = required_number(meta, "center_x");
  g.center_y = required_number(meta, "center_y");
  g.na_limit = required_number(meta, "na_limit");
  g.n1 = required_number(meta, "n1");
  if (!meta.contains("polarizer_deg") || !(meta["polarizer_deg"].is_null() || meta["polarizer_deg"].is_number()))
    throw SchemaError("image metadata: 'polarizer_deg' (number or null) is required");
  double scale = 1.0;
  if (meta.contains("intensity_scale")) scale = required_number(meta, "intensity_scale");
  if (g.na_limit > g.n1) throw InvalidApertureError("metadata na_limit exceeds n1");

  const RawImage raw = is_png(image_file) ? read_png(image_file) : read_pgm(image_file);
  if (raw.width != raw.height) throw GeometryError("BFP images must be square");
  g.size = raw.width;
  g.validate();

  BfpImage image{g, std::vector<double>(raw.levels.size()), std::nullopt};
  for (std::size_t k = 0; k < raw.levels.size(); ++k) image.pixels[k] = static_cast<double>(raw.levels[k]) * scale;
  if (meta["polarizer_deg"].is_number()) image.polarizer_deg = normalize_polarizer(meta["polarizer_deg"].get<double>());
  return image;
}

}  // namespace mda
