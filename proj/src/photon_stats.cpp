#include "mda/photon_stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "mda/error.hpp"
#include "mda/parallel.hpp"
#include "mda/random.hpp"

namespace mda {

namespace {

// Stream identifiers (low counter word) of the independent Philox streams.
constexpr std::uint32_t kPulseStream = 0;
constexpr std::uint32_t kFlickerStream = 1;
constexpr std::uint32_t kDarkStream = 2;  // + detector
constexpr std::uint32_t kPoissonStream = 4;  // + detector
constexpr std::size_t kChunks = 256;

struct Switch {
  double time_s;
  std::size_t state;
};

std::vector<Switch> flicker_trajectory(const EmitterPhotophysics& p, double end_s, std::uint64_t seed) {
  const auto& states = p.flicker_states;
  if (states.size() == 1) return {{0.0, 0}};
  PhiloxStream rng(seed, 0, kFlickerStream);
  // Initial state drawn in proportion to the dwell time.
  double total_dwell = 0.0;
  for (const auto& s : states) total_dwell += s.mean_dwell_s;
  double pick = rng.uniform() * total_dwell;
  std::size_t state = 0;
  while (state + 1 < states.size() && pick >= states[state].mean_dwell_s) pick -= states[state++].mean_dwell_s;

  std::vector<Switch> path{{0.0, state}};
  double t = 0.0;
  while (true) {
    t += rng.exponential(states[state].mean_dwell_s);
    if (t >= end_s) break;
    auto next = static_cast<std::size_t>(rng.uniform() * static_cast<double>(states.size() - 1));
    next = std::min(next, states.size() - 2);
    if (next >= state) ++next;
    state = next;
    path.push_back({t, state});
  }
  return path;
}

void add_poisson(std::vector<PhotonEvent>& events, double rate_hz, double duration_s, Detector d, PhiloxStream rng) {
  if (rate_hz <= 0.0) return;
  double t = rng.exponential(1.0 / rate_hz);
  while (t < duration_s) {
    events.push_back({t, d});
    t += rng.exponential(1.0 / rate_hz);
  }
}

void sort_events(std::vector<PhotonEvent>& events) {
  std::stable_sort(events.begin(), events.end(), [](const PhotonEvent& a, const PhotonEvent& b) {
    return a.time_s < b.time_s || (a.time_s == b.time_s && a.detector < b.detector);
  });
}

bool probability(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void EmitterPhotophysics::validate() const {
  if (!(rep_rate_hz > 0.0) || !std::isfinite(rep_rate_hz)) throw DomainError("rep_rate_hz must be positive");
  if (!(lifetime_ns > 0.0)) throw DomainError("lifetime_ns must be positive");
  if (!probability(quantum_yield)) throw DomainError("quantum_yield must lie in [0, 1]");
  if (!probability(p_biexciton)) throw DomainError("p_biexciton must lie in [0, 1]");
  if (!probability(detection_efficiency)) throw DomainError("detection_efficiency must lie in [0, 1]");
  if (biexciton_lifetime_ns && !(*biexciton_lifetime_ns > 0.0))
    throw DomainError("biexciton_lifetime_ns must be positive");
  if (multiexciton_order < 1) throw DomainError("multiexciton_order must be >= 1");
  if (flicker_states.empty()) throw DomainError("at least one flicker state is required");
  for (const auto& s : flicker_states) {
    if (!(s.brightness > 0.0 && s.brightness <= 1.0)) throw DomainError("flicker brightness must lie in (0, 1]");
    if (!(s.mean_dwell_s > 0.0)) throw DomainError("flicker dwell times must be positive");
  }
  if (!(detector.dark_count_rate_hz >= 0.0)) throw DomainError("dark_count_rate_hz must be non-negative");
  if (!(detector.dead_time_ns >= 0.0)) throw DomainError("dead_time_ns must be non-negative");
}

TimestampStream simulate_source(const EmitterPhotophysics& p, double duration_s, std::uint64_t seed) {
  p.validate();
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw DomainError("duration must be positive");
  const auto pulses = static_cast<std::uint64_t>(std::floor(duration_s * p.rep_rate_hz + 1e-9));
  if (pulses < 10) throw DomainError("the duration must cover at least 10 pulses");
  const double period = 1.0 / p.rep_rate_hz;
  const std::vector<Switch> path = flicker_trajectory(p, duration_s, seed);

  const double tau = p.lifetime_ns * 1e-9;
  const double tau_bx = p.biexciton_lifetime() * 1e-9;
  const std::size_t chunks = static_cast<std::size_t>(std::min<std::uint64_t>(kChunks, pulses));
  std::vector<std::vector<PhotonEvent>> parts(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    const std::uint64_t begin = pulses * c / chunks, end = pulses * (c + 1) / chunks;
    auto& out = parts[c];
    std::size_t seg = 0;
    for (std::uint64_t k = begin; k < end; ++k) {
      const double t0 = static_cast<double>(k) * period;
      if (k == begin) {
        seg = static_cast<std::size_t>(std::upper_bound(path.begin(), path.end(), t0,
                                                        [](double t, const Switch& s) { return t < s.time_s; }) -
                                       path.begin()) - 1;
      }
      while (seg + 1 < path.size() && path[seg + 1].time_s <= t0) ++seg;
      const double brightness = p.flicker_states[path[seg].state].brightness;

      PhiloxStream rng(seed, k, kPulseStream);
      auto emit = [&](double delay) {
        if (rng.uniform() >= p.detection_efficiency) return;
        out.push_back({t0 + delay, rng.uniform() < 0.5 ? Detector::A : Detector::B});
      };
      if (rng.uniform() < p.quantum_yield * brightness) emit(rng.exponential(tau));
      for (int order = 1; order <= p.multiexciton_order; ++order) {
        if (rng.uniform() >= p.p_biexciton) break;
        emit(rng.exponential(tau_bx * 2.0 / (order + 1)));
      }
    }
  });

  TimestampStream stream;
  stream.seed = seed;
  stream.rep_rate_hz = p.rep_rate_hz;
  for (auto& part : parts) stream.events.insert(stream.events.end(), part.begin(), part.end());
  for (const Detector d : {Detector::A, Detector::B})
    add_poisson(stream.events, p.detector.dark_count_rate_hz, duration_s, d,
                PhiloxStream(seed, 0, kDarkStream + static_cast<std::uint32_t>(d)));
  sort_events(stream.events);

  if (p.detector.dead_time_ns > 0.0) {
    const double dead = p.detector.dead_time_ns * 1e-9;
    double last[2] = {-1e300, -1e300};
    std::vector<PhotonEvent> kept;
    kept.reserve(stream.events.size());
    for (const auto& e : stream.events) {
      double& l = last[static_cast<int>(e.detector)];
      if (e.time_s - l < dead) continue;
      l = e.time_s;
      kept.push_back(e);
    }
    stream.events = std::move(kept);
  }
  stream.duration_s = stream.events.empty() ? duration_s : std::max(duration_s, stream.events.back().time_s);
  return stream;
}

TimestampStream poisson_stream(double rate_hz, double duration_s, double rep_rate_hz, std::uint64_t seed) {
  if (!(rate_hz >= 0.0) || !(duration_s > 0.0) || !(rep_rate_hz > 0.0))
    throw DomainError("poisson_stream: rates and duration must be positive");
  TimestampStream stream;
  stream.seed = seed;
  stream.rep_rate_hz = rep_rate_hz;
  stream.duration_s = duration_s;
  for (const Detector d : {Detector::A, Detector::B})
    add_poisson(stream.events, rate_hz, duration_s, d, PhiloxStream(seed, 0, kPoissonStream + static_cast<std::uint32_t>(d)));
  sort_events(stream.events);
  return stream;
}

double G2Histogram::bin_center_ns(std::size_t k) const {
  const double half = std::round(span_ns / bin_width_ns);
  return (static_cast<double>(k) - half) * bin_width_ns;
}

long g2_bin_index(double tau_ns, double bin_width_ns, double span_ns) {
  if (std::abs(tau_ns) > span_ns) return -1;
  const auto half = static_cast<long>(std::llround(span_ns / bin_width_ns));
  const long idx = static_cast<long>(std::floor(tau_ns / bin_width_ns + 0.5)) + half;
  return (idx < 0 || idx > 2 * half) ? -1 : idx;
}

G2Histogram g2_histogram(const TimestampStream& stream, double bin_width_ns, double span_ns) {
  if (!(bin_width_ns > 0.0) || !(span_ns >= bin_width_ns)) throw DomainError("need bin_width > 0 and span >= bin_width");
  if (!(stream.rep_rate_hz > 0.0)) throw DomainError("the stream carries no pulse clock");
  std::vector<double> a, b;
  for (const auto& e : stream.events) (e.detector == Detector::A ? a : b).push_back(e.time_s);
  if (a.empty() || b.empty()) throw InsufficientDataError("g2 needs events on both detectors");

  const double period_ns = 1e9 / stream.rep_rate_hz;
  const int side = static_cast<int>(std::floor(span_ns / period_ns - 0.5));
  if (side < 1) throw DomainError("the g2 span must include at least one side peak");

  G2Histogram h;
  h.bin_width_ns = bin_width_ns;
  h.span_ns = span_ns;
  h.side_peaks = side;
  const auto half = static_cast<std::size_t>(std::llround(span_ns / bin_width_ns));
  h.counts.assign(2 * half + 1, 0);
  std::vector<double> peaks(static_cast<std::size_t>(2 * side + 1), 0.0);

  std::size_t lo = 0;
  for (const double ta : a) {
    while (lo < b.size() && (b[lo] - ta) * 1e9 < -span_ns) ++lo;
    for (std::size_t j = lo; j < b.size(); ++j) {
      const double tau = (b[j] - ta) * 1e9;
      if (tau > span_ns) break;
      const long idx = g2_bin_index(tau, bin_width_ns, span_ns);
      if (idx >= 0) ++h.counts[static_cast<std::size_t>(idx)];
      const long m = std::lround(tau / period_ns);
      if (std::abs(m) <= side && std::abs(tau - static_cast<double>(m) * period_ns) < 0.5 * period_ns)
        peaks[static_cast<std::size_t>(m + side)] += 1.0;
    }
  }
  h.center_area = peaks[static_cast<std::size_t>(side)];
  double sum = 0.0;
  for (int m = -side; m <= side; ++m)
    if (m != 0) sum += peaks[static_cast<std::size_t>(m + side)];
  h.side_peak_mean = sum / (2.0 * side);
  if (h.side_peak_mean <= 0.0) throw InsufficientDataError("no coincidences in the side peaks");
  h.center_ratio = h.center_area / h.side_peak_mean;
  return h;
}

TimeTrace time_trace(const TimestampStream& stream, double bin_width_ms) {
  if (!(bin_width_ms > 0.0)) throw DomainError("bin width must be positive");
  const double duration_ms = stream.duration_s * 1e3;
  const auto bins = static_cast<std::size_t>(std::ceil(duration_ms / bin_width_ms - 1e-9));
  if (bins < 100) throw DomainError("the trace needs at least 100 bins");
  TimeTrace trace;
  trace.bin_width_ms = bin_width_ms;
  trace.counts.assign(bins, 0);
  for (const auto& e : stream.events) {
    const auto k = std::min(static_cast<std::size_t>(e.time_s * 1e3 / bin_width_ms), bins - 1);
    ++trace.counts[k];
  }
  const std::uint64_t peak = *std::max_element(trace.counts.begin(), trace.counts.end());
  trace.histogram.assign(peak + 1, 0);
  for (const auto c : trace.counts) ++trace.histogram[c];
  return trace;
}

double noise_fraction(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("collection efficiency must lie in [0, 1]");
  return std::sqrt(1.0 - x);
}

double multiexciton_probability(double n) {
  if (!(n >= 0.0) || !std::isfinite(n)) throw DomainError("mean excitation number must be non-negative");
  return 1.0 - (1.0 + n) * std::exp(-n);
}

nlohmann::json photophysics_to_json(const EmitterPhotophysics& p) {
  nlohmann::json states = nlohmann::json::array();
  for (const auto& s : p.flicker_states) states.push_back({{"brightness", s.brightness}, {"mean_dwell_s", s.mean_dwell_s}});
  return {{"rep_rate_hz", p.rep_rate_hz},
          {"lifetime_ns", p.lifetime_ns},
          {"quantum_yield", p.quantum_yield},
          {"p_biexciton", p.p_biexciton},
          {"biexciton_lifetime_ns", p.biexciton_lifetime()},
          {"multiexciton_order", p.multiexciton_order},
          {"flicker_states", states},
          {"detection_efficiency", p.detection_efficiency},
          {"dark_count_rate_hz", p.detector.dark_count_rate_hz},
          {"dead_time_ns", p.detector.dead_time_ns}};
}

EmitterPhotophysics photophysics_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("photon: expected an object");
  EmitterPhotophysics p;
  auto number = [&](const char* key, double& target) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw SchemaError(std::string("photon: '") + key + "' must be a number");
    target = j[key].get<double>();
  };
  number("rep_rate_hz", p.rep_rate_hz);
  number("lifetime_ns", p.lifetime_ns);
  number("quantum_yield", p.quantum_yield);
  number("detection_efficiency", p.detection_efficiency);
  number("dark_count_rate_hz", p.detector.dark_count_rate_hz);
  number("dead_time_ns", p.detector.dead_time_ns);
  if (j.contains("p_biexciton")) {
    number("p_biexciton", p.p_biexciton);
  } else if (j.contains("mean_excitations")) {
    double n = 0.0;
    number("mean_excitations", n);
    p.p_biexciton = multiexciton_probability(n);
  }
  if (j.contains("biexciton_lifetime_ns")) {
    double v = 0.0;
    number("biexciton_lifetime_ns", v);
    p.biexciton_lifetime_ns = v;
  }
  if (j.contains("multiexciton_order")) {
    if (!j["multiexciton_order"].is_number_integer()) throw SchemaError("photon: 'multiexciton_order' must be an integer");
    p.multiexciton_order = j["multiexciton_order"].get<int>();
  }
  if (j.contains("flicker_states")) {
    if (!j["flicker_states"].is_array()) throw SchemaError("photon: 'flicker_states' must be an array");
    p.flicker_states.clear();
    for (const auto& s : j["flicker_states"]) {
      if (!s.is_object() || !s.contains("brightness") || !s.contains("mean_dwell_s") || !s["brightness"].is_number() ||
          !s["mean_dwell_s"].is_number())
        throw SchemaError("photon: flicker states need numeric 'brightness' and 'mean_dwell_s'");
      p.flicker_states.push_back({s["brightness"].get<double>(), s["mean_dwell_s"].get<double>()});
    }
  }
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw SchemaError(std::string("photon: ") + e.what());
  }
  return p;
}

void write_stream_csv(std::ostream& out, const TimestampStream& stream) {
  out << "time_s,detector\n" << std::setprecision(17);
  for (const auto& e : stream.events) out << e.time_s << ',' << (e.detector == Detector::A ? 'A' : 'B') << '\n';
}

void write_g2_csv(std::ostream& out, const G2Histogram& g2) {
  out << "delay_ns,count\n" << std::setprecision(12);
  for (std::size_t k = 0; k < g2.counts.size(); ++k) out << g2.bin_center_ns(k) << ',' << g2.counts[k] << '\n';
}

void write_trace_csv(std::ostream& out, const TimeTrace& trace) {
  out << "bin_start_ms,count\n" << std::setprecision(12);
  for (std::size_t k = 0; k < trace.counts.size(); ++k)
    out << static_cast<double>(k) * trace.bin_width_ms << ',' << trace.counts[k] << '\n';
}

void write_intensity_histogram_csv(std::ostream& out, const TimeTrace& trace) {
  out << "counts_per_bin,occurrences\n";
  for (std::size_t c = 0; c < trace.histogram.size(); ++c) out << c << ',' << trace.histogram[c] << '\n';
}

}  // namespace mda
