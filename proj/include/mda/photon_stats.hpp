#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

namespace mda {

struct FlickerState {
  double brightness = 1.0;    // relative, in (0, 1]
  double mean_dwell_s = 1.0;  // > 0
};

struct DetectorModel {
  double dark_count_rate_hz = 0.0;  // per detector
  double dead_time_ns = 0.0;
};

struct EmitterPhotophysics {
  double rep_rate_hz = 1e6;
  double lifetime_ns = 20.0;
  double quantum_yield = 1.0;
  double p_biexciton = 0.0;
  std::optional<double> biexciton_lifetime_ns;  // default lifetime / 2
  /// Highest multiexciton order reachable per pulse; 1 allows the biexciton
  /// photon only. Each further photon occurs with conditional probability p_biexciton.
  int multiexciton_order = 1;
  std::vector<FlickerState> flicker_states{FlickerState{}};
  double detection_efficiency = 1.0;
  DetectorModel detector;

  void validate() const;
  double biexciton_lifetime() const { return biexciton_lifetime_ns.value_or(0.5 * lifetime_ns); }
};

enum class Detector : std::uint8_t { A = 0, B = 1 };

struct PhotonEvent {
  double time_s;
  Detector detector;

  friend bool operator==(const PhotonEvent&, const PhotonEvent&) = default;
};

struct TimestampStream {
  std::vector<PhotonEvent> events;
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  double rep_rate_hz = 0.0;  // pulse clock used for the pulsed g2 normalisation
};

/// Pulsed source at times k / rep_rate, k = 0 .. floor(duration * rep_rate) - 1.
/// Random draws of pulse k come from Philox blocks keyed by the seed and k.
TimestampStream simulate_source(const EmitterPhotophysics& photophysics, double duration_s, std::uint64_t seed);

/// Two independent Poisson processes (one per detector) with the given rate each.
TimestampStream poisson_stream(double rate_hz, double duration_s, double rep_rate_hz, std::uint64_t seed);

struct G2Histogram {
  double bin_width_ns = 0.0;
  double span_ns = 0.0;
  std::vector<std::uint64_t> counts;  // bin k centred on (k - half) * bin_width
  double center_area = 0.0;           // A-B pairs with |tau| < T/2
  double side_peak_mean = 0.0;        // mean area of the side peaks |tau - kT| < T/2
  int side_peaks = 0;                 // used on each side
  double center_ratio = 0.0;

  double bin_center_ns(std::size_t k) const;
};

/// Histogram of all delays tau = t_B - t_A with |tau| <= span.
/// Throws InsufficientDataError when a detector channel is empty.
G2Histogram g2_histogram(const TimestampStream& stream, double bin_width_ns, double span_ns);

/// Bin index of a delay in the histogram above, or -1 outside the span.
long g2_bin_index(double tau_ns, double bin_width_ns, double span_ns);

struct TimeTrace {
  double bin_width_ms = 0.0;
  std::vector<std::uint64_t> counts;
  std::vector<std::uint64_t> histogram;  // histogram[c] = number of bins holding c counts
};

/// Requires at least 100 bins over the stream duration.
TimeTrace time_trace(const TimestampStream& stream, double bin_width_ms);

/// sqrt(1 - x): detected-number noise relative to the shot noise at equal mean.
double noise_fraction(double x);

/// Probability of two or more excitations for a Poissonian mean excitation number.
double multiexciton_probability(double mean_excitations);

nlohmann::json photophysics_to_json(const EmitterPhotophysics& p);
EmitterPhotophysics photophysics_from_json(const nlohmann::json& j);

void write_stream_csv(std::ostream& out, const TimestampStream& stream);
void write_g2_csv(std::ostream& out, const G2Histogram& g2);
void write_trace_csv(std::ostream& out, const TimeTrace& trace);
void write_intensity_histogram_csv(std::ostream& out, const TimeTrace& trace);

}  // namespace mda
