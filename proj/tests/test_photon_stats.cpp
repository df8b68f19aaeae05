#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mda/error.hpp"
#include "mda/parallel.hpp"
#include "mda/photon_stats.hpp"
#include "mda/random.hpp"

using namespace mda;

namespace {

EmitterPhotophysics ideal(double rep_rate_hz = 1e6) {
  EmitterPhotophysics p;
  p.rep_rate_hz = rep_rate_hz;
  return p;
}

// All A-B pairs, binned with the same centring convention as the histogram.
std::vector<std::uint64_t> brute_force_counts(const TimestampStream& s, double bw, double span) {
  const auto half = static_cast<long>(std::llround(span / bw));
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(2 * half + 1), 0);
  for (const auto& a : s.events) {
    if (a.detector != Detector::A) continue;
    for (const auto& b : s.events) {
      if (b.detector != Detector::B) continue;
      const double tau = (b.time_s - a.time_s) * 1e9;
      if (std::abs(tau) > span) continue;
      const long k = static_cast<long>(std::floor(tau / bw + 0.5)) + half;
      if (k >= 0 && k <= 2 * half) ++counts[static_cast<std::size_t>(k)];
    }
  }
  return counts;
}

double mean_ratio(const EmitterPhotophysics& p, double duration, int seeds, double* spread = nullptr) {
  std::vector<double> r;
  const double period_ns = 1e9 / p.rep_rate_hz;
  for (int s = 0; s < seeds; ++s)
    r.push_back(g2_histogram(simulate_source(p, duration, 100 + s), 3.2, 5.5 * period_ns).center_ratio);
  const double mean = std::accumulate(r.begin(), r.end(), 0.0) / seeds;
  if (spread) {
    double v = 0.0;
    for (double x : r) v += (x - mean) * (x - mean);
    *spread = std::sqrt(v / (seeds - 1));
  }
  return mean;
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
  using B = Philox4x32::Block;
  CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
  CHECK(Philox4x32::generate({1, 0, 0, 0}, {0, 0}) == B{0xf8e4cca4, 0x5cb200db, 0xb1a574eb, 0x097eff67});
  CHECK(Philox4x32::generate({2, 0, 0, 0}, {0, 0}) == B{0x04faa329, 0x51c732a6, 0x241513ad, 0x459135e4});
  CHECK(Philox4x32::generate({1, 0, 0, 0}, {0xa4093822, 0x299f31d0}) ==
        B{0xf9a58d27, 0xa8e41926, 0xf1a18f40, 0xb3702f6b});
}

TEST_CASE("philox stream draws") {
  PhiloxStream a(42, 7, 3), b(42, 7, 3), c(42, 8, 3);
  double sum = 0.0;
  bool differs = false;
  for (int i = 0; i < 100000; ++i) {
    const double u = a.uniform();
    CHECK_FALSE((u <= 0.0 || u >= 1.0));
    CHECK(u == b.uniform());
    differs = differs || u != c.uniform();
    sum += u;
  }
  CHECK(differs);
  CHECK(std::abs(sum / 100000 - 0.5) < 5 * std::sqrt(1.0 / 12 / 100000));
  PhiloxStream e(1, 0, 0);
  double esum = 0.0;
  for (int i = 0; i < 100000; ++i) esum += e.exponential(3.0);
  CHECK(std::abs(esum / 100000 - 3.0) < 5 * 3.0 / std::sqrt(100000.0));
}

TEST_CASE("photophysics validation") {
  EmitterPhotophysics p;
  CHECK_NOTHROW(p.validate());
  p.quantum_yield = 1.2;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = {};
  p.flicker_states.clear();
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = {};
  p.flicker_states = {{1.0, 0.0}};
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = {};
  p.multiexciton_order = 0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  CHECK_THROWS_AS(simulate_source(ideal(1e6), 5e-6, 1), DomainError);
  CHECK(p.biexciton_lifetime() == doctest::Approx(10.0));
}

TEST_CASE("simulate_source basics") {
  SUBCASE("zero quantum yield gives an empty stream") {
    auto p = ideal();
    p.quantum_yield = 0.0;
    const auto s = simulate_source(p, 1e-3, 3);
    CHECK(s.events.empty());
    CHECK(s.duration_s == doctest::Approx(1e-3));
  }
  SUBCASE("ideal emitter gives one event per pulse") {
    const auto p = ideal(1e6);
    const auto s = simulate_source(p, 0.01, 9);
    REQUIRE(s.events.size() == 10000);
    const double period = 1e-6;
    std::vector<int> per_pulse(10000, 0);
    for (const auto& e : s.events) {
      const auto k = static_cast<std::size_t>(std::floor(e.time_s / period));
      REQUIRE(k < per_pulse.size());
      ++per_pulse[k];
    }
    CHECK(std::all_of(per_pulse.begin(), per_pulse.end(), [](int n) { return n == 1; }));
  }
  SUBCASE("time ordering and duration") {
    auto p = ideal(1e7);
    p.p_biexciton = 0.3;
    const auto s = simulate_source(p, 1e-3, 5);
    CHECK(std::is_sorted(s.events.begin(), s.events.end(),
                         [](const PhotonEvent& a, const PhotonEvent& b) { return a.time_s < b.time_s; }));
    CHECK(s.duration_s >= s.events.back().time_s);
    CHECK(s.seed == 5);
  }
  SUBCASE("determinism across seeds and worker counts") {
    auto p = ideal(1e7);
    p.p_biexciton = 0.2;
    p.detection_efficiency = 0.4;
    p.flicker_states = {{1.0, 1e-4}, {0.3, 2e-4}};
    const auto a = simulate_source(p, 2e-3, 77);
    set_thread_count(1);
    const auto b = simulate_source(p, 2e-3, 77);
    set_thread_count(0);
    CHECK(a.events == b.events);
    const auto c = simulate_source(p, 2e-3, 78);
    CHECK_FALSE(a.events == c.events);
  }
  SUBCASE("detector dead time") {
    auto p = ideal(1e7);
    p.p_biexciton = 1.0;
    p.detector.dead_time_ns = 50.0;
    const auto s = simulate_source(p, 1e-4, 2);
    double last[2] = {-1.0, -1.0};
    for (const auto& e : s.events) {
      double& l = last[static_cast<int>(e.detector)];
      CHECK(e.time_s - l >= 50e-9);
      l = e.time_s;
    }
  }
  SUBCASE("dark counts") {
    auto p = ideal();
    p.quantum_yield = 0.0;
    p.detector.dark_count_rate_hz = 1e5;
    const auto s = simulate_source(p, 0.1, 4);
    const double n = static_cast<double>(s.events.size());
    CHECK(std::abs(n - 2e4) < 5 * std::sqrt(2e4));
  }
}

TEST_CASE("binomial thinning of the detected count") {
  auto p = ideal(1e6);
  p.detection_efficiency = 0.5;
  const int trials = 8000;
  const double pulses = 1000;
  double sum = 0.0, sum2 = 0.0;
  for (int t = 0; t < trials; ++t) {
    const double n = static_cast<double>(simulate_source(p, 1e-3, 1000 + t).events.size());
    sum += n;
    sum2 += n * n;
  }
  const double mean = sum / trials;
  const double var = (sum2 - trials * mean * mean) / (trials - 1);
  const double x = p.detection_efficiency;
  MESSAGE("detected mean " << mean << ", variance " << var << " vs " << x * pulses * (1 - x));
  CHECK(std::abs(mean - x * pulses) < 5 * std::sqrt(x * pulses * (1 - x) / trials));
  CHECK(std::abs(var / (x * pulses * (1 - x)) - 1.0) < 0.05);
}

TEST_CASE("g2 histogram") {
  SUBCASE("uncorrelated light has unit center ratio") {
    const auto s = poisson_stream(1e5, 1.0, 1e6, 8);
    const auto h = g2_histogram(s, 3.2, 5500.0);
    const double sigma = std::sqrt(1.0 / h.center_area + 1.0 / (h.side_peak_mean * 2 * h.side_peaks));
    MESSAGE("poisson center ratio " << h.center_ratio << " +- " << sigma);
    CHECK(std::abs(h.center_ratio - 1.0) < 3 * sigma);
  }
  SUBCASE("ideal emitter has an empty central peak") {
    // 1000 ns period, 20 ns lifetime.
    const auto s = simulate_source(ideal(1e6), 0.1, 3);
    const auto h = g2_histogram(s, 3.2, 5500.0);
    CHECK(h.center_area == 0.0);
    CHECK(h.center_ratio == 0.0);
    CHECK(h.side_peak_mean > 0.0);
  }
  SUBCASE("matches brute-force pair counting") {
    for (std::uint64_t seed : {1, 2, 3}) {
      auto p = ideal(1e7);
      p.p_biexciton = 0.4;
      p.detection_efficiency = 0.6;
      const auto s = simulate_source(p, 1e-3, seed);
      REQUIRE(s.events.size() <= 10000);
      REQUIRE(s.events.size() > 5000);
      const auto h = g2_histogram(s, 3.2, 550.0);
      CHECK(h.counts == brute_force_counts(s, 3.2, 550.0));
    }
    const auto s = poisson_stream(4e6, 1e-3, 1e7, 6);
    REQUIRE(s.events.size() <= 10000);
    CHECK(g2_histogram(s, 1.0, 300.0).counts == brute_force_counts(s, 1.0, 300.0));
  }
  SUBCASE("center ratio follows the photon-number moments") {
    // E[n(n-1)] / E[n]^2 = 2p / (1 + p)^2.
    for (double pbx : {0.1, 0.3}) {
      auto p = ideal(1e6);
      p.p_biexciton = pbx;
      p.detection_efficiency = 0.5;
      double spread = 0.0;
      const double mean = mean_ratio(p, 0.5, 4, &spread);
      CHECK(std::abs(mean - 2 * pbx / ((1 + pbx) * (1 + pbx))) < 5 * spread / 2 + 1e-3);
    }
  }
  SUBCASE("center ratio rises with the biexciton probability") {
    double previous = -1.0;
    for (double pbx : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}) {
      auto p = ideal(1e6);
      p.p_biexciton = pbx;
      p.detection_efficiency = 0.5;
      const double r = mean_ratio(p, 0.2, 10);
      CHECK(r > previous);
      previous = r;
    }
  }
  SUBCASE("higher multiexciton orders exceed one half") {
    auto p = ideal(1e6);
    p.p_biexciton = 0.6;
    p.multiexciton_order = 3;
    p.detection_efficiency = 0.5;
    double spread = 0.0;
    const double mean = mean_ratio(p, 0.2, 10, &spread);
    MESSAGE("order 3 center ratio " << mean << " +- " << spread);
    CHECK(mean - 1.833 * spread / std::sqrt(10.0) > 0.5);
  }
  SUBCASE("errors") {
    TimestampStream only_a;
    only_a.rep_rate_hz = 1e6;
    only_a.events = {{0.0, Detector::A}, {1e-6, Detector::A}};
    CHECK_THROWS_AS(g2_histogram(only_a, 3.2, 5500.0), InsufficientDataError);
    const auto s = simulate_source(ideal(1e7), 1e-3, 1);
    CHECK_THROWS_AS(g2_histogram(s, 3.2, 100.0), DomainError);
    CHECK_THROWS_AS(g2_histogram(s, 0.0, 550.0), DomainError);
  }
  SUBCASE("bin index convention") {
    CHECK(g2_bin_index(0.0, 2.0, 10.0) == 5);
    CHECK(g2_bin_index(0.99, 2.0, 10.0) == 5);
    CHECK(g2_bin_index(1.0, 2.0, 10.0) == 6);
    CHECK(g2_bin_index(-1.01, 2.0, 10.0) == 4);
    CHECK(g2_bin_index(10.5, 2.0, 10.0) == -1);
  }
}

TEST_CASE("time traces") {
  SUBCASE("conservation and bin count") {
    auto p = ideal(1e7);
    p.detection_efficiency = 0.3;
    const auto s = simulate_source(p, 0.2, 12);
    const auto t = time_trace(s, 1.0);
    CHECK(t.counts.size() == 200);
    CHECK(std::accumulate(t.counts.begin(), t.counts.end(), std::uint64_t{0}) == s.events.size());
    std::uint64_t bins = 0;
    for (std::size_t c = 0; c < t.histogram.size(); ++c) bins += t.histogram[c];
    CHECK(bins == t.counts.size());
    CHECK_THROWS_AS(time_trace(s, 5.0), DomainError);
  }
  SUBCASE("single state is unimodal and near Poissonian") {
    auto p = ideal(1e6);
    p.detection_efficiency = 0.1;
    const auto t = time_trace(simulate_source(p, 2.0, 13), 1.0);
    double mean = 0.0, var = 0.0;
    for (auto c : t.counts) mean += static_cast<double>(c);
    mean /= static_cast<double>(t.counts.size());
    for (auto c : t.counts) var += (static_cast<double>(c) - mean) * (static_cast<double>(c) - mean);
    var /= static_cast<double>(t.counts.size() - 1);
    CHECK(mean == doctest::Approx(100.0).epsilon(0.01));
    // Binomial variance 100 * (1 - 0.1).
    CHECK(var == doctest::Approx(90.0).epsilon(0.1));
  }
  SUBCASE("two flicker states give a bimodal histogram") {
    auto p = ideal(1e6);
    p.detection_efficiency = 0.1;
    p.flicker_states = {{1.0, 1.0}, {0.5, 1.0}};
    const auto t = time_trace(simulate_source(p, 20.0, 21), 1.0);
    // Smoothed histogram, then the two largest local maxima.
    std::vector<double> smooth(t.histogram.size(), 0.0);
    for (std::size_t c = 0; c < smooth.size(); ++c)
      for (long d = -3; d <= 3; ++d) {
        const long k = static_cast<long>(c) + d;
        if (k >= 0 && k < static_cast<long>(smooth.size())) smooth[c] += static_cast<double>(t.histogram[static_cast<std::size_t>(k)]);
      }
    std::vector<std::pair<double, std::size_t>> peaks;
    for (std::size_t c = 1; c + 1 < smooth.size(); ++c)
      if (smooth[c] > smooth[c - 1] && smooth[c] >= smooth[c + 1]) peaks.push_back({smooth[c], c});
    std::sort(peaks.rbegin(), peaks.rend());
    REQUIRE(peaks.size() >= 2);
    const auto lo = std::min(peaks[0].second, peaks[1].second), hi = std::max(peaks[0].second, peaks[1].second);
    MESSAGE("modes at " << lo << " and " << hi);
    CHECK(std::abs(static_cast<double>(lo) - 50.0) <= 5.0);
    CHECK(std::abs(static_cast<double>(hi) - 100.0) <= 5.0);
    CHECK(smooth[75] < 0.2 * std::min(peaks[0].first, peaks[1].first));
  }
}

TEST_CASE("noise fraction and excitation helper") {
  CHECK(noise_fraction(0.96) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(noise_fraction(0.99) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(noise_fraction(0.0) == 1.0);
  CHECK(noise_fraction(1.0) == 0.0);
  CHECK_THROWS_AS(noise_fraction(-0.1), DomainError);
  CHECK_THROWS_AS(noise_fraction(1.1), DomainError);
  CHECK(multiexciton_probability(0.0) == 0.0);
  // 1 - P(0) - P(1) of a Poisson distribution with mean 2.
  CHECK(multiexciton_probability(2.0) == doctest::Approx(1.0 - std::exp(-2.0) - 2.0 * std::exp(-2.0)));
}

TEST_CASE("photophysics json and csv") {
  EmitterPhotophysics p;
  p.p_biexciton = 0.25;
  p.flicker_states = {{1.0, 0.5}, {0.4, 0.2}};
  p.detector.dead_time_ns = 30.0;
  const auto back = photophysics_from_json(photophysics_to_json(p));
  CHECK(photophysics_to_json(back) == photophysics_to_json(p));
  CHECK(photophysics_from_json({{"mean_excitations", 2.0}}).p_biexciton ==
        doctest::Approx(multiexciton_probability(2.0)));
  CHECK_THROWS_AS(photophysics_from_json({{"quantum_yield", "high"}}), SchemaError);
  CHECK_THROWS_AS(photophysics_from_json({{"quantum_yield", 2.0}}), SchemaError);

  const auto s = simulate_source(ideal(1e6), 1e-4, 1);
  std::ostringstream out;
  write_stream_csv(out, s);
  const std::string text = out.str();
  CHECK(text.rfind("time_s,detector\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(s.events.size()) + 1);
}
