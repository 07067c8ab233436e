#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "seqcls/data.hpp"
#include "seqcls/errors.hpp"

namespace seqcls {

namespace {

constexpr double kTwoPi = 6.283185307179586;

// 1/f background: white noise through Paul Kellet's economy pink filter,
// rescaled to unit standard deviation.
std::vector<double> pink_background(std::size_t length, Rng& rng) {
  std::vector<double> out(length);
  double b0 = 0, b1 = 0, b2 = 0;
  for (auto& v : out) {
    const double white = gaussian(rng);
    b0 = 0.99765 * b0 + white * 0.0990460;
    b1 = 0.96300 * b1 + white * 0.2965164;
    b2 = 0.57000 * b2 + white * 1.0526913;
    v = b0 + b1 + b2 + white * 0.1848;
  }
  double mean = 0, sq = 0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(length);
  for (double v : out) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(length));
  for (auto& v : out) v = (v - mean) / sd;
  return out;
}

struct Geometry {
  std::size_t length;
  double rate;

  // Seconds to samples, kept within [1, length/8].
  double samples(double seconds) const {
    return std::clamp(seconds * rate, 1.0, std::max(1.0, static_cast<double>(length) / 8.0));
  }
};

// Asymmetric Gaussian transient (steep rise, slower fall) with a trailing
// slow wave of opposite polarity.
void add_transient(std::vector<double>& x, std::size_t peak, double amplitude, double rise, double fall) {
  const double wave_center = static_cast<double>(peak) + 3.0 * fall;
  const double wave_width = 2.0 * fall;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double dt = static_cast<double>(t) - static_cast<double>(peak);
    const double width = dt < 0 ? rise : fall;
    x[t] += amplitude * std::exp(-dt * dt / (2 * width * width));
    const double dw = static_cast<double>(t) - wave_center;
    x[t] -= 0.3 * amplitude * std::exp(-dw * dw / (2 * wave_width * wave_width));
  }
}

void add_burst(std::vector<double>& x, std::size_t peak, double amplitude, double cycles_per_sample,
               double envelope, double phase) {
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double dt = static_cast<double>(t) - static_cast<double>(peak);
    x[t] += amplitude * std::exp(-dt * dt / (2 * envelope * envelope)) *
            std::sin(kTwoPi * cycles_per_sample * dt + phase);
  }
}

std::vector<double> artifact(const Geometry& g, std::vector<double> bg, Rng& rng) {
  const double len = static_cast<double>(g.length);
  const int kind = static_cast<int>(uniform01(rng) * 3.0);
  const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
  if (kind == 0) {
    // Electrode pop: abrupt offset that relaxes slowly.
    const double at = uniform(rng, 0.2, 0.8) * len;
    const double jump = sign * uniform(rng, 6.0, 12.0);
    const double tau = g.samples(uniform(rng, 0.05, 0.3));
    const double edge = g.samples(0.0004);
    for (std::size_t t = 0; t < g.length; ++t) {
      const double dt = static_cast<double>(t) - at;
      if (dt >= 0) bg[t] += jump * std::min(1.0, dt / edge) * std::exp(-dt / (tau * 8.0));
    }
  } else if (kind == 1) {
    // Baseline drift plus a slow swing.
    const double slope = sign * uniform(rng, 8.0, 15.0);
    const double curve = uniform(rng, -4.0, 4.0);
    const double swing_cycles = uniform(rng, 0.3, 1.2);
    const double phase = uniform(rng, 0.0, kTwoPi);
    for (std::size_t t = 0; t < g.length; ++t) {
      const double u = static_cast<double>(t) / len;
      bg[t] += slope * u + curve * u * u + 3.0 * std::sin(kTwoPi * swing_cycles * u + phase);
    }
  } else {
    // Amplifier saturation: large slow excursion clipped at the rails.
    const double cycles = uniform(rng, 0.8, 2.5);
    const double phase = uniform(rng, 0.0, kTwoPi);
    const double amp = uniform(rng, 8.0, 14.0);
    const double rail = amp * uniform(rng, 0.35, 0.6);
    for (std::size_t t = 0; t < g.length; ++t) {
      const double u = static_cast<double>(t) / len;
      const double v = 2.0 * bg[t] + amp * std::sin(kTwoPi * cycles * u + phase);
      bg[t] = std::clamp(v, -rail, rail);
    }
  }
  return bg;
}

}  // namespace

SynthWaveform synth_waveform(EegClass kind, std::size_t length, double sample_rate, std::uint64_t seed) {
  if (length < kMinSynthLength)
    throw ConfigError("synthetic segments need at least " + std::to_string(kMinSynthLength) +
                      " samples, got " + std::to_string(length));
  if (!(sample_rate > 0)) throw ConfigError("sample rate must be positive");
  Rng rng(seed);
  const Geometry g{length, sample_rate};
  SynthWaveform w;
  std::vector<double> x;

  if (kind == EegClass::noise) {
    x.resize(length);
    const double level = uniform(rng, 0.5, 2.0);
    for (auto& v : x) v = level * gaussian(rng);
  } else if (kind == EegClass::artifacts) {
    x = artifact(g, pink_background(length, rng), rng);
  } else {
    x = pink_background(length, rng);
    const double len = static_cast<double>(length);
    w.peak_index = static_cast<std::size_t>(uniform(rng, 0.25, 0.75) * len);
    const double amplitude = (uniform01(rng) < 0.5 ? -1.0 : 1.0) * uniform(rng, 5.0, 9.0);
    const double rise = g.samples(uniform(rng, 0.004, 0.008));
    const double fall = g.samples(uniform(rng, 0.010, 0.020));
    add_transient(x, w.peak_index, amplitude, rise, fall);
    // Burst parameters are drawn for both classes so the two share every
    // other random draw; only the pathological one adds the burst.
    const double freq = std::min(uniform(rng, 250.0, 450.0), 0.2 * sample_rate);
    const double envelope = g.samples(uniform(rng, 0.012, 0.025));
    const double burst_amp = std::abs(amplitude) * uniform(rng, 0.6, 1.0);
    const double phase = uniform(rng, 0.0, kTwoPi);
    if (kind == EegClass::pathological)
      add_burst(x, w.peak_index, burst_amp, freq / sample_rate, envelope, phase);
  }

  w.signal.assign(x.begin(), x.end());
  return w;
}

Dataset synth_generate(std::size_t n_per_class, std::size_t length, double sample_rate, std::uint64_t seed) {
  if (length < kMinSynthLength)
    throw ConfigError("synthetic segments need at least " + std::to_string(kMinSynthLength) +
                      " samples, got " + std::to_string(length));
  Dataset ds;
  ds.class_names = default_class_names();
  ds.seq_len = length;
  static const std::array<const char*, 4> prefix{"noise", "artifact", "physio", "patho"};
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      // Physiological and pathological sample i use independent streams.
      const std::uint64_t s = mix_seed(seed, c * 0x100000000ull + i);
      Sample sample;
      sample.signal = synth_waveform(static_cast<EegClass>(c), length, sample_rate, s).signal;
      sample.label = static_cast<int>(c);
      sample.key = std::string(prefix[c]) + "-" + std::to_string(i);
      ds.samples.push_back(std::move(sample));
    }
  }
  return ds;
}

}  // namespace seqcls
