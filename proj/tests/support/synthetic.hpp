// Synthetic two-source corpus: band-limited noise bursts ("speech-like",
// source 1) and decaying harmonic notes ("music-like", source 2). Both occupy
// overlapping frequency ranges so separation is non-trivial.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace unmix::testing {

/// Noise bursts of 80-300 ms, each band-passed to a random band inside
/// [250, 4000] Hz, with raised-cosine envelopes and short pauses.
inline std::vector<double> noise_bursts(double seconds, int rate, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  const size_t total = size_t(seconds * rate);
  std::vector<double> out(total, 0.0);
  Eigen::FFT<double> fft;
  size_t pos = size_t(u(rng) * 0.05 * rate);
  while (pos < total) {
    const size_t len = size_t((0.08 + 0.22 * u(rng)) * rate);
    const double lo = 250.0 + 2500.0 * u(rng);
    const double hi = std::min(4000.0, lo + 400.0 + 1200.0 * u(rng));
    const double gain = 0.5 + u(rng);
    std::vector<double> seg(len);
    for (auto& s : seg) s = n01(rng);
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, seg);
    for (size_t k = 0; k < spec.size(); ++k) {
      const double f = double(std::min(k, len - k)) * rate / double(len);
      if (f < lo || f > hi) spec[k] = 0.0;
    }
    std::vector<std::complex<double>> time;
    fft.inv(time, spec);
    for (size_t i = 0; i < len && pos + i < total; ++i) {
      const double env = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(len));
      out[pos + i] += 0.1 * gain * env * time[i].real();
    }
    pos += len + size_t((0.01 + 0.06 * u(rng)) * rate);
  }
  return out;
}

/// Harmonic notes with fundamentals between 110 and 660 Hz, 1/h harmonic
/// rolloff up to 5 kHz, exponential decay, up to two overlapping voices.
inline std::vector<double> harmonic_notes(double seconds, int rate, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const size_t total = size_t(seconds * rate);
  std::vector<double> out(total, 0.0);
  for (int voice = 0; voice < 2; ++voice) {
    size_t pos = size_t(u(rng) * 0.2 * rate);
    while (pos < total) {
      const size_t len = size_t((0.2 + 0.5 * u(rng)) * rate);
      const int midi = 45 + int(u(rng) * 31.0);
      const double f0 = 440.0 * std::pow(2.0, (midi - 69) / 12.0);
      const double gain = 0.5 + u(rng);
      const double decay = 2.0 + 6.0 * u(rng);
      std::vector<double> phase;
      for (int h = 1; h * f0 < 5000.0; ++h) phase.push_back(2.0 * std::numbers::pi * u(rng));
      for (size_t i = 0; i < len && pos + i < total; ++i) {
        const double t = double(i) / rate;
        const double attack = std::min(1.0, t / 0.01);
        const double env = attack * std::exp(-decay * t);
        double s = 0.0;
        for (size_t h = 0; h < phase.size(); ++h)
          s += std::sin(2.0 * std::numbers::pi * f0 * double(h + 1) * t + phase[h]) /
               double(h + 1);
        out[pos + i] += 0.08 * gain * env * s;
      }
      pos += len + size_t(0.1 * u(rng) * rate);
    }
  }
  return out;
}

/// Stationary noise band-passed to [lo, hi] Hz with a slow random amplitude
/// envelope.
inline std::vector<double> band_noise(double seconds, int rate, double lo, double hi,
                                      uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.3, 1.0);
  const size_t total = size_t(seconds * rate);
  std::vector<double> x(total);
  for (auto& s : x) s = n01(rng);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, x);
  for (size_t k = 0; k < spec.size(); ++k) {
    const double f = double(std::min(k, total - k)) * rate / double(total);
    if (f < lo || f > hi) spec[k] = 0.0;
  }
  std::vector<std::complex<double>> time;
  fft.inv(time, spec);
  const size_t seg = size_t(0.1 * rate);
  double a = u(rng), b = u(rng);
  for (size_t i = 0; i < total; ++i) {
    if (i % seg == 0) {
      a = b;
      b = u(rng);
    }
    const double t = double(i % seg) / double(seg);
    x[i] = 0.1 * (a + (b - a) * t) * time[i].real();
  }
  return x;
}

}  // namespace unmix::testing
