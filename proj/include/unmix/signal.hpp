// STFT analysis/synthesis and per-frame helpers.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace unmix {

struct StftConfig {
  Eigen::Index window_len = 480;
  Eigen::Index hop = 192;  // 60% overlap
  Eigen::Index fft_len = 512;
  Eigen::Index n_bins = 257;
  int sample_rate = 16000;

  void validate() const {
    if (window_len <= 0 || hop <= 0 || fft_len <= 0 || n_bins <= 0 ||
        sample_rate <= 0)
      throw std::invalid_argument("StftConfig: all fields must be positive");
    if (!(hop < window_len && window_len <= fft_len))
      throw std::invalid_argument(
          "StftConfig: require hop < window_len <= fft_len");
    if (n_bins != fft_len / 2 + 1)
      throw std::invalid_argument("StftConfig: n_bins must equal fft_len/2+1");
  }

  /// Builds a config with n_bins derived from fft_len.
  static StftConfig with(Eigen::Index window_len, Eigen::Index hop,
                         Eigen::Index fft_len, int sample_rate = 16000) {
    return {window_len, hop, fft_len, fft_len / 2 + 1, sample_rate};
  }

  bool operator==(const StftConfig&) const = default;
};

/// Magnitude and phase, n_bins x n_frames.
struct Spectrogram {
  Eigen::MatrixXd mag;
  Eigen::MatrixXd phase;
  StftConfig config;

  Eigen::Index n_bins() const { return mag.rows(); }
  Eigen::Index n_frames() const { return mag.cols(); }

  void validate() const {
    config.validate();
    if (mag.rows() != phase.rows() || mag.cols() != phase.cols())
      throw std::invalid_argument("Spectrogram: mag/phase shape mismatch");
    if (mag.rows() != config.n_bins)
      throw std::invalid_argument("Spectrogram: row count != n_bins");
    if ((mag.array() < 0.0).any())
      throw std::invalid_argument("Spectrogram: negative magnitude");
  }
};

/// Symmetric Hamming window.
inline Eigen::VectorXd hamming(Eigen::Index n) {
  Eigen::VectorXd w(n);
  if (n == 1) {
    w(0) = 1.0;
    return w;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    w(i) = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(i) /
                                  double(n - 1));
  return w;
}

/// Frames needed to cover `n_samples`; a trailing partial frame is padded.
inline Eigen::Index frame_count(Eigen::Index n_samples, const StftConfig& cfg) {
  if (n_samples <= cfg.window_len) return 1;
  return (n_samples - cfg.window_len + cfg.hop - 1) / cfg.hop + 1;
}

/// Samples spanned by `n_frames` frames.
inline Eigen::Index synthesis_length(Eigen::Index n_frames,
                                     const StftConfig& cfg) {
  return (n_frames - 1) * cfg.hop + cfg.window_len;
}

inline Spectrogram stft(std::span<const double> audio, const StftConfig& cfg) {
  cfg.validate();
  if (audio.empty()) throw std::invalid_argument("stft: empty audio");

  const Eigen::Index n_samples = static_cast<Eigen::Index>(audio.size());
  const Eigen::Index n_frames = frame_count(n_samples, cfg);
  const Eigen::VectorXd window = hamming(cfg.window_len);

  Spectrogram spec;
  spec.config = cfg;
  spec.mag.resize(cfg.n_bins, n_frames);
  spec.phase.resize(cfg.n_bins, n_frames);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(static_cast<size_t>(cfg.fft_len));
  std::vector<std::complex<double>> bins;

  for (Eigen::Index t = 0; t < n_frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    const Eigen::Index start = t * cfg.hop;
    for (Eigen::Index i = 0; i < cfg.window_len; ++i) {
      const Eigen::Index s = start + i;
      if (s < n_samples) frame[size_t(i)] = audio[size_t(s)] * window(i);
    }
    fft.fwd(bins, frame);
    for (Eigen::Index f = 0; f < cfg.n_bins; ++f) {
      spec.mag(f, t) = std::abs(bins[size_t(f)]);
      spec.phase(f, t) = std::arg(bins[size_t(f)]);
    }
  }
  return spec;
}

inline Spectrogram stft(const std::vector<double>& audio,
                        const StftConfig& cfg) {
  return stft(std::span<const double>(audio), cfg);
}

/// Weighted overlap-add resynthesis. Output has synthesis_length() samples
/// unless `length` is given, in which case it is truncated or zero-padded.
inline std::vector<double> istft(const Spectrogram& spec,
                                 Eigen::Index length = -1) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  if (spec.mag.rows() != spec.phase.rows() ||
      spec.mag.cols() != spec.phase.cols())
    throw std::invalid_argument("istft: mag/phase shape mismatch");
  if (spec.mag.rows() != cfg.n_bins)
    throw std::invalid_argument("istft: row count != n_bins");
  if (spec.mag.cols() == 0) throw std::invalid_argument("istft: no frames");

  const Eigen::Index n_frames = spec.mag.cols();
  const Eigen::Index total = synthesis_length(n_frames, cfg);
  const Eigen::VectorXd window = hamming(cfg.window_len);

  Eigen::VectorXd out = Eigen::VectorXd::Zero(total);
  Eigen::VectorXd norm = Eigen::VectorXd::Zero(total);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> bins(size_t(cfg.n_bins));
  std::vector<double> frame;

  for (Eigen::Index t = 0; t < n_frames; ++t) {
    for (Eigen::Index f = 0; f < cfg.n_bins; ++f)
      bins[size_t(f)] = std::polar(spec.mag(f, t), spec.phase(f, t));
    // DC and Nyquist must be real for a real inverse.
    bins.front() = bins.front().real();
    if (cfg.fft_len % 2 == 0) bins.back() = bins.back().real();
    fft.inv(frame, bins, cfg.fft_len);
    const Eigen::Index start = t * cfg.hop;
    for (Eigen::Index i = 0; i < cfg.window_len; ++i) {
      out(start + i) += window(i) * frame[size_t(i)];
      norm(start + i) += window(i) * window(i);
    }
  }
  out.array() /= norm.array().max(1e-12);

  const Eigen::Index n = length < 0 ? total : length;
  std::vector<double> samples(size_t(n), 0.0);
  for (Eigen::Index i = 0; i < std::min(n, total); ++i) samples[size_t(i)] = out(i);
  return samples;
}

/// Returns (col / ||col||, ||col||); the zero column maps to (0, 0).
inline std::pair<Eigen::VectorXd, double> normalize_frame(
    const Eigen::Ref<const Eigen::VectorXd>& col) {
  if ((col.array() < 0.0).any())
    throw std::invalid_argument("normalize_frame: negative entry");
  const double n = col.norm();
  if (n == 0.0) return {Eigen::VectorXd::Zero(col.size()), 0.0};
  return {col / n, n};
}

/// Column t holds columns t-(L-1)/2 .. t+(L-1)/2 stacked, edges replicated.
inline Eigen::MatrixXd stack_frames(const Eigen::MatrixXd& mag,
                                    Eigen::Index context) {
  if (context < 1 || context % 2 == 0)
    throw std::invalid_argument("stack_frames: L must be odd and >= 1");
  const Eigen::Index rows = mag.rows(), cols = mag.cols();
  const Eigen::Index half = (context - 1) / 2;
  Eigen::MatrixXd out(rows * context, cols);
  for (Eigen::Index t = 0; t < cols; ++t)
    for (Eigen::Index j = 0; j < context; ++j) {
      const Eigen::Index src =
          std::clamp<Eigen::Index>(t - half + j, 0, cols - 1);
      out.block(j * rows, t, rows, 1) = mag.col(src);
    }
  return out;
}

inline Eigen::MatrixXd stack_frames(const Spectrogram& spec,
                                    Eigen::Index context) {
  return stack_frames(spec.mag, context);
}

/// Normalizes each of the `context` sub-frames of a stacked column separately.
inline Eigen::VectorXd normalize_stacked(
    const Eigen::Ref<const Eigen::VectorXd>& stacked, Eigen::Index context) {
  const Eigen::Index rows = stacked.size() / context;
  Eigen::VectorXd out(stacked.size());
  for (Eigen::Index j = 0; j < context; ++j)
    out.segment(j * rows, rows) =
        normalize_frame(stacked.segment(j * rows, rows)).first;
  return out;
}

}  // namespace unmix
