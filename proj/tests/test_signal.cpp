#include "support/oracles.hpp"
#include "unmix/signal.hpp"
#include "unmix/wav.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace unmix;
using unmix::testing::white_noise;

namespace {

double interior_error_db(const std::vector<double>& x, const std::vector<double>& y,
                         size_t margin) {
  long double err = 0, ref = 0;
  for (size_t i = margin; i + margin < x.size(); ++i) {
    err += (x[i] - y[i]) * (x[i] - y[i]);
    ref += x[i] * x[i];
  }
  return double(10.0L * std::log10(err / ref));
}

}  // namespace

TEST(StftConfig, DefaultsAndValidation) {
  StftConfig c;
  EXPECT_EQ(c.window_len, 480);
  EXPECT_EQ(c.hop, 192);
  EXPECT_EQ(c.fft_len, 512);
  EXPECT_EQ(c.n_bins, 257);
  EXPECT_EQ(c.sample_rate, 16000);
  EXPECT_NO_THROW(c.validate());

  EXPECT_THROW(StftConfig::with(480, 480, 512).validate(), std::invalid_argument);
  EXPECT_THROW(StftConfig::with(600, 192, 512).validate(), std::invalid_argument);
  StftConfig bad = c;
  bad.n_bins = 256;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = c;
  bad.sample_rate = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Stft, ZeroSignalGivesZeroMagnitude) {
  const std::vector<double> x(16000, 0.0);
  const Spectrogram s = stft(x, {});
  EXPECT_EQ(s.n_bins(), 257);
  // 81 full frames plus one zero-padded trailing frame for the last 112 samples.
  EXPECT_EQ(s.n_frames(), 82);
  EXPECT_EQ(s.mag.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Stft, FrameCountCoversSignal) {
  const StftConfig c;
  EXPECT_EQ(frame_count(480, c), 1);
  EXPECT_EQ(frame_count(100, c), 1);
  EXPECT_EQ(frame_count(480 + 192, c), 2);
  EXPECT_EQ(frame_count(480 + 193, c), 3);
  for (Eigen::Index n : {481, 1000, 16000, 31999})
    EXPECT_GE(synthesis_length(frame_count(n, c), c), n);
}

TEST(Stft, EmptyAudioIsAnError) {
  EXPECT_THROW(stft(std::vector<double>{}, {}), std::invalid_argument);
}

TEST(Stft, MatchesNaiveDft) {
  const StftConfig c;
  const auto x = white_noise(3000, 11);
  const Spectrogram s = stft(x, c);
  const Eigen::VectorXd w = hamming(c.window_len);
  for (Eigen::Index t : {Eigen::Index(0), Eigen::Index(3), s.n_frames() - 1}) {
    std::vector<double> frame(size_t(c.window_len), 0.0);
    for (Eigen::Index i = 0; i < c.window_len; ++i) {
      const size_t idx = size_t(t * c.hop + i);
      if (idx < x.size()) frame[size_t(i)] = x[idx] * w(i);
    }
    const auto ref = unmix::testing::naive_dft(frame, size_t(c.fft_len), size_t(c.n_bins));
    for (Eigen::Index f = 0; f < c.n_bins; ++f) {
      EXPECT_NEAR(s.mag(f, t), std::abs(ref[size_t(f)]), 1e-10);
      if (std::abs(ref[size_t(f)]) > 1e-6) {
        const double dphi = std::remainder(s.phase(f, t) - std::arg(ref[size_t(f)]),
                                           2 * std::numbers::pi);
        EXPECT_NEAR(dphi, 0.0, 1e-8);
      }
    }
  }
}

TEST(Stft, BinCenterSinusoidPeaksAtItsBin) {
  const StftConfig c;
  const int k = 40;
  const double freq = double(k) * c.sample_rate / double(c.fft_len);
  std::vector<double> x(8000);
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = std::sin(2 * std::numbers::pi * freq * double(i) / c.sample_rate);
  const Spectrogram s = stft(x, c);
  for (Eigen::Index t = 0; t + 1 < s.n_frames(); ++t) {
    Eigen::Index peak;
    s.mag.col(t).maxCoeff(&peak);
    EXPECT_EQ(peak, k) << "frame " << t;
  }
}

TEST(Stft, SignFlipKeepsMagnitudeAndShiftsPhaseByPi) {
  const auto x = white_noise(4000, 3);
  std::vector<double> neg(x.size());
  for (size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
  const Spectrogram a = stft(x, {}), b = stft(neg, {});
  EXPECT_LT((a.mag - b.mag).cwiseAbs().maxCoeff(), 1e-12);
  for (Eigen::Index t = 0; t < a.n_frames(); ++t)
    for (Eigen::Index f = 0; f < a.n_bins(); ++f) {
      if (a.mag(f, t) < 1e-8) continue;
      const double d = std::remainder(b.phase(f, t) - a.phase(f, t) - std::numbers::pi,
                                      2 * std::numbers::pi);
      ASSERT_NEAR(d, 0.0, 1e-8);
    }
}

TEST(Istft, RoundTripDefaultConfig) {
  const StftConfig c;
  for (uint64_t seed : {1u, 2u, 3u}) {
    const auto x = white_noise(16000 + 37 * seed, seed);
    const auto y = istft(stft(x, c), Eigen::Index(x.size()));
    ASSERT_EQ(y.size(), x.size());
    EXPECT_LT(interior_error_db(x, y, size_t(c.window_len)), -60.0);
    long double rel = 0, ref = 0;
    for (size_t i = size_t(c.window_len); i + size_t(c.window_len) < x.size(); ++i) {
      rel += (x[i] - y[i]) * (x[i] - y[i]);
      ref += x[i] * x[i];
    }
    EXPECT_LT(double(std::sqrt(rel / ref)), 1e-6);
  }
}

TEST(Istft, RoundTripNonDefaultConfig) {
  const StftConfig c = StftConfig::with(320, 160, 512);
  const auto x = white_noise(12345, 9);
  const auto y = istft(stft(x, c), Eigen::Index(x.size()));
  EXPECT_LT(interior_error_db(x, y, size_t(c.window_len)), -60.0);
}

TEST(Istft, ZeroMagnitudeGivesSilence) {
  Spectrogram s{Eigen::MatrixXd::Zero(257, 10), Eigen::MatrixXd::Random(257, 10), {}};
  for (double v : istft(s)) EXPECT_EQ(v, 0.0);
}

TEST(Istft, SingleFrameIsLocal) {
  const StftConfig c;
  Spectrogram s{Eigen::MatrixXd::Zero(257, 6), Eigen::MatrixXd::Zero(257, 6), c};
  s.mag.col(2).setConstant(1.0);
  const auto y = istft(s);
  const size_t lo = size_t(2 * c.hop), hi = lo + size_t(c.window_len);
  double inside = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (i < lo || i >= hi)
      EXPECT_EQ(y[i], 0.0) << i;
    else
      inside += std::abs(y[i]);
  }
  EXPECT_GT(inside, 0.0);
}

TEST(Istft, ShapeMismatchIsAnError) {
  Spectrogram s{Eigen::MatrixXd::Zero(257, 4), Eigen::MatrixXd::Zero(257, 3), {}};
  EXPECT_THROW(istft(s), std::invalid_argument);
  s.phase = Eigen::MatrixXd::Zero(100, 4);
  s.mag = Eigen::MatrixXd::Zero(100, 4);
  EXPECT_THROW(istft(s), std::invalid_argument);
}

TEST(NormalizeFrame, Examples) {
  auto [v, n] = normalize_frame(Eigen::Vector2d(3, 4));
  EXPECT_DOUBLE_EQ(n, 5.0);
  EXPECT_DOUBLE_EQ(v(0), 0.6);
  EXPECT_DOUBLE_EQ(v(1), 0.8);

  auto [z, zn] = normalize_frame(Eigen::Vector2d(0, 0));
  EXPECT_EQ(zn, 0.0);
  EXPECT_EQ(z, Eigen::Vector2d::Zero());

  const Eigen::Vector3d unit(0.0, 0.6, 0.8);
  auto [u, un] = normalize_frame(unit);
  EXPECT_NEAR(un, 1.0, 1e-15);
  EXPECT_LT((u - unit).norm(), 1e-15);

  EXPECT_THROW(normalize_frame(Eigen::Vector2d(-1, 1)), std::invalid_argument);
}

TEST(NormalizeFrame, NormIsZeroOrOne) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd col = unmix::testing::random_positive(17, 1, rng, 0.0, 3.0);
    if (i % 10 == 0) col.setZero();
    const double n = normalize_frame(col).first.norm();
    EXPECT_TRUE(std::abs(n) < 1e-12 || std::abs(n - 1.0) < 1e-12);
  }
}

TEST(StackFrames, IdentityAndEdgeReplication) {
  const Eigen::MatrixXd m = Eigen::MatrixXd::Random(4, 5);
  EXPECT_EQ(stack_frames(m, 1), m);

  const Eigen::MatrixXd s = stack_frames(m, 3);
  EXPECT_EQ(s.rows(), 12);
  EXPECT_EQ(s.cols(), 5);
  Eigen::VectorXd expect0(12);
  expect0 << m.col(0), m.col(0), m.col(1);
  EXPECT_EQ(s.col(0), expect0);
  Eigen::VectorXd expect2(12);
  expect2 << m.col(1), m.col(2), m.col(3);
  EXPECT_EQ(s.col(2), expect2);
  Eigen::VectorXd expect4(12);
  expect4 << m.col(3), m.col(4), m.col(4);
  EXPECT_EQ(s.col(4), expect4);

  EXPECT_THROW(stack_frames(m, 2), std::invalid_argument);
  EXPECT_THROW(stack_frames(m, 0), std::invalid_argument);
}

TEST(StackFrames, NormalizeStackedPerSubframe) {
  Eigen::VectorXd col(6);
  col << 3, 4, 0, 0, 0, 2;
  const Eigen::VectorXd n = normalize_stacked(col, 3);
  Eigen::VectorXd expect(6);
  expect << 0.6, 0.8, 0, 0, 0, 1;
  EXPECT_LT((n - expect).norm(), 1e-15);
}

TEST(Wav, EncodeDecodeRoundTrip) {
  std::vector<double> x{0.0, 0.5, -0.5, 0.999, -1.0, 0.25};
  const Wav w = decode_wav(encode_wav({x, 8000}));
  EXPECT_EQ(w.sample_rate, 8000);
  ASSERT_EQ(w.samples.size(), x.size());
  for (size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(w.samples[i], x[i], 1.0 / 32767);
}

TEST(Wav, RejectsGarbageAndRateMismatch) {
  EXPECT_THROW(decode_wav({'R', 'I', 'F', 'F'}), std::runtime_error);
  const auto dir = std::filesystem::temp_directory_path() / "unmix_wav_test";
  std::filesystem::create_directories(dir);
  const auto p = dir / "a.wav";
  const auto bytes = encode_wav({{0.1, 0.2}, 8000});
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                           std::streamsize(bytes.size()));
  EXPECT_EQ(read_wav(p).sample_rate, 8000);
  EXPECT_THROW(read_wav(p, 16000), std::runtime_error);
  std::filesystem::remove_all(dir);
}
