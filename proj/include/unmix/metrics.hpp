// Projection-based separation metrics and level-matched mixing.

#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace unmix {

/// Ratios with a vanishing error term report this instead of +inf.
inline constexpr double kMetricCapDb = 300.0;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline void require_same_length(std::span<const double> a, std::span<const double> b,
                                const char* what) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": length mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                ")");
}

inline double capped_db(double num, double den) {
  if (den <= 0.0) return kMetricCapDb;
  if (num <= 0.0) return -kMetricCapDb;
  return std::clamp(10.0 * std::log10(num / den), -kMetricCapDb, kMetricCapDb);
}

inline double rms(std::span<const double> x) {
  return x.empty() ? 0.0 : std::sqrt(dot(x, x) / double(x.size()));
}

}  // namespace detail

/// (<est, ref> / <ref, ref>) ref
inline std::vector<double> project(std::span<const double> estimate,
                                   std::span<const double> reference) {
  detail::require_same_length(estimate, reference, "project");
  const double rr = detail::dot(reference, reference);
  if (rr == 0.0) throw std::invalid_argument("project: zero reference");
  const double scale = detail::dot(estimate, reference) / rr;
  std::vector<double> out(reference.size());
  std::transform(reference.begin(), reference.end(), out.begin(),
                 [scale](double r) { return scale * r; });
  return out;
}

/// 10 log10(||target||^2 / ||estimate - target||^2)
inline double sdr(std::span<const double> estimate, std::span<const double> reference) {
  const std::vector<double> target = project(estimate, reference);
  double err = 0.0;
  for (size_t i = 0; i < target.size(); ++i) {
    const double e = estimate[i] - target[i];
    err += e * e;
  }
  return detail::capped_db(detail::dot(target, target), err);
}

/// Target energy over the energy of the part of the residual that lies along
/// the interfering source.
inline double sir(std::span<const double> estimate, std::span<const double> reference,
                  std::span<const double> interference) {
  detail::require_same_length(estimate, interference, "sir");
  if (detail::dot(interference, interference) == 0.0)
    throw std::invalid_argument("sir: zero interference");
  const std::vector<double> target = project(estimate, reference);
  std::vector<double> residual(estimate.size());
  for (size_t i = 0; i < residual.size(); ++i) residual[i] = estimate[i] - target[i];
  const std::vector<double> interf = project(residual, interference);
  return detail::capped_db(detail::dot(target, target), detail::dot(interf, interf));
}

/// 10 log10(||ref||^2 / ||ref - estimate||^2)
inline double snr(std::span<const double> estimate, std::span<const double> reference) {
  detail::require_same_length(estimate, reference, "snr");
  const double rr = detail::dot(reference, reference);
  if (rr == 0.0) throw std::invalid_argument("snr: zero reference");
  double err = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    const double e = reference[i] - estimate[i];
    err += e * e;
  }
  return detail::capped_db(rr, err);
}

struct Mixture {
  std::vector<double> mixture;
  std::vector<double> speech;  // reference 1, unchanged
  std::vector<double> music;   // reference 2, scaled
  double music_gain = 1.0;
};

/// Scales `music` so that 20 log10(rms(speech) / rms(music')) == smr_db and
/// sums the two.
inline Mixture mix_at_smr(std::span<const double> speech, std::span<const double> music,
                          double smr_db) {
  detail::require_same_length(speech, music, "mix_at_smr");
  const double rs = detail::rms(speech), rm = detail::rms(music);
  if (rs == 0.0 || rm == 0.0) throw std::invalid_argument("mix_at_smr: zero-energy input");
  Mixture m;
  m.music_gain = rs / (rm * std::pow(10.0, smr_db / 20.0));
  m.speech.assign(speech.begin(), speech.end());
  m.music.resize(music.size());
  m.mixture.resize(music.size());
  for (size_t i = 0; i < music.size(); ++i) {
    m.music[i] = m.music_gain * music[i];
    m.mixture[i] = m.speech[i] + m.music[i];
  }
  return m;
}

inline double smr_db(std::span<const double> speech, std::span<const double> music) {
  return 20.0 * std::log10(detail::rms(speech) / detail::rms(music));
}

struct EvalReport {
  std::string utterance;
  double smr_db = 0.0;
  std::string method;
  double sdr_db = 0.0, sir_db = 0.0, snr_db = 0.0;
};

/// Metrics of one estimate against its reference, with the other source as
/// interference.
inline EvalReport evaluate_source(std::span<const double> estimate,
                                  std::span<const double> reference,
                                  std::span<const double> interference) {
  EvalReport r;
  r.sdr_db = sdr(estimate, reference);
  r.sir_db = sir(estimate, reference, interference);
  r.snr_db = snr(estimate, reference);
  return r;
}

inline constexpr const char* kEvalCsvHeader = "utterance,smr_db,method,sdr,sir,snr";

inline std::string to_csv(const std::vector<EvalReport>& rows) {
  std::ostringstream os;
  os << kEvalCsvHeader << '\n' << std::setprecision(10);
  for (const auto& r : rows)
    os << r.utterance << ',' << r.smr_db << ',' << r.method << ',' << r.sdr_db << ','
       << r.sir_db << ',' << r.snr_db << '\n';
  return os.str();
}

}  // namespace unmix
