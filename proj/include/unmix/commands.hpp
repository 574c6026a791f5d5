// Batch commands behind the `unmix` CLI. Each command validates its inputs
// fully, computes everything in memory and only then writes its outputs
// through StagedOutputs, so a failing command leaves no files behind.

#pragma once

#include "unmix/config.hpp"
#include "unmix/io.hpp"
#include "unmix/metrics.hpp"
#include "unmix/model_io.hpp"
#include "unmix/pipeline.hpp"
#include "unmix/wav.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace unmix {

namespace fs = std::filesystem;

namespace detail {

inline std::vector<std::vector<double>> read_all(const std::vector<fs::path>& paths, int rate) {
  if (paths.empty()) throw std::invalid_argument("no input WAV files given");
  std::vector<std::vector<double>> out;
  for (const auto& p : paths) out.push_back(read_wav(p, rate).samples);
  return out;
}

inline std::string summarize_trace(const std::vector<double>& trace) {
  if (trace.empty()) return "(empty)";
  std::ostringstream os;
  os << "start " << trace.front() << ", end " << trace.back() << " over " << trace.size() - 1
     << " iterations";
  return os.str();
}

}  // namespace detail

struct TrainNmfArgs {
  std::vector<fs::path> wavs;
  fs::path out;
  int source_id = 1;
};

inline NmfModel cmd_train_nmf(const TrainNmfArgs& args, const RunConfig& rc, std::ostream& log) {
  rc.validate();
  if (args.out.empty()) throw std::invalid_argument("train-nmf: output path required");
  const PipelineConfig& cfg = rc.pipeline;
  const Eigen::MatrixXd mag =
      training_magnitudes(detail::read_all(args.wavs, cfg.stft.sample_rate), cfg.stft);
  NmfModel model = train_source_dictionary(mag, args.source_id, cfg);
  log << "train-nmf: source " << args.source_id << ", " << mag.cols() << " frames, rank "
      << model.rank() << ", IS divergence " << detail::summarize_trace(model.divergence_trace)
      << '\n';
  write_file_atomic(args.out, encode_nmf(model));
  return model;
}

struct TrainDnnArgs {
  std::vector<fs::path> source1, source2;
  fs::path out;
};

inline DnnModel cmd_train_dnn(const TrainDnnArgs& args, const RunConfig& rc, std::ostream& log) {
  rc.validate();
  if (args.out.empty()) throw std::invalid_argument("train-dnn: output path required");
  const PipelineConfig& cfg = rc.pipeline;
  const Eigen::MatrixXd m1 =
      training_magnitudes(detail::read_all(args.source1, cfg.stft.sample_rate), cfg.stft);
  const Eigen::MatrixXd m2 =
      training_magnitudes(detail::read_all(args.source2, cfg.stft.sample_rate), cfg.stft);
  DnnTraining dt = train_joint_dnn(m1, m2, cfg);
  const LabeledFrames data = labeled_frames(m1, m2, cfg.dnn.context_frames);
  log << "train-dnn: " << data.inputs.cols() << " frames, L=" << cfg.dnn.context_frames
      << ", loss " << detail::summarize_trace(dt.loss_trace) << ", training accuracy "
      << classification_accuracy(dt.model, data.inputs, data.labels) << '\n';
  write_file_atomic(args.out, encode_dnn(dt.model));
  return std::move(dt.model);
}

struct SeparateArgs {
  fs::path mix;
  fs::path nmf1, nmf2, dnn;
  fs::path out_dir;
};

inline const char* kSource1Wav = "source1.wav";
inline const char* kSource2Wav = "source2.wav";
inline const char* kReportFile = "report.jsonl";

/// One JSON object per STFT frame.
inline std::string separation_report(const SeparationResult& res) {
  std::ostringstream os;
  for (size_t t = 0; t < res.frames.size(); ++t) {
    const FrameRecord& f = res.frames[t];
    nlohmann::ordered_json j;
    j["frame"] = t;
    j["method"] = res.nmf_only ? "nmf" : "dnn";
    j["skipped"] = f.skipped;
    j["u"] = f.u;
    j["v"] = f.v;
    if (!res.nmf_only) {
      j["energy_initial"] = f.initial.total;
      j["energy_final"] = f.final.total;
      j["e1"] = f.final.e1;
      j["e2"] = f.final.e2;
      j["e_err"] = f.final.e_err;
      j["e_neg"] = f.final.e_neg;
      j["iterations"] = f.iterations;
    }
    j["status"] = f.status;
    j["mask1_mean"] = res.mask1.col(Eigen::Index(t)).mean();
    os << j.dump() << '\n';
  }
  return os.str();
}

inline SeparationResult cmd_separate(const SeparateArgs& args, const RunConfig& rc,
                                     std::ostream& log) {
  rc.validate();
  const PipelineConfig& cfg = rc.pipeline;
  if (args.out_dir.empty()) throw std::invalid_argument("separate: output directory required");
  const Wav mix = read_wav(args.mix, cfg.stft.sample_rate);
  const NmfModel nmf1 = load_nmf(args.nmf1);
  const NmfModel nmf2 = load_nmf(args.nmf2);
  std::optional<DnnModel> dnn;
  if (!cfg.nmf_only) {
    if (args.dnn.empty()) throw std::invalid_argument("separate: --dnn required unless --nmf-only");
    dnn = load_dnn(args.dnn);
  }
  SeparationResult res =
      separate(mix.samples, {&nmf1, &nmf2, dnn ? &*dnn : nullptr}, cfg);

  size_t reverted = 0, skipped = 0;
  for (const auto& f : res.frames) {
    reverted += f.status == "reverted";
    skipped += f.skipped;
  }
  log << "separate: " << res.frames.size() << " frames (" << skipped << " silent"
      << (cfg.nmf_only ? "" : ", " + std::to_string(reverted) + " reverted") << "), mode "
      << (cfg.nmf_only ? "nmf-only" : "dnn") << '\n';

  fs::create_directories(args.out_dir);
  StagedOutputs out;
  out.add(args.out_dir / kSource1Wav, encode_wav({res.audio1, mix.sample_rate}));
  out.add(args.out_dir / kSource2Wav, encode_wav({res.audio2, mix.sample_rate}));
  out.add(args.out_dir / kReportFile, separation_report(res));
  out.commit();
  return res;
}

struct EvaluateArgs {
  std::vector<fs::path> est1, est2, ref1, ref2;
  std::vector<std::string> utterances;  // defaults to the est1 file stems
  fs::path out_csv;
  double smr_db = 0.0;
  std::string method = "dnn";
};

/// Per-utterance rows labelled "<utt>:s1" / "<utt>:s2", then "mean:s1" and
/// "mean:s2" averages.
inline std::vector<EvalReport> cmd_evaluate(const EvaluateArgs& args, std::ostream& log) {
  const size_t n = args.est1.size();
  if (n == 0) throw std::invalid_argument("evaluate: no estimates given");
  if (args.est2.size() != n || args.ref1.size() != n || args.ref2.size() != n)
    throw std::invalid_argument("evaluate: est1/est2/ref1/ref2 lists must have equal length");
  if (!args.utterances.empty() && args.utterances.size() != n)
    throw std::invalid_argument("evaluate: one utterance name per estimate required");
  if (args.out_csv.empty()) throw std::invalid_argument("evaluate: output CSV required");

  std::vector<EvalReport> rows, mean(2);
  for (size_t i = 0; i < n; ++i) {
    const Wav e1 = read_wav(args.est1[i]), e2 = read_wav(args.est2[i]);
    const Wav r1 = read_wav(args.ref1[i]), r2 = read_wav(args.ref2[i]);
    const std::string utt =
        args.utterances.empty() ? args.est1[i].stem().string() : args.utterances[i];
    const EvalReport sources[2] = {evaluate_source(e1.samples, r1.samples, r2.samples),
                                   evaluate_source(e2.samples, r2.samples, r1.samples)};
    for (int s = 0; s < 2; ++s) {
      EvalReport r = sources[s];
      r.utterance = utt + ":s" + std::to_string(s + 1);
      r.smr_db = args.smr_db;
      r.method = args.method;
      rows.push_back(r);
      mean[s].sdr_db += r.sdr_db / double(n);
      mean[s].sir_db += r.sir_db / double(n);
      mean[s].snr_db += r.snr_db / double(n);
    }
  }
  for (int s = 0; s < 2; ++s) {
    mean[s].utterance = "mean:s" + std::to_string(s + 1);
    mean[s].smr_db = args.smr_db;
    mean[s].method = args.method;
    log << "evaluate: source " << s + 1 << " mean SDR " << mean[s].sdr_db << " dB, SIR "
        << mean[s].sir_db << " dB, SNR " << mean[s].snr_db << " dB\n";
    rows.push_back(mean[s]);
  }
  write_file_atomic(args.out_csv, [&] {
    const std::string csv = to_csv(rows);
    return std::vector<unsigned char>(csv.begin(), csv.end());
  }());
  return rows;
}

struct MixArgs {
  fs::path speech, music;
  double smr_db = 0.0;
  fs::path out_mix, out_speech, out_music;
  uint64_t seed = 1;
};

/// Mixes the speech file with a seeded random excerpt of the music file.
inline Mixture cmd_mix(const MixArgs& args, std::ostream& log) {
  if (args.out_mix.empty()) throw std::invalid_argument("mix: output path required");
  const Wav speech = read_wav(args.speech);
  const Wav music = read_wav(args.music, speech.sample_rate);
  if (music.samples.size() < speech.samples.size())
    throw std::invalid_argument("mix: music shorter than speech");
  std::mt19937_64 rng(args.seed);
  std::uniform_int_distribution<size_t> pick(0, music.samples.size() - speech.samples.size());
  const size_t offset = pick(rng);
  const std::span<const double> excerpt(music.samples.data() + offset, speech.samples.size());
  Mixture m = mix_at_smr(speech.samples, excerpt, args.smr_db);
  log << "mix: SMR " << args.smr_db << " dB, music offset " << offset << ", gain "
      << m.music_gain << '\n';

  StagedOutputs out;
  out.add(args.out_mix, encode_wav({m.mixture, speech.sample_rate}));
  if (!args.out_speech.empty()) out.add(args.out_speech, encode_wav({m.speech, speech.sample_rate}));
  if (!args.out_music.empty()) out.add(args.out_music, encode_wav({m.music, speech.sample_rate}));
  out.commit();
  return m;
}

}  // namespace unmix
