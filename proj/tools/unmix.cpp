// unmix: train source models, separate mixtures and score the results.

#include "unmix/commands.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
  CLI::App app{"Single-channel two-source separation with NMF initialization and "
               "DNN-guided energy minimization"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> frames, threads;
  bool nmf_only = false;
  app.add_option("--config", config_path, "Sectioned key=value config file");
  app.add_option("--seed", seed, "Run seed (overrides run.seed)");
  app.add_option("--frames", frames, "Stacked context frames L for the DNN (odd)");
  app.add_option("--threads", threads, "Worker threads for per-frame solves");
  app.add_flag("--nmf-only", nmf_only, "Separate with the NMF soft masks only (baseline)");

  unmix::TrainNmfArgs nmf_args;
  auto* train_nmf = app.add_subcommand("train-nmf", "Train one source's IS-NMF dictionary");
  train_nmf->add_option("wavs", nmf_args.wavs, "Training WAV files")->required();
  train_nmf->add_option("-o,--out", nmf_args.out, "Output model file")->required();
  train_nmf->add_option("--source", nmf_args.source_id, "Source id (1 or 2)")
      ->check(CLI::IsMember({1, 2}));

  unmix::TrainDnnArgs dnn_args;
  auto* train_dnn = app.add_subcommand("train-dnn", "Train the joint two-output DNN");
  train_dnn->add_option("--source1", dnn_args.source1, "Source 1 training WAVs")->required();
  train_dnn->add_option("--source2", dnn_args.source2, "Source 2 training WAVs")->required();
  train_dnn->add_option("-o,--out", dnn_args.out, "Output model file")->required();

  unmix::SeparateArgs sep_args;
  auto* sep = app.add_subcommand("separate", "Separate a mixture into two WAVs and a report");
  sep->add_option("mix", sep_args.mix, "Mixture WAV")->required();
  sep->add_option("--nmf1", sep_args.nmf1, "Source 1 NMF model");
  sep->add_option("--nmf2", sep_args.nmf2, "Source 2 NMF model");
  sep->add_option("--dnn", sep_args.dnn, "Joint DNN model");
  sep->add_option("-o,--out-dir", sep_args.out_dir, "Output directory");

  unmix::EvaluateArgs eval_args;
  auto* eval = app.add_subcommand("evaluate", "SDR/SIR/SNR of estimates against references");
  eval->add_option("--est1", eval_args.est1, "Source 1 estimates")->required();
  eval->add_option("--est2", eval_args.est2, "Source 2 estimates")->required();
  eval->add_option("--ref1", eval_args.ref1, "Source 1 references")->required();
  eval->add_option("--ref2", eval_args.ref2, "Source 2 references")->required();
  eval->add_option("--utterance", eval_args.utterances, "Utterance names");
  eval->add_option("--smr", eval_args.smr_db, "Mixing SMR in dB (reported)");
  eval->add_option("--method", eval_args.method, "Method label (reported)");
  eval->add_option("-o,--out", eval_args.out_csv, "Output CSV")->required();

  unmix::MixArgs mix_args;
  auto* mix = app.add_subcommand("mix", "Mix speech with a music excerpt at a given SMR");
  mix->add_option("--speech", mix_args.speech, "Speech (source 1) WAV")->required();
  mix->add_option("--music", mix_args.music, "Music (source 2) WAV")->required();
  mix->add_option("--smr", mix_args.smr_db, "Speech-to-music ratio in dB")->required();
  mix->add_option("-o,--out", mix_args.out_mix, "Mixture WAV")->required();
  mix->add_option("--out-speech", mix_args.out_speech, "Scaled speech reference WAV");
  mix->add_option("--out-music", mix_args.out_music, "Scaled music reference WAV");

  CLI11_PARSE(app, argc, argv);

  try {
    unmix::RunConfig rc = config_path.empty() ? unmix::RunConfig{} : unmix::load_config(config_path);
    auto& cfg = rc.pipeline;
    if (seed) cfg.seed = *seed;
    if (frames) cfg.dnn.context_frames = *frames;
    if (threads) cfg.threads = *threads;
    cfg.nmf_only = nmf_only;
    rc.validate();

    if (*train_nmf) {
      unmix::cmd_train_nmf(nmf_args, rc, std::cerr);
    } else if (*train_dnn) {
      unmix::cmd_train_dnn(dnn_args, rc, std::cerr);
    } else if (*sep) {
      if (sep_args.nmf1.empty()) sep_args.nmf1 = rc.paths.nmf1;
      if (sep_args.nmf2.empty()) sep_args.nmf2 = rc.paths.nmf2;
      if (sep_args.dnn.empty()) sep_args.dnn = rc.paths.dnn;
      if (sep_args.out_dir.empty()) sep_args.out_dir = rc.paths.out_dir;
      if (sep_args.nmf1.empty() || sep_args.nmf2.empty())
        throw std::invalid_argument("separate: --nmf1 and --nmf2 are required");
      unmix::cmd_separate(sep_args, rc, std::cerr);
    } else if (*eval) {
      unmix::cmd_evaluate(eval_args, std::cerr);
    } else if (*mix) {
      mix_args.seed = cfg.seed;
      unmix::cmd_mix(mix_args, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "unmix: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
