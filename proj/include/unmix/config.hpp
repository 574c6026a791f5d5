// Run configuration: sectioned key = value text.
//
//   [stft]    window_len hop fft_len sample_rate
//   [nmf]     rank train_iters decompose_iters
//   [dnn]     hidden (comma list) context_frames rbm_epochs bp_epochs
//             output_only_epochs learning_rate momentum batch_size
//   [energy]  lambda beta max_iter grad_tol history
//   [run]     seed threads
//   [paths]   nmf1 nmf2 dnn out_dir
//
// Missing keys keep their defaults; unknown sections or keys are errors.

#pragma once

#include "unmix/pipeline.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace unmix {

struct RunPaths {
  std::string nmf1, nmf2, dnn, out_dir;
};

struct RunConfig {
  PipelineConfig pipeline;
  RunPaths paths;

  void validate() const { pipeline.validate(); }
};

namespace detail {

inline std::vector<Eigen::Index> parse_size_list(const std::string& text) {
  std::vector<Eigen::Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t used = 0;
    const long long v = std::stoll(item, &used);
    if (item.find_first_not_of(" \t", used) != std::string::npos)
      throw std::invalid_argument("bad layer size '" + item + "'");
    out.push_back(Eigen::Index(v));
  }
  return out;
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }

  static const std::map<std::string, std::set<std::string>> known = {
      {"stft", {"window_len", "hop", "fft_len", "sample_rate"}},
      {"nmf", {"rank", "train_iters", "decompose_iters"}},
      {"dnn",
       {"hidden", "context_frames", "rbm_epochs", "bp_epochs", "output_only_epochs",
        "learning_rate", "momentum", "batch_size"}},
      {"energy", {"lambda", "beta", "max_iter", "grad_tol", "history"}},
      {"run", {"seed", "threads"}},
      {"paths", {"nmf1", "nmf2", "dnn", "out_dir"}},
  };
  for (const auto& [section, body] : tree) {
    const auto it = known.find(section);
    if (it == known.end() || !body.data().empty())
      throw std::invalid_argument("config: unknown section or top-level key '" + section + "'");
    for (const auto& [key, value] : body)
      if (!it->second.count(key))
        throw std::invalid_argument("config: unknown key '" + section + "." + key + "'");
  }

  RunConfig rc;
  PipelineConfig& c = rc.pipeline;
  auto get = [&](const char* path, auto& field) {
    using T = std::decay_t<decltype(field)>;
    try {
      if (tree.get_child_optional(path)) field = tree.get<T>(path);
    } catch (const pt::ptree_bad_data&) {
      throw std::invalid_argument(std::string("config: bad value for ") + path);
    }
  };
  get("stft.window_len", c.stft.window_len);
  get("stft.hop", c.stft.hop);
  get("stft.fft_len", c.stft.fft_len);
  get("stft.sample_rate", c.stft.sample_rate);
  c.stft.n_bins = c.stft.fft_len / 2 + 1;
  get("nmf.rank", c.nmf.rank);
  get("nmf.train_iters", c.nmf.train_iters);
  get("nmf.decompose_iters", c.nmf.decompose_iters);
  if (auto h = tree.get_optional<std::string>("dnn.hidden"))
    c.dnn.hidden = detail::parse_size_list(*h);
  get("dnn.context_frames", c.dnn.context_frames);
  get("dnn.rbm_epochs", c.dnn.train.rbm_epochs);
  get("dnn.bp_epochs", c.dnn.train.bp_epochs);
  get("dnn.output_only_epochs", c.dnn.train.output_only_epochs);
  get("dnn.learning_rate", c.dnn.train.learning_rate);
  get("dnn.momentum", c.dnn.train.momentum);
  get("dnn.batch_size", c.dnn.train.batch_size);
  get("energy.lambda", c.energy.lambda);
  get("energy.beta", c.energy.beta);
  get("energy.max_iter", c.energy.solver.max_iter);
  get("energy.grad_tol", c.energy.solver.grad_tol);
  get("energy.history", c.energy.solver.history);
  get("run.seed", c.seed);
  get("run.threads", c.threads);
  get("paths.nmf1", rc.paths.nmf1);
  get("paths.nmf2", rc.paths.nmf2);
  get("paths.dnn", rc.paths.dnn);
  get("paths.out_dir", rc.paths.out_dir);
  rc.validate();
  return rc;
}

inline RunConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  return parse_config(in);
}

}  // namespace unmix
