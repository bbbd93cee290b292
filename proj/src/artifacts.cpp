#include "sdit/artifacts.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sdit/dataset.hpp"
#include "sdit/losses.hpp"
#include "sdit/matching.hpp"
#include "sdit/metrics.hpp"
#include "sdit/mmd.hpp"
#include "sdit/ops.hpp"
#include "sdit/pgm.hpp"
#include "sdit/version.hpp"

namespace sdit {

namespace {

using nlohmann::json;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("artifacts: cannot open " + path);
  out << text;
  if (!out) throw std::runtime_error("artifacts: write failed for " + path);
}

void write_map_csv(const std::string& path, std::span<const std::uint8_t> map,
                   int T, int cols, const std::vector<std::string>& comments) {
  std::ostringstream o;
  for (const auto& c : comments) o << "# " << c << "\n";
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < cols; ++c)
      o << static_cast<int>(map[static_cast<std::size_t>(t) * cols + c])
        << (c + 1 == cols ? "" : ",");
    o << "\n";
  }
  write_text(path, o.str());
}

void write_map_pgm(const std::string& path, std::span<const std::uint8_t> map,
                   int T, int cols, const std::vector<std::string>& comments) {
  std::vector<double> img(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) img[i] = map[i] ? 1.0 : -1.0;
  write_pgm(path, img, cols, T, comments);
}

// Stacked gate probabilities for one timestep, noise-free.
Tensor p_tot_at(const Model& model, int t) {
  NoGradGuard ng;
  const Tensor e = model.embed.forward(t);
  std::vector<Tensor> ps;
  ps.reserve(model.cfg.blocks);
  for (int i = 0; i < model.cfg.blocks; ++i) ps.push_back(model.gating.probs(i, e));
  return concat(ps, 0);
}

}  // namespace

std::vector<std::string> artifact_comments(const TrainConfig& cfg) {
  return {"config = " + train_config_to_json(cfg),
          std::string("build = ") + kBuildVersion};
}

void write_routing_artifacts(const std::string& dir, const Model& model,
                             const PriorMask& prior, const TrainConfig& cfg) {
  if (!model.cfg.smoe)
    throw std::runtime_error("inspect-routing: model has no expert layers");
  const int T = model.cfg.timesteps;
  const int N = model.cfg.blocks, M = model.cfg.experts;
  const int cols = N * M;
  const auto comments = artifact_comments(cfg);

  const auto gate = model.gate_map();
  write_map_csv(dir + "/wgate.csv", gate, T, cols, comments);
  write_map_pgm(dir + "/wgate.pgm", gate, T, cols, comments);
  write_map_csv(dir + "/wprior.csv", prior.rows, T, cols, comments);
  write_map_pgm(dir + "/wprior.pgm", prior.rows, T, cols, comments);

  const auto cost = cdist_columns(gate, prior.rows, T, cols);
  const auto pi = hungarian(cost, cols);

  json blocks = json::array();
  for (int i = 0; i < N; ++i) {
    json shared = json::array();
    json counts = json::array();
    for (int j = 0; j < M; ++j) {
      int active = 0;
      for (int t = 0; t < T; ++t)
        active += gate[static_cast<std::size_t>(t) * cols + i * M + j];
      counts.push_back(active);
      if (active == T) shared.push_back(j);
    }
    blocks.push_back({{"block", i}, {"shared_experts", shared}, {"active_steps", counts}});
  }
  json j;
  j["config"] = json::parse(train_config_to_json(cfg));
  j["build"] = kBuildVersion;
  j["blocks"] = blocks;
  j["pi"] = pi;
  j["match_cost"] = assignment_cost(cost, cols, pi);
  j["prior_shared_lower_bound"] =
      shared_expert_lower_bound(N, M, model.cfg.topk);
  j["prior_shared_columns"] = shared_columns(prior).size();
  write_text(dir + "/routing_summary.json", j.dump(2) + "\n");
}

void write_match_debug(const std::string& path, const Model& model,
                       const PriorMask& prior, const TrainConfig& cfg) {
  if (!model.cfg.smoe)
    throw std::runtime_error("match-debug: model has no expert layers");
  const int T = model.cfg.timesteps;
  const int cols = model.cfg.blocks * model.cfg.experts;

  const auto gate = model.gate_map();
  const auto cost = cdist_columns(gate, prior.rows, T, cols);
  const auto pi = hungarian(cost, cols);

  NoGradGuard ng;
  json per_t = json::array();
  double mean = 0.0;
  for (int t = 1; t <= T; ++t) {
    const Tensor p_tot = p_tot_at(model, t);
    const double v = diffusion_prior_loss(p_tot, pi, prior.row(t)).item();
    per_t.push_back({{"t", t}, {"loss_dp", v}});
    mean += v;
  }
  mean /= T;

  json cmat = json::array();
  for (int i = 0; i < cols; ++i) {
    json row = json::array();
    for (int j = 0; j < cols; ++j)
      row.push_back(cost[static_cast<std::size_t>(i) * cols + j]);
    cmat.push_back(row);
  }
  json j;
  j["config"] = json::parse(train_config_to_json(cfg));
  j["build"] = kBuildVersion;
  j["cost"] = cmat;
  j["pi"] = pi;
  j["match_cost"] = assignment_cost(cost, cols, pi);
  j["loss_dp_per_t"] = per_t;
  j["loss_dp_mean"] = mean;
  write_text(path, j.dump(2) + "\n");
}

EvalResult run_eval(const std::string& json_path, const Model& model,
                    const TrainConfig& cfg, const EvalConfig& ec) {
  if (ec.samples < 64 || ec.heldout < 64)
    throw std::invalid_argument("eval: need >= 64 samples per side");
  const NoiseSchedule full = NoiseSchedule::cosine(model.cfg.timesteps);

  std::vector<std::vector<double>> samples;
  samples.reserve(ec.samples);
  if (model.cfg.classes > 0) {
    // round-robin over classes, guided
    int done = 0;
    for (int c = 0; c < model.cfg.classes; ++c) {
      const int want = (ec.samples - done) / (model.cfg.classes - c);
      SampleConfig sc{want, ec.sample_steps, ec.guidance, c, ec.seed + c};
      auto part = sample_images(model, full, sc);
      for (auto& img : part) samples.push_back(std::move(img));
      done += want;
    }
  } else {
    SampleConfig sc{ec.samples, ec.sample_steps, 1.0, -1, ec.seed};
    samples = sample_images(model, full, sc);
  }

  const Dataset held = gen_dataset(cfg.dataset, ec.heldout, cfg.data_seed + 1);

  const double mmd2 = mmd2_biased(samples, held.images);
  std::mt19937_64 rng(ec.seed ^ 0x6d6d64ULL);
  const double thr = mmd2_permutation_threshold(samples, held.images,
                                                ec.permutations, ec.percentile, rng);

  EvalResult res{mmd2, thr, mmd2 < thr};
  json j;
  j["config"] = json::parse(train_config_to_json(cfg));
  j["build"] = kBuildVersion;
  j["samples"] = ec.samples;
  j["heldout"] = ec.heldout;
  j["sample_steps"] = ec.sample_steps;
  j["guidance"] = ec.guidance;
  j["seed"] = ec.seed;
  j["permutations"] = ec.permutations;
  j["percentile"] = ec.percentile;
  j["mmd2"] = res.mmd2;
  j["threshold"] = res.threshold;
  j["pass"] = res.pass;
  write_text(json_path, j.dump(2) + "\n");
  return res;
}

}  // namespace sdit
