// sdit: train / sample / inspect-routing / match-debug / eval for the toy
// timestep-routed diffusion transformer. Exit codes: 0 ok, 1 usage/config
// error, 2 runtime failure.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "sdit/artifacts.hpp"
#include "sdit/checkpoint.hpp"
#include "sdit/config.hpp"
#include "sdit/kernels.hpp"
#include "sdit/metrics.hpp"
#include "sdit/pgm.hpp"
#include "sdit/sampler.hpp"
#include "sdit/trainer.hpp"
#include "sdit/version.hpp"

namespace {

using namespace sdit;

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::string ablation;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string backend = "auto";
};

// precedence: --out-dir flag, then SDIT_OUT_DIR, then the config file
std::string resolve_out_dir(const GlobalArgs& g, const RunConfig& cfg) {
  if (!g.out_dir.empty()) return g.out_dir;
  if (const char* env = std::getenv("SDIT_OUT_DIR"); env && *env) return env;
  return cfg.out_dir;
}

RunConfig load_run_config(const GlobalArgs& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) cfg = parse_run_config_file(g.config_path);
  if (!g.ablation.empty()) apply_ablation(cfg, g.ablation);
  if (g.seed_set) cfg.train.seed = g.seed;
  return cfg;
}

void require_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw std::invalid_argument("missing checkpoint: " + path);
}

std::string prepare_out_dir(const GlobalArgs& g, const RunConfig& cfg) {
  const std::string dir = resolve_out_dir(g, cfg);
  std::filesystem::create_directories(dir);
  return dir;
}

int cmd_train(const GlobalArgs& g, std::int64_t steps_override,
              const std::string& resume_path) {
  std::unique_ptr<Trainer> trainer;
  RunConfig cfg = load_run_config(g);
  if (!resume_path.empty()) {
    require_checkpoint(resume_path);
    trainer = std::make_unique<Trainer>(Trainer::resume(resume_path));
    if (steps_override > 0) trainer->set_target_steps(steps_override);
    cfg.train = trainer->config();
  } else {
    if (steps_override > 0) cfg.train.steps = steps_override;
    trainer = std::make_unique<Trainer>(cfg.train);
  }
  const std::string dir = prepare_out_dir(g, cfg);

  MetricsWriter writer(dir + "/metrics.csv", artifact_comments(trainer->config()));
  trainer->run(&writer);
  trainer->save(dir + "/model.ckpt");
  RunConfig echo = cfg;
  echo.out_dir = dir;
  std::ofstream ini(dir + "/config.ini");
  ini << "# build = " << kBuildVersion << "\n" << run_config_echo_ini(echo);

  const auto& hist = trainer->history();
  std::printf("trained %lld steps, final loss %.6f -> %s/model.ckpt\n",
              static_cast<long long>(trainer->steps_done()),
              hist.empty() ? 0.0 : hist.back().loss_total, dir.c_str());
  return 0;
}

int cmd_sample(const GlobalArgs& g, const std::string& ckpt, SampleConfig sc,
               bool online_weights) {
  require_checkpoint(ckpt);
  LoadedCheckpoint lc = checkpoint_load(ckpt);
  RunConfig cfg;
  cfg.train = lc.cfg;
  const std::string dir = prepare_out_dir(g, cfg);
  if (g.seed_set) sc.seed = g.seed;

  const NoiseSchedule full = NoiseSchedule::cosine(lc.model->cfg.timesteps);
  EmaState ema(lc.model->params);
  ema.buffers() = std::move(lc.ema);
  std::vector<std::vector<double>> imgs;
  if (online_weights) {
    imgs = sample_images(*lc.model, full, sc);
  } else {
    EmaScope scope(ema);  // sampling runs on the EMA weights
    imgs = sample_images(*lc.model, full, sc);
  }

  const auto comments = artifact_comments(lc.cfg);
  const int side = lc.model->cfg.image;
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "/sample_%03zu.pgm", i);
    write_pgm(dir + name, imgs[i], side, side, comments);
  }
  std::printf("wrote %zu samples to %s\n", imgs.size(), dir.c_str());
  return 0;
}

int cmd_inspect(const GlobalArgs& g, const std::string& ckpt) {
  require_checkpoint(ckpt);
  Trainer trainer = Trainer::resume(ckpt);
  RunConfig cfg;
  cfg.train = trainer.config();
  const std::string dir = prepare_out_dir(g, cfg);
  write_routing_artifacts(dir, trainer.model(), trainer.prior(), trainer.config());
  std::printf("wrote routing maps to %s\n", dir.c_str());
  return 0;
}

int cmd_match_debug(const GlobalArgs& g, const std::string& ckpt) {
  require_checkpoint(ckpt);
  Trainer trainer = Trainer::resume(ckpt);
  RunConfig cfg;
  cfg.train = trainer.config();
  const std::string dir = prepare_out_dir(g, cfg);
  write_match_debug(dir + "/match_debug.json", trainer.model(), trainer.prior(),
                    trainer.config());
  std::printf("wrote %s/match_debug.json\n", dir.c_str());
  return 0;
}

int cmd_eval(const GlobalArgs& g, const std::string& ckpt, EvalConfig ec,
             bool online_weights) {
  require_checkpoint(ckpt);
  LoadedCheckpoint lc = checkpoint_load(ckpt);
  RunConfig cfg;
  cfg.train = lc.cfg;
  const std::string dir = prepare_out_dir(g, cfg);
  if (g.seed_set) ec.seed = g.seed;

  EmaState ema(lc.model->params);
  ema.buffers() = std::move(lc.ema);
  EvalResult res;
  if (online_weights) {
    res = run_eval(dir + "/eval.json", *lc.model, lc.cfg, ec);
  } else {
    EmaScope scope(ema);
    res = run_eval(dir + "/eval.json", *lc.model, lc.cfg, ec);
  }
  std::printf("mmd2 %.8g threshold %.8g -> %s\n", res.mmd2, res.threshold,
              res.pass ? "pass" : "fail");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"timestep-routed sparse-expert diffusion toy"};
  app.set_version_flag("--version", std::string(kBuildVersion));
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "INI run config (see configs/)");
  app.add_option("--out-dir", g.out_dir,
                 "artifact directory (overrides SDIT_OUT_DIR and the config)");
  auto* seed_opt =
      app.add_option("--seed", g.seed, "override the run seed (train/sample/eval)");
  app.add_option("--ablation", g.ablation,
                 "gating preset: none|noisy|noisy_load|noisy_dp|dp|random_alloc");
  app.add_option("--backend", g.backend, "kernel backend: auto|scalar|avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  auto* train = app.add_subcommand("train", "train a model, write ckpt + metrics");
  std::int64_t steps_override = 0;
  std::string resume_path;
  train->add_option("--steps", steps_override, "override [train] steps");
  train->add_option("--resume", resume_path, "continue from a checkpoint");

  auto* sample = app.add_subcommand("sample", "generate PGM images from a ckpt");
  std::string ckpt;
  SampleConfig sc;
  bool online_weights = false;
  sample->add_option("--ckpt", ckpt, "checkpoint path")->required();
  sample->add_option("--count", sc.count, "number of images");
  sample->add_option("--steps", sc.steps, "denoising steps (respaced)");
  sample->add_option("--guidance", sc.guidance, "guidance scale, 1 disables");
  sample->add_option("--label", sc.label, "class label, -1 unconditional");
  sample->add_option("--sample-seed", sc.seed, "sampling rng seed");
  sample->add_flag("--online-weights", online_weights,
                   "sample the online weights instead of the EMA weights");

  auto* inspect =
      app.add_subcommand("inspect-routing", "export stacked activation maps");
  inspect->add_option("--ckpt", ckpt, "checkpoint path")->required();

  auto* match =
      app.add_subcommand("match-debug", "dump cost matrix, permutation, prior loss");
  match->add_option("--ckpt", ckpt, "checkpoint path")->required();

  auto* eval = app.add_subcommand("eval", "sample and score MMD^2 vs held-out data");
  EvalConfig ec;
  eval->add_option("--ckpt", ckpt, "checkpoint path")->required();
  eval->add_option("--count", ec.samples, "samples to draw");
  eval->add_option("--sample-steps", ec.sample_steps, "denoising steps");
  eval->add_option("--guidance", ec.guidance, "guidance scale for conditional models");
  eval->add_option("--heldout", ec.heldout, "held-out reference size");
  eval->add_option("--permutations", ec.permutations, "null-distribution resamples");
  eval->add_flag("--online-weights", online_weights,
                 "evaluate the online weights instead of the EMA weights");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    g.seed_set = seed_opt->count() > 0;
    using sdit::kernels::Backend;
    sdit::kernels::select(g.backend == "scalar"  ? Backend::Scalar
                          : g.backend == "avx2" ? Backend::Avx2
                                                : Backend::Auto);
    if (train->parsed()) return cmd_train(g, steps_override, resume_path);
    if (sample->parsed()) return cmd_sample(g, ckpt, sc, online_weights);
    if (inspect->parsed()) return cmd_inspect(g, ckpt);
    if (match->parsed()) return cmd_match_debug(g, ckpt);
    if (eval->parsed()) return cmd_eval(g, ckpt, ec, online_weights);
    std::fprintf(stderr, "no subcommand\n");
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
