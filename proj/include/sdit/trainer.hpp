#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "sdit/dataset.hpp"
#include "sdit/metrics.hpp"
#include "sdit/network.hpp"
#include "sdit/optim.hpp"
#include "sdit/prior.hpp"
#include "sdit/schedule.hpp"

namespace sdit {

// Full run description. Every field is echoed into the checkpoint header and
// all artifacts, so runs are reproducible from any output file.
struct TrainConfig {
  ModelConfig model;
  ModelSeeds seeds;

  std::string dataset = "blobs";
  std::uint64_t data_seed = 7;
  int train_size = 512;

  std::int64_t steps = 1000;
  int batch = 16;
  AdamConfig adam;  // lr 1e-4, no weight decay

  double lambda_dp = 1.0;
  bool load_balance = false;  // ablation: add the importance-CV^2 penalty
  double lambda_load = 0.1;   // weight used when load_balance is on
  double ema_decay = 0.9999;
  int match_every = 1;  // refresh the column matching every R steps

  std::uint64_t seed = 1234;
  double label_drop = 0.1;  // null-conditioning rate for conditional runs
  bool flip_aug = true;
  bool random_alloc_prior = false;  // ablation: shuffled target allocation
  double prior_alpha = 4.0;

  void validate() const;
};

std::string train_config_to_json(const TrainConfig& cfg, bool pretty = false);
TrainConfig train_config_from_json(const std::string& text);

struct LoadedCheckpoint;  // checkpoint.hpp

// Single-process training loop: per-sample uniform timesteps, noise MSE plus
// the matching-aligned prior term (mean over the batch's distinct timesteps),
// AdamW, EMA shadow weights, and periodic re-matching of gate columns to
// prior columns. Deterministic per seed.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);
  static Trainer resume(const std::string& ckpt_path);

  MetricsRow step();                         // one optimizer step
  void run(MetricsWriter* writer = nullptr);  // up to cfg.steps
  void set_target_steps(std::int64_t steps);  // extend a resumed run

  void save(const std::string& path) const;

  const TrainConfig& config() const { return cfg_; }
  Model& model() { return *model_; }
  EmaState& ema() { return *ema_; }
  const PriorMask& prior() const { return prior_; }
  const std::vector<int>& pi() const { return pi_; }
  double match_cost() const { return match_cost_; }
  std::int64_t steps_done() const { return step_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const Dataset& data() const { return data_; }
  const std::vector<MetricsRow>& history() const { return history_; }

 private:
  explicit Trainer(LoadedCheckpoint&& lc);

  void refresh_matching();
  std::vector<std::uint8_t> ema_gate_map();

  TrainConfig cfg_;
  Dataset data_;
  NoiseSchedule schedule_;
  PriorMask prior_;
  std::unique_ptr<Model> model_;
  std::unique_ptr<AdamW> opt_;
  std::unique_ptr<EmaState> ema_;
  std::vector<int> pi_;
  double match_cost_ = 0.0;
  std::int64_t step_ = 0;
  std::mt19937_64 rng_;
  std::vector<std::uint8_t> prev_map_;
  std::vector<MetricsRow> history_;
};

}  // namespace sdit
