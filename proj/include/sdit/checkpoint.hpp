#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sdit/network.hpp"
#include "sdit/optim.hpp"
#include "sdit/trainer.hpp"

namespace sdit {

// Everything needed to resume a run or evaluate a trained model. The model
// is rebuilt from the embedded config with its parameters restored bit-exactly.
struct LoadedCheckpoint {
  TrainConfig cfg;
  std::int64_t step = 0;
  std::vector<int> pi;
  double match_cost = 0.0;
  std::string rng_state;  // serialized mt19937_64
  long adam_steps = 0;
  std::string build_version;  // of the writer

  std::unique_ptr<Model> model;
  std::vector<std::vector<double>> ema, adam_m, adam_v;
};

// Layout: 8-byte magic, format version, little-endian u64 JSON header length,
// JSON header (config echo, parameter manifest, rng state, permutation),
// then raw doubles: parameters, EMA buffers, Adam m, Adam v.
void checkpoint_save(const std::string& path, const TrainConfig& cfg,
                     const Model& model, const EmaState& ema, const AdamW& opt,
                     const std::vector<int>& pi, double match_cost,
                     std::int64_t step, const std::string& rng_state);

LoadedCheckpoint checkpoint_load(const std::string& path);

}  // namespace sdit
