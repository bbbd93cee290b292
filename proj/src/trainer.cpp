#include "sdit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sdit/checkpoint.hpp"
#include "sdit/losses.hpp"
#include "sdit/matching.hpp"
#include "sdit/ops.hpp"

namespace sdit {

namespace {

using nlohmann::json;

void expect_keys(const json& j, std::initializer_list<const char*> keys,
                 const char* where) {
  if (!j.is_object())
    throw std::invalid_argument(std::string("config: ") + where +
                                " must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || item.key() == k;
    if (!known)
      throw std::invalid_argument("config: unknown key '" + item.key() + "' in " +
                                  where);
  }
  for (const char* k : keys)
    if (!j.contains(k))
      throw std::invalid_argument(std::string("config: missing key '") + k +
                                  "' in " + where);
}

PriorMask make_prior(const TrainConfig& cfg) {
  const auto& m = cfg.model;
  if (cfg.random_alloc_prior) {
    std::mt19937_64 prior_rng(cfg.seed ^ 0x70726f7269746fULL);
    return random_allocation_mask(m.timesteps, m.blocks, m.experts, m.topk,
                                  prior_rng, cfg.prior_alpha);
  }
  return build_prior_mask(m.timesteps, m.blocks, m.experts, m.topk,
                          cfg.prior_alpha);
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (steps < 1) throw std::invalid_argument("config: steps must be >= 1");
  if (batch < 1) throw std::invalid_argument("config: batch must be >= 1");
  if (train_size < 1) throw std::invalid_argument("config: train_size must be >= 1");
  if (adam.lr <= 0) throw std::invalid_argument("config: lr must be > 0");
  if (adam.beta1 < 0 || adam.beta1 >= 1 || adam.beta2 < 0 || adam.beta2 >= 1)
    throw std::invalid_argument("config: adam betas must be in [0, 1)");
  if (adam.eps <= 0) throw std::invalid_argument("config: adam eps must be > 0");
  if (adam.weight_decay < 0)
    throw std::invalid_argument("config: weight_decay must be >= 0");
  if (lambda_dp < 0) throw std::invalid_argument("config: lambda_dp must be >= 0");
  if (lambda_load < 0)
    throw std::invalid_argument("config: lambda_load must be >= 0");
  if (ema_decay < 0 || ema_decay >= 1)
    throw std::invalid_argument("config: ema_decay must be in [0, 1)");
  if (match_every < 1)
    throw std::invalid_argument("config: match_every must be >= 1");
  if (label_drop < 0 || label_drop > 1)
    throw std::invalid_argument("config: label_drop must be in [0, 1]");
  if (prior_alpha <= 0)
    throw std::invalid_argument("config: prior_alpha must be > 0");
  const int ds_classes = dataset_class_count(dataset);
  if (model.classes > 0 && model.classes != ds_classes)
    throw std::invalid_argument("config: model expects " +
                                std::to_string(model.classes) +
                                " classes but dataset '" + dataset + "' has " +
                                std::to_string(ds_classes));
}

std::string train_config_to_json(const TrainConfig& cfg, bool pretty) {
  json m;
  m["blocks"] = cfg.model.blocks;
  m["dim"] = cfg.model.dim;
  m["heads"] = cfg.model.heads;
  m["experts"] = cfg.model.experts;
  m["topk"] = cfg.model.topk;
  m["timesteps"] = cfg.model.timesteps;
  m["image"] = cfg.model.image;
  m["patch"] = cfg.model.patch;
  m["classes"] = cfg.model.classes;
  m["raw_embed"] = cfg.model.raw_embed;
  m["integration"] = to_string(cfg.model.integration);
  m["gate_renorm"] = cfg.model.gate_renorm;
  m["noisy_gating"] = cfg.model.noisy_gating;
  m["smoe"] = cfg.model.smoe;
  m["ln_eps"] = cfg.model.ln_eps;

  json j;
  j["model"] = m;
  j["seeds"] = {{"core", cfg.seeds.core},
                {"gating", cfg.seeds.gating},
                {"experts", cfg.seeds.experts}};
  j["dataset"] = cfg.dataset;
  j["data_seed"] = cfg.data_seed;
  j["train_size"] = cfg.train_size;
  j["steps"] = cfg.steps;
  j["batch"] = cfg.batch;
  j["adam"] = {{"lr", cfg.adam.lr},
               {"beta1", cfg.adam.beta1},
               {"beta2", cfg.adam.beta2},
               {"eps", cfg.adam.eps},
               {"weight_decay", cfg.adam.weight_decay}};
  j["lambda_dp"] = cfg.lambda_dp;
  j["load_balance"] = cfg.load_balance;
  j["lambda_load"] = cfg.lambda_load;
  j["ema_decay"] = cfg.ema_decay;
  j["match_every"] = cfg.match_every;
  j["seed"] = cfg.seed;
  j["label_drop"] = cfg.label_drop;
  j["flip_aug"] = cfg.flip_aug;
  j["random_alloc_prior"] = cfg.random_alloc_prior;
  j["prior_alpha"] = cfg.prior_alpha;
  return pretty ? j.dump(2) : j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: bad json: " + std::string(e.what()));
  }
  expect_keys(j,
              {"model", "seeds", "dataset", "data_seed", "train_size", "steps",
               "batch", "adam", "lambda_dp", "load_balance", "lambda_load",
               "ema_decay", "match_every", "seed", "label_drop", "flip_aug",
               "random_alloc_prior", "prior_alpha"},
              "run config");
  expect_keys(j["model"],
              {"blocks", "dim", "heads", "experts", "topk", "timesteps", "image",
               "patch", "classes", "raw_embed", "integration", "gate_renorm",
               "noisy_gating", "smoe", "ln_eps"},
              "model");
  expect_keys(j["seeds"], {"core", "gating", "experts"}, "seeds");
  expect_keys(j["adam"], {"lr", "beta1", "beta2", "eps", "weight_decay"}, "adam");

  TrainConfig cfg;
  try {
    const json& m = j["model"];
    cfg.model.blocks = m["blocks"].get<int>();
    cfg.model.dim = m["dim"].get<int>();
    cfg.model.heads = m["heads"].get<int>();
    cfg.model.experts = m["experts"].get<int>();
    cfg.model.topk = m["topk"].get<int>();
    cfg.model.timesteps = m["timesteps"].get<int>();
    cfg.model.image = m["image"].get<int>();
    cfg.model.patch = m["patch"].get<int>();
    cfg.model.classes = m["classes"].get<int>();
    cfg.model.raw_embed = m["raw_embed"].get<int>();
    cfg.model.integration = integration_from_string(m["integration"].get<std::string>());
    cfg.model.gate_renorm = m["gate_renorm"].get<bool>();
    cfg.model.noisy_gating = m["noisy_gating"].get<bool>();
    cfg.model.smoe = m["smoe"].get<bool>();
    cfg.model.ln_eps = m["ln_eps"].get<double>();
    cfg.seeds.core = j["seeds"]["core"].get<std::uint64_t>();
    cfg.seeds.gating = j["seeds"]["gating"].get<std::uint64_t>();
    cfg.seeds.experts = j["seeds"]["experts"].get<std::uint64_t>();
    cfg.dataset = j["dataset"].get<std::string>();
    cfg.data_seed = j["data_seed"].get<std::uint64_t>();
    cfg.train_size = j["train_size"].get<int>();
    cfg.steps = j["steps"].get<std::int64_t>();
    cfg.batch = j["batch"].get<int>();
    cfg.adam.lr = j["adam"]["lr"].get<double>();
    cfg.adam.beta1 = j["adam"]["beta1"].get<double>();
    cfg.adam.beta2 = j["adam"]["beta2"].get<double>();
    cfg.adam.eps = j["adam"]["eps"].get<double>();
    cfg.adam.weight_decay = j["adam"]["weight_decay"].get<double>();
    cfg.lambda_dp = j["lambda_dp"].get<double>();
    cfg.load_balance = j["load_balance"].get<bool>();
    cfg.lambda_load = j["lambda_load"].get<double>();
    cfg.ema_decay = j["ema_decay"].get<double>();
    cfg.match_every = j["match_every"].get<int>();
    cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.label_drop = j["label_drop"].get<double>();
    cfg.flip_aug = j["flip_aug"].get<bool>();
    cfg.random_alloc_prior = j["random_alloc_prior"].get<bool>();
    cfg.prior_alpha = j["prior_alpha"].get<double>();
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: bad field type: " + std::string(e.what()));
  }
  return cfg;
}

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  data_ = gen_dataset(cfg_.dataset, cfg_.train_size, cfg_.data_seed);
  if (data_.image != cfg_.model.image)
    throw std::invalid_argument(
        "config: model image size " + std::to_string(cfg_.model.image) +
        " does not match dataset image size " + std::to_string(data_.image));
  schedule_ = NoiseSchedule::cosine(cfg_.model.timesteps);
  model_ = std::make_unique<Model>(cfg_.model, cfg_.seeds);
  opt_ = std::make_unique<AdamW>(model_->params, cfg_.adam);
  ema_ = std::make_unique<EmaState>(model_->params);
  if (cfg_.model.smoe) {
    prior_ = make_prior(cfg_);
    prev_map_ = model_->gate_map();
  }
  rng_.seed(cfg_.seed);
}

Trainer::Trainer(LoadedCheckpoint&& lc) : cfg_(std::move(lc.cfg)) {
  cfg_.validate();
  data_ = gen_dataset(cfg_.dataset, cfg_.train_size, cfg_.data_seed);
  if (data_.image != cfg_.model.image)
    throw std::invalid_argument(
        "config: model image size " + std::to_string(cfg_.model.image) +
        " does not match dataset image size " + std::to_string(data_.image));
  schedule_ = NoiseSchedule::cosine(cfg_.model.timesteps);
  model_ = std::move(lc.model);
  opt_ = std::make_unique<AdamW>(model_->params, cfg_.adam);
  opt_->m() = std::move(lc.adam_m);
  opt_->v() = std::move(lc.adam_v);
  opt_->set_steps_taken(lc.adam_steps);
  ema_ = std::make_unique<EmaState>(model_->params);
  ema_->buffers() = std::move(lc.ema);
  pi_ = std::move(lc.pi);
  match_cost_ = lc.match_cost;
  step_ = lc.step;
  std::istringstream ss(lc.rng_state);
  ss >> rng_;
  if (!ss) throw std::runtime_error("corrupt checkpoint (rng state)");
  if (cfg_.model.smoe) {
    prior_ = make_prior(cfg_);
    prev_map_ = model_->gate_map();
  }
}

Trainer Trainer::resume(const std::string& ckpt_path) {
  return Trainer(checkpoint_load(ckpt_path));
}

void Trainer::refresh_matching() {
  const auto map = model_->gate_map();
  const int cols = cfg_.model.blocks * cfg_.model.experts;
  const auto cost = cdist_columns(map, prior_.rows, cfg_.model.timesteps, cols);
  pi_ = hungarian(cost, cols);
  match_cost_ = assignment_cost(cost, cols, pi_);
}

std::vector<std::uint8_t> Trainer::ema_gate_map() {
  EmaScope scope(*ema_);
  return model_->gate_map();
}

MetricsRow Trainer::step() {
  const bool smoe = cfg_.model.smoe;
  if (smoe && step_ % cfg_.match_every == 0) refresh_matching();

  const std::uint64_t batch_seed = rng_();
  std::mt19937_64 brng(batch_seed);
  const int side = cfg_.model.image;
  const std::size_t n = static_cast<std::size_t>(side) * side;
  std::uniform_int_distribution<int> pick_t(1, cfg_.model.timesteps);
  std::uniform_int_distribution<std::size_t> pick_img(0, data_.images.size() - 1);
  std::bernoulli_distribution flip(0.5);
  std::bernoulli_distribution drop(cfg_.label_drop);
  std::normal_distribution<double> normal(0.0, 1.0);

  Tensor noise_acc;
  std::vector<int> seen_t;
  std::vector<Tensor> dp_terms;
  std::vector<Tensor> importance(smoe ? cfg_.model.blocks : 0);
  std::vector<double> epsv(n), xtv(n);

  for (int b = 0; b < cfg_.batch; ++b) {
    const std::size_t idx = pick_img(brng);
    const int t = pick_t(brng);
    std::vector<double> img = data_.images[idx];
    if (cfg_.flip_aug && flip(brng)) img = flip_horizontal(img, side);
    int label = -1;
    if (cfg_.model.classes > 0) {
      label = data_.labels[idx];
      if (drop(brng)) label = -1;
    }
    for (auto& v : epsv) v = normal(brng);
    q_sample(schedule_, img, epsv, t, xtv);

    Tensor xt = Tensor::from(xtv, {side, side});
    Tensor eps = Tensor::from(epsv, {side, side});
    GateState gs;
    Tensor eps_hat = model_->predict_noise(
        xt, t, label, smoe ? &gs : nullptr,
        smoe && cfg_.model.noisy_gating ? &brng : nullptr);
    Tensor d = sub(eps_hat, eps);
    Tensor l = mean(mul(d, d));
    noise_acc = b == 0 ? l : add(noise_acc, l);

    if (smoe) {
      if (std::find(seen_t.begin(), seen_t.end(), t) == seen_t.end()) {
        seen_t.push_back(t);
        dp_terms.push_back(diffusion_prior_loss(gs.p_tot, pi_, prior_.row(t)));
      }
      for (int i = 0; i < cfg_.model.blocks; ++i)
        importance[i] = b == 0 ? gs.p[i] : add(importance[i], gs.p[i]);
    }
  }

  Tensor loss_noise = scale(noise_acc, 1.0 / cfg_.batch);
  Tensor loss = loss_noise;
  double dp_value = 0.0, load_value = 0.0;
  if (smoe) {
    Tensor dp_acc = dp_terms[0];
    for (std::size_t i = 1; i < dp_terms.size(); ++i)
      dp_acc = add(dp_acc, dp_terms[i]);
    Tensor loss_dp = scale(dp_acc, 1.0 / static_cast<double>(dp_terms.size()));
    dp_value = loss_dp.item();
    if (cfg_.lambda_dp != 0.0) loss = add(loss, scale(loss_dp, cfg_.lambda_dp));
    if (cfg_.load_balance) {
      Tensor loss_load = load_balance_loss(importance);
      load_value = loss_load.item();
      if (cfg_.lambda_load != 0.0)
        loss = add(loss, scale(loss_load, cfg_.lambda_load));
    }
  }

  const double total = loss_noise.item() + cfg_.lambda_dp * dp_value +
                       (cfg_.load_balance ? cfg_.lambda_load * load_value : 0.0);
  if (!std::isfinite(loss.item()) || !loss.all_finite())
    throw std::runtime_error("train: non-finite loss at step " +
                             std::to_string(step_ + 1) + " (batch seed " +
                             std::to_string(batch_seed) + ")");

  model_->params.zero_grad_all();
  backward(loss, GradMode::Accumulate);
  opt_->step();
  ema_->update(cfg_.ema_decay);
  ++step_;

  MetricsRow row;
  row.step = step_;
  row.loss_noise = loss_noise.item();
  row.loss_dp = dp_value;
  row.loss_load = load_value;
  row.loss_total = total;
  row.match_cost = match_cost_;
  row.expert_evals = model_->expert_evals_and_reset();
  if (smoe) {
    auto map = model_->gate_map();
    row.gate_stable = map == prev_map_ ? 1 : 0;
    const auto emap = ema_gate_map();
    std::int64_t ham = 0;
    for (std::size_t i = 0; i < map.size(); ++i) ham += map[i] != emap[i];
    row.hamming_online_ema = ham;
    prev_map_ = std::move(map);
  } else {
    row.gate_stable = 1;
    row.hamming_online_ema = 0;
  }
  history_.push_back(row);
  return row;
}

void Trainer::run(MetricsWriter* writer) {
  while (step_ < cfg_.steps) {
    const MetricsRow row = step();
    if (writer) writer->write(row);
  }
}

void Trainer::set_target_steps(std::int64_t steps) {
  if (steps < 1) throw std::invalid_argument("config: steps must be >= 1");
  cfg_.steps = steps;
}

void Trainer::save(const std::string& path) const {
  std::ostringstream ss;
  ss << rng_;
  checkpoint_save(path, cfg_, *model_, *ema_, *opt_, pi_, match_cost_, step_,
                  ss.str());
}

}  // namespace sdit
