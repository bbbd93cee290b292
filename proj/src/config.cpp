#include "sdit/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sdit/smoe.hpp"

namespace sdit {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw std::invalid_argument("config: " + origin + ":" + std::to_string(line) +
                              ": " + msg);
}

long long to_int(const std::string& v, const std::string& origin, int line) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) fail(origin, line, "expected integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v, const std::string& origin, int line) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) fail(origin, line, "expected unsigned integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& v, const std::string& origin, int line) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) fail(origin, line, "expected number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v, const std::string& origin, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(origin, line, "expected true/false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  TrainConfig& t = cfg.train;
  using Setter = std::function<void(const std::string&, int)>;
  std::map<std::string, std::map<std::string, Setter>> sections;

  auto& model = sections["model"];
  model["blocks"] = [&](const std::string& v, int l) { t.model.blocks = static_cast<int>(to_int(v, origin, l)); };
  model["dim"] = [&](const std::string& v, int l) { t.model.dim = static_cast<int>(to_int(v, origin, l)); };
  model["heads"] = [&](const std::string& v, int l) { t.model.heads = static_cast<int>(to_int(v, origin, l)); };
  model["experts"] = [&](const std::string& v, int l) { t.model.experts = static_cast<int>(to_int(v, origin, l)); };
  model["topk"] = [&](const std::string& v, int l) { t.model.topk = static_cast<int>(to_int(v, origin, l)); };
  model["timesteps"] = [&](const std::string& v, int l) { t.model.timesteps = static_cast<int>(to_int(v, origin, l)); };
  model["image"] = [&](const std::string& v, int l) { t.model.image = static_cast<int>(to_int(v, origin, l)); };
  model["patch"] = [&](const std::string& v, int l) { t.model.patch = static_cast<int>(to_int(v, origin, l)); };
  model["classes"] = [&](const std::string& v, int l) { t.model.classes = static_cast<int>(to_int(v, origin, l)); };
  model["raw_embed"] = [&](const std::string& v, int l) { t.model.raw_embed = static_cast<int>(to_int(v, origin, l)); };
  model["integration"] = [&](const std::string& v, int l) {
    try {
      t.model.integration = integration_from_string(v);
    } catch (const std::exception& e) {
      fail(origin, l, e.what());
    }
  };
  model["gate_renorm"] = [&](const std::string& v, int l) { t.model.gate_renorm = to_bool(v, origin, l); };
  model["noisy_gating"] = [&](const std::string& v, int l) { t.model.noisy_gating = to_bool(v, origin, l); };
  model["smoe"] = [&](const std::string& v, int l) { t.model.smoe = to_bool(v, origin, l); };
  model["ln_eps"] = [&](const std::string& v, int l) { t.model.ln_eps = to_double(v, origin, l); };

  auto& seeds = sections["seeds"];
  seeds["core"] = [&](const std::string& v, int l) { t.seeds.core = to_u64(v, origin, l); };
  seeds["gating"] = [&](const std::string& v, int l) { t.seeds.gating = to_u64(v, origin, l); };
  seeds["experts"] = [&](const std::string& v, int l) { t.seeds.experts = to_u64(v, origin, l); };

  auto& train = sections["train"];
  train["dataset"] = [&](const std::string& v, int) { t.dataset = v; };
  train["data_seed"] = [&](const std::string& v, int l) { t.data_seed = to_u64(v, origin, l); };
  train["train_size"] = [&](const std::string& v, int l) { t.train_size = static_cast<int>(to_int(v, origin, l)); };
  train["steps"] = [&](const std::string& v, int l) { t.steps = to_int(v, origin, l); };
  train["batch"] = [&](const std::string& v, int l) { t.batch = static_cast<int>(to_int(v, origin, l)); };
  train["lr"] = [&](const std::string& v, int l) { t.adam.lr = to_double(v, origin, l); };
  train["beta1"] = [&](const std::string& v, int l) { t.adam.beta1 = to_double(v, origin, l); };
  train["beta2"] = [&](const std::string& v, int l) { t.adam.beta2 = to_double(v, origin, l); };
  train["adam_eps"] = [&](const std::string& v, int l) { t.adam.eps = to_double(v, origin, l); };
  train["weight_decay"] = [&](const std::string& v, int l) { t.adam.weight_decay = to_double(v, origin, l); };
  train["lambda_dp"] = [&](const std::string& v, int l) { t.lambda_dp = to_double(v, origin, l); };
  train["load_balance"] = [&](const std::string& v, int l) { t.load_balance = to_bool(v, origin, l); };
  train["lambda_load"] = [&](const std::string& v, int l) { t.lambda_load = to_double(v, origin, l); };
  train["ema_decay"] = [&](const std::string& v, int l) { t.ema_decay = to_double(v, origin, l); };
  train["match_every"] = [&](const std::string& v, int l) { t.match_every = static_cast<int>(to_int(v, origin, l)); };
  train["seed"] = [&](const std::string& v, int l) { t.seed = to_u64(v, origin, l); };
  train["label_drop"] = [&](const std::string& v, int l) { t.label_drop = to_double(v, origin, l); };
  train["flip_aug"] = [&](const std::string& v, int l) { t.flip_aug = to_bool(v, origin, l); };
  train["random_alloc_prior"] = [&](const std::string& v, int l) { t.random_alloc_prior = to_bool(v, origin, l); };
  train["prior_alpha"] = [&](const std::string& v, int l) { t.prior_alpha = to_double(v, origin, l); };

  auto& run = sections["run"];
  run["out_dir"] = [&](const std::string& v, int) { cfg.out_dir = v; };

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, lineno, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section))
        fail(origin, lineno, "unknown section '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
    if (section.empty()) fail(origin, lineno, "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto& keys = sections[section];
    const auto it = keys.find(key);
    if (it == keys.end())
      fail(origin, lineno, "unknown key '" + key + "' in [" + section + "]");
    it->second(value, lineno);
  }
  return cfg;
}

RunConfig parse_run_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str(), path);
}

std::string run_config_echo_ini(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  std::ostringstream o;
  o << "[model]\n";
  o << "blocks = " << t.model.blocks << "\n";
  o << "dim = " << t.model.dim << "\n";
  o << "heads = " << t.model.heads << "\n";
  o << "experts = " << t.model.experts << "\n";
  o << "topk = " << t.model.topk << "\n";
  o << "timesteps = " << t.model.timesteps << "\n";
  o << "image = " << t.model.image << "\n";
  o << "patch = " << t.model.patch << "\n";
  o << "classes = " << t.model.classes << "\n";
  o << "raw_embed = " << t.model.raw_embed << "\n";
  o << "integration = " << to_string(t.model.integration) << "\n";
  o << "gate_renorm = " << (t.model.gate_renorm ? "true" : "false") << "\n";
  o << "noisy_gating = " << (t.model.noisy_gating ? "true" : "false") << "\n";
  o << "smoe = " << (t.model.smoe ? "true" : "false") << "\n";
  o << "ln_eps = " << fmt(t.model.ln_eps) << "\n";
  o << "\n[seeds]\n";
  o << "core = " << t.seeds.core << "\n";
  o << "gating = " << t.seeds.gating << "\n";
  o << "experts = " << t.seeds.experts << "\n";
  o << "\n[train]\n";
  o << "dataset = " << t.dataset << "\n";
  o << "data_seed = " << t.data_seed << "\n";
  o << "train_size = " << t.train_size << "\n";
  o << "steps = " << t.steps << "\n";
  o << "batch = " << t.batch << "\n";
  o << "lr = " << fmt(t.adam.lr) << "\n";
  o << "beta1 = " << fmt(t.adam.beta1) << "\n";
  o << "beta2 = " << fmt(t.adam.beta2) << "\n";
  o << "adam_eps = " << fmt(t.adam.eps) << "\n";
  o << "weight_decay = " << fmt(t.adam.weight_decay) << "\n";
  o << "lambda_dp = " << fmt(t.lambda_dp) << "\n";
  o << "load_balance = " << (t.load_balance ? "true" : "false") << "\n";
  o << "lambda_load = " << fmt(t.lambda_load) << "\n";
  o << "ema_decay = " << fmt(t.ema_decay) << "\n";
  o << "match_every = " << t.match_every << "\n";
  o << "seed = " << t.seed << "\n";
  o << "label_drop = " << fmt(t.label_drop) << "\n";
  o << "flip_aug = " << (t.flip_aug ? "true" : "false") << "\n";
  o << "random_alloc_prior = " << (t.random_alloc_prior ? "true" : "false") << "\n";
  o << "prior_alpha = " << fmt(t.prior_alpha) << "\n";
  o << "\n[run]\n";
  o << "out_dir = " << cfg.out_dir << "\n";
  return o.str();
}

const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names = {"none",     "noisy", "noisy_load",
                                                 "noisy_dp", "dp",    "random_alloc"};
  return names;
}

void apply_ablation(RunConfig& cfg, const std::string& name) {
  TrainConfig& t = cfg.train;
  t.model.noisy_gating = false;
  t.load_balance = false;
  t.random_alloc_prior = false;
  if (name == "none") {
    t.lambda_dp = 0.0;
  } else if (name == "noisy") {
    t.model.noisy_gating = true;
    t.lambda_dp = 0.0;
  } else if (name == "noisy_load") {
    t.model.noisy_gating = true;
    t.load_balance = true;
    t.lambda_dp = 0.0;
  } else if (name == "noisy_dp") {
    t.model.noisy_gating = true;
    t.lambda_dp = 1.0;
  } else if (name == "dp") {
    t.lambda_dp = 1.0;
  } else if (name == "random_alloc") {
    t.lambda_dp = 1.0;
    t.random_alloc_prior = true;
  } else {
    std::string known;
    for (const auto& n : ablation_names()) known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("config: unknown ablation '" + name +
                                "' (known: " + known + ")");
  }
}

}  // namespace sdit
