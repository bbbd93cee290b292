#include "sdit/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "sdit/version.hpp"

namespace sdit {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'S', 'D', 'I', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("corrupt checkpoint (truncated field)");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("corrupt checkpoint (truncated field)");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_doubles(std::ostream& out, std::span<const double> v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::istream& in, std::span<double> v) {
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) throw std::runtime_error("corrupt checkpoint (truncated payload)");
}

}  // namespace

void checkpoint_save(const std::string& path, const TrainConfig& cfg,
                     const Model& model, const EmaState& ema, const AdamW& opt,
                     const std::vector<int>& pi, double match_cost,
                     std::int64_t step, const std::string& rng_state) {
  json manifest = json::array();
  for (const auto& np : model.params.items())
    manifest.push_back({{"name", np.name}, {"shape", np.tensor.shape()}});

  json header;
  header["format_version"] = kFormatVersion;
  header["build_version"] = kBuildVersion;
  header["train_config"] = json::parse(train_config_to_json(cfg));
  header["step"] = step;
  header["pi"] = pi;
  header["match_cost"] = match_cost;
  header["rng"] = rng_state;
  header["adam_steps"] = opt.steps_taken();
  header["params"] = manifest;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kFormatVersion);
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& np : model.params.items()) write_doubles(out, np.tensor.values());
  for (const auto& buf : ema.buffers()) write_doubles(out, buf);
  for (const auto& buf : opt.m()) write_doubles(out, buf);
  for (const auto& buf : opt.v()) write_doubles(out, buf);
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

LoadedCheckpoint checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("corrupt checkpoint (bad magic): " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version) + " (this build reads " +
                             std::to_string(kFormatVersion) + "): " + path);
  const std::uint64_t header_len = read_u64(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("corrupt checkpoint (truncated header): " + path);

  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt checkpoint (header parse): " +
                             std::string(e.what()));
  }

  LoadedCheckpoint lc;
  try {
    lc.cfg = train_config_from_json(header.at("train_config").dump());
    lc.step = header.at("step").get<std::int64_t>();
    lc.pi = header.at("pi").get<std::vector<int>>();
    lc.match_cost = header.at("match_cost").get<double>();
    lc.rng_state = header.at("rng").get<std::string>();
    lc.adam_steps = header.at("adam_steps").get<long>();
    lc.build_version = header.at("build_version").get<std::string>();
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt checkpoint (header fields): " +
                             std::string(e.what()));
  }

  lc.model = std::make_unique<Model>(lc.cfg.model, lc.cfg.seeds);
  const auto& items = lc.model->params.items();
  const json& manifest = header.at("params");
  if (manifest.size() != items.size())
    throw std::runtime_error(
        "checkpoint shape mismatch: file lists " + std::to_string(manifest.size()) +
        " parameters, config builds " + std::to_string(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string name = manifest[i].at("name").get<std::string>();
    const auto shape = manifest[i].at("shape").get<Shape>();
    if (name != items[i].name || shape != items[i].tensor.shape())
      throw std::runtime_error("checkpoint shape mismatch for " + name +
                               " (expected parameter " + items[i].name + ")");
  }

  for (const auto& np : items) {
    Tensor t = np.tensor;  // shared handle, writes through to the model
    read_doubles(in, t.values_mut());
  }
  auto read_bank = [&](std::vector<std::vector<double>>& bank) {
    bank.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      bank[i].resize(items[i].tensor.values().size());
      read_doubles(in, bank[i]);
    }
  };
  read_bank(lc.ema);
  read_bank(lc.adam_m);
  read_bank(lc.adam_v);
  return lc;
}

}  // namespace sdit
