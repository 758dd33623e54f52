#include "lsd/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lsd/errors.hpp"
#include "lsd/io.hpp"

namespace lsd {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw UsageError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number_field(T TrainConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.train.*member = parse_number<T>(k, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.train.*member);
            } else {
              return std::to_string(c.train.*member);
            }
          }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"epochs", number_field(&TrainConfig::epochs)},
      {"batch_size", number_field(&TrainConfig::batch_size)},
      {"lr", number_field(&TrainConfig::lr)},
      {"seed", number_field(&TrainConfig::seed)},
      {"energy_reg", number_field(&TrainConfig::energy_reg)},
      {"latent_dim", number_field(&TrainConfig::latent_dim)},
      {"hidden1", number_field(&TrainConfig::hidden1)},
      {"hidden2", number_field(&TrainConfig::hidden2)},
      {"energy_hidden", number_field(&TrainConfig::energy_hidden)},
      {"likelihood",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          try {
            c.train.likelihood = parse_likelihood(v);
          } catch (const ContractError& e) {
            throw UsageError(e.what());
          }
        },
        [](const RunConfig& c) { return to_string(c.train.likelihood); }}},
      {"decoder_sigma", number_field(&TrainConfig::decoder_sigma)},
      {"T", number_field(&TrainConfig::T)},
      {"sigma_sq_min", number_field(&TrainConfig::sigma_sq_min)},
      {"sigma_sq_max", number_field(&TrainConfig::sigma_sq_max)},
      {"K", number_field(&TrainConfig::K)},
      {"lambda", number_field(&TrainConfig::lambda)},
      {"K_inference", number_field(&TrainConfig::K_inference)},
      {"K_posterior", number_field(&TrainConfig::K_posterior)},
      {"lambda_posterior", number_field(&TrainConfig::lambda_posterior)},
      {"save_every",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.save_every = parse_number<int>(k, v); },
        [](const RunConfig& c) { return std::to_string(c.save_every); }}},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw UsageError("unknown config key '" + key + "'");
}

}  // namespace

RunConfig default_run_config(ModelKind model) {
  RunConfig cfg;
  cfg.model = model;
  cfg.train = default_config(model);
  return cfg;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, key, value);
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set_config_value(cfg, key, value);
    } catch (const UsageError& e) {
      throw UsageError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw UsageError("override '" + assignment + "' is not of the form key=value");
  set_config_value(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string render_config(const RunConfig& cfg) {
  std::string out = "# model: " + to_string(cfg.model) + "\n";
  out += "# input_dim: " + std::to_string(cfg.train.input_dim) + "\n";
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace lsd
