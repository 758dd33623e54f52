#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsd/models.hpp"

namespace lsd {

/// Bad command-line or config-file input (maps to exit code 1).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training configuration plus the run-level settings that do not affect the model.
struct RunConfig {
  ModelKind model = ModelKind::kLsdEbm;
  TrainConfig train;
  /// Write an intermediate checkpoint every this many epochs (0: final only).
  int save_every = 0;
};

RunConfig default_run_config(ModelKind model);

/// Keys accepted in config files and --set overrides, in echo order.
const std::vector<std::string>& config_keys();

/// Throws UsageError for unknown keys or unparsable values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Applies `key = value` lines; '#' starts a comment, blank lines are skipped.
/// `source` names the input in error messages.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Applies one "key=value" override.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Fully resolved config as `key = value` lines, parseable by apply_config_text.
std::string render_config(const RunConfig& cfg);

}  // namespace lsd
