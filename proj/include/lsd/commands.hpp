#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lsd/config.hpp"
#include "lsd/data.hpp"

namespace lsd {

namespace fs = std::filesystem;

/// Limits BLAS to one thread so results do not depend on thread scheduling.
void force_serial();

struct MakeDataOptions {
  fs::path out;
  std::size_t n = 200;
  GridDims dims{32, 32, 32};
  std::uint64_t seed = 1;
  std::size_t slab = 4;
  double threshold = 0.5;
  int axis = 2;
  /// Writes 28x28 disc/cross/ring images instead of volumes.
  bool shapes2d = false;
};

/// Writes <id>_hq.voxb / <id>_lq.voxb pairs and manifest.csv (or <id>_img.voxb
/// images for the 2D variant).
void cmd_make_data(const MakeDataOptions& opt);

struct TrainOptions {
  ModelKind model = ModelKind::kLsdEbm;
  std::optional<fs::path> config;
  std::vector<std::string> overrides;
  fs::path data;
  fs::path out;
};

/// Trains on every training volume in `data` (files ending in _hq.voxb or
/// _img.voxb; all .voxb files if there are none). Writes config.txt,
/// train_log.csv, periodic checkpoints and final.lsdc.
void cmd_train(const TrainOptions& opt);

/// Model, checkpoint and inference settings shared by the inference commands.
struct InferenceOptions {
  ModelKind model = ModelKind::kLsdEbm;
  fs::path ckpt;
  std::optional<fs::path> config;
  std::vector<std::string> overrides;
  std::uint64_t seed = 1;
};

struct ReconstructOptions {
  InferenceOptions inference;
  /// A .voxb file or a directory of them.
  fs::path in;
  /// Only inputs whose stem ends with this suffix (directory input).
  std::string suffix;
  fs::path out;
  /// Diffusion depth (LSD-EBM) or posterior chain length (LEBM); -1 selects the model default.
  int steps = -1;
  bool trace = false;
};

/// Writes <id>_rec.voxb (thresholded at 0.5) and <id>_rec.pgm per input, plus
/// trace.csv (step,variance) across the input batch when requested.
void cmd_reconstruct(const ReconstructOptions& opt);

struct GenerateOptions {
  InferenceOptions inference;
  std::size_t n = 16;
  /// Output grid; inferred from the model input size when absent.
  std::optional<GridDims> dims;
  fs::path out;
};

void cmd_generate(const GenerateOptions& opt);

struct EvalOptions {
  fs::path pred_dir;
  fs::path ref_dir;
  std::string pred_suffix;
  std::string ref_suffix;
  fs::path out;
};

/// Pairs files by name (or by the id before the last '_') and writes
/// metrics.csv with one row per pair followed by mean and std rows.
void cmd_eval(const EvalOptions& opt);

struct TraceOptions {
  InferenceOptions inference;
  fs::path data;
  std::string suffix;
  std::size_t repeats = 5;
  int steps = -1;
  fs::path out;
};

/// Writes trace.csv with repeat,step,variance rows.
void cmd_trace_latent(const TraceOptions& opt);

// Helpers shared with tests.

/// Sorted .voxb files of `dir` whose stem ends with `suffix`.
std::vector<fs::path> list_voxb(const fs::path& dir, const std::string& suffix = "");

/// Cube (n = s^3) or square image (n = s^2, depth 1) matching a flat size.
GridDims infer_dims(std::size_t n);

struct EvalPair {
  std::string id;
  fs::path pred;
  fs::path ref;
};

/// Throws UsageError listing orphans when the two sets do not pair up.
std::vector<EvalPair> pair_files(const std::vector<fs::path>& preds, const std::vector<fs::path>& refs);

}  // namespace lsd
