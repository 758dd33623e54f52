#include "lsd/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "lsd/errors.hpp"
#include "lsd/io.hpp"
#include "lsd/metrics.hpp"
#include "lsd/training.hpp"

extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace lsd {

void force_serial() {
  if (openblas_set_num_threads != nullptr) openblas_set_num_threads(1);
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
}

std::string sample_id(std::size_t i, std::size_t n) {
  const int width = std::max<int>(4, static_cast<int>(std::to_string(n == 0 ? 0 : n - 1).size()));
  std::string digits = std::to_string(i);
  return std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(digits.size(), width), '0') + digits;
}

/// Stem up to the last '_' (the whole stem when there is none).
std::string id_of(const fs::path& file) {
  const std::string stem = file.stem().string();
  const auto cut = stem.rfind('_');
  return cut == std::string::npos ? stem : stem.substr(0, cut);
}

RunConfig resolve(ModelKind model, const std::optional<fs::path>& config, const std::vector<std::string>& overrides) {
  RunConfig cfg = default_run_config(model);
  if (config) apply_config_file(cfg, *config);
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

std::unique_ptr<Model> load_model(const InferenceOptions& opt) {
  const RunConfig cfg = resolve(opt.model, opt.config, opt.overrides);
  auto model = load_checkpoint(opt.ckpt, opt.model, cfg.train);
  return model;
}

struct VolumeSet {
  std::vector<fs::path> files;
  std::vector<VoxelGrid> grids;
  GridDims dims;
};

VolumeSet load_volumes(std::vector<fs::path> files, const std::string& what) {
  if (files.empty()) throw UsageError("no " + what + " volumes found");
  VolumeSet set;
  set.files = std::move(files);
  for (const auto& f : set.files) {
    set.grids.push_back(read_voxb(f));
    if (set.grids.back().dims() != set.grids.front().dims()) {
      throw UsageError(what + " volume '" + f.string() + "' has dims " + to_string(set.grids.back().dims()) +
                       ", expected " + to_string(set.grids.front().dims()));
    }
  }
  set.dims = set.grids.front().dims();
  return set;
}

Tensor stack(const std::vector<VoxelGrid>& grids) {
  Samples rows;
  rows.reserve(grids.size());
  for (const auto& g : grids) rows.push_back(g.values());
  std::vector<std::size_t> idx(rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(rows, idx);
}

void check_input_dim(const Model& model, const GridDims& dims) {
  if (dims.count() != model.config().input_dim) {
    throw UsageError("volumes of " + to_string(dims) + " do not match the model input size " +
                     std::to_string(model.config().input_dim));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

std::vector<fs::path> list_voxb(const fs::path& dir, const std::string& suffix) {
  if (!fs::is_directory(dir)) throw UsageError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".voxb") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.size() >= suffix.size() && stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

GridDims infer_dims(std::size_t n) {
  const auto cube = static_cast<std::size_t>(std::llround(std::cbrt(static_cast<double>(n))));
  if (cube * cube * cube == n) return {cube, cube, cube};
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (side * side == n) return {side, side, 1};
  throw UsageError("cannot infer grid dims for " + std::to_string(n) + " values; pass --dims");
}

std::vector<EvalPair> pair_files(const std::vector<fs::path>& preds, const std::vector<fs::path>& refs) {
  std::set<std::string> pred_names, ref_names;
  for (const auto& p : preds) pred_names.insert(p.filename().string());
  for (const auto& r : refs) ref_names.insert(r.filename().string());
  const bool by_name = pred_names == ref_names;

  auto index = [&](const std::vector<fs::path>& files, const char* side) {
    std::map<std::string, fs::path> out;
    for (const auto& f : files) {
      const std::string key = by_name ? f.stem().string() : id_of(f);
      if (!out.emplace(key, f).second) {
        throw UsageError(std::string("several ") + side + " files share the id '" + key + "'");
      }
    }
    return out;
  };
  const auto pred_by_id = index(preds, "prediction");
  const auto ref_by_id = index(refs, "reference");

  std::vector<std::string> orphans;
  std::vector<EvalPair> pairs;
  for (const auto& [id, p] : pred_by_id) {
    const auto it = ref_by_id.find(id);
    if (it == ref_by_id.end()) {
      orphans.push_back(p.string());
    } else {
      pairs.push_back({id, p, it->second});
    }
  }
  for (const auto& [id, r] : ref_by_id) {
    if (!pred_by_id.count(id)) orphans.push_back(r.string());
  }
  if (!orphans.empty()) {
    std::string msg = "unpaired files:";
    for (const auto& o : orphans) msg += " " + o;
    throw UsageError(msg);
  }
  if (pairs.empty()) throw UsageError("no volume pairs to evaluate");
  return pairs;
}

// ---------------------------------------------------------------------------

void cmd_make_data(const MakeDataOptions& opt) {
  ensure_dir(opt.out);
  const Rng root(opt.seed, 0xda7a);
  if (opt.shapes2d) {
    CsvWriter manifest(opt.out / "manifest.csv", {"id", "image", "label", "occupancy"});
    const auto images = gen_2d_shapes(opt.n, opt.seed);
    for (std::size_t i = 0; i < images.size(); ++i) {
      const std::string id = "s" + sample_id(i, opt.n);
      const std::string file = id + "_img.voxb";
      write_voxb(opt.out / file, images[i].image);
      manifest.row({id, file, std::to_string(static_cast<int>(images[i].label)),
                    format_double(images[i].image.occupancy())});
    }
    return;
  }
  const DegradeParams degrade{opt.slab, opt.threshold, opt.axis};
  CsvWriter manifest(opt.out / "manifest.csv", {"id", "hq", "lq", "occupancy", "dice_lq_hq"});
  for (std::size_t i = 0; i < opt.n; ++i) {
    Rng rng = root.split(i);
    const VoxelGrid hq = gen_pseudo_vertebra(sample_shape_params(rng, opt.dims), opt.dims);
    const VoxelGrid lq = degrade_thick_slice(hq, degrade);
    const std::string id = "s" + sample_id(i, opt.n);
    const std::string hq_file = id + "_hq.voxb", lq_file = id + "_lq.voxb";
    write_voxb(opt.out / hq_file, hq);
    write_voxb(opt.out / lq_file, lq);
    manifest.row({id, hq_file, lq_file, format_double(hq.occupancy()), format_double(dice(confusion(lq, hq)))});
  }
}

void cmd_train(const TrainOptions& opt) {
  RunConfig cfg = resolve(opt.model, opt.config, opt.overrides);
  auto files = list_voxb(opt.data, "_hq");
  if (files.empty()) files = list_voxb(opt.data, "_img");
  if (files.empty()) files = list_voxb(opt.data);
  const VolumeSet data = load_volumes(std::move(files), "training");
  cfg.train.input_dim = data.dims.count();
  try {
    validate(cfg.train);
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  if (cfg.save_every < 0) throw UsageError("save_every must be >= 0");

  ensure_dir(opt.out);
  write_text(opt.out / "config.txt", render_config(cfg));

  Samples samples;
  for (const auto& g : data.grids) samples.push_back(g.values());
  auto model = make_model(cfg.model, cfg.train);
  Rng rng(cfg.train.seed, 1);

  CsvWriter log(opt.out / "train_log.csv", {"epoch", "step", "recon", "kl_or_entropy", "E_pos", "E_neg"});
  CsvWriter epochs(opt.out / "epochs.csv", {"epoch", "objective", "recon", "kl_or_entropy", "E_pos", "E_neg"});
  auto on_step = [&](int epoch, std::size_t step, const LossReport& r) {
    log.row({std::to_string(epoch), std::to_string(step), format_double(r.recon), format_double(r.kl_or_entropy),
             format_double(r.e_pos), format_double(r.e_neg)});
  };
  auto on_epoch = [&](const EpochSummary& s) {
    const LossReport& r = s.mean;
    epochs.row({std::to_string(s.epoch), format_double(r.objective), format_double(r.recon),
                format_double(r.kl_or_entropy), format_double(r.e_pos), format_double(r.e_neg)});
    if (cfg.save_every > 0 && s.epoch % cfg.save_every == 0) {
      save_checkpoint(opt.out / ("epoch_" + sample_id(static_cast<std::size_t>(s.epoch), 1000) + ".lsdc"), *model);
    }
  };
  train(*model, samples, rng, on_step, on_epoch);
  save_checkpoint(opt.out / "final.lsdc", *model);
}

void cmd_reconstruct(const ReconstructOptions& opt) {
  auto model = load_model(opt.inference);
  if (!model->can_reconstruct()) throw UsageError("model '" + to_string(model->kind()) + "' cannot reconstruct");
  std::vector<fs::path> inputs;
  if (fs::is_regular_file(opt.in)) {
    inputs.push_back(opt.in);
  } else {
    inputs = list_voxb(opt.in, opt.suffix);
  }
  const VolumeSet set = load_volumes(std::move(inputs), "input");
  check_input_dim(*model, set.dims);
  if (opt.trace && set.grids.size() < 2) throw UsageError("--trace needs at least two input volumes");
  const int steps = opt.steps < 0 ? model->default_reconstruct_steps() : opt.steps;

  Rng rng(opt.inference.seed, 2);
  const Reconstruction rec = model->reconstruct(stack(set.grids), steps, rng, opt.trace);
  ensure_dir(opt.out);
  const std::size_t d = set.dims.count();
  const auto values = rec.output.data();
  for (std::size_t i = 0; i < set.files.size(); ++i) {
    const auto probs = values.subspan(i * d, d);
    const std::string name = id_of(set.files[i]) + "_rec";
    write_voxb(opt.out / (name + ".voxb"), VoxelGrid::from_values(set.dims, probs, 0.5));
    write_slice_montage(opt.out / (name + ".pgm"), probs, set.dims, std::min<std::size_t>(8, set.dims.z));
  }
  if (opt.trace) {
    CsvWriter trace(opt.out / "trace.csv", {"step", "variance"});
    for (std::size_t s = 0; s < rec.trace->values.size(); ++s) {
      trace.row({std::to_string(s + 1), format_double(rec.trace->values[s])});
    }
  }
}

void cmd_generate(const GenerateOptions& opt) {
  if (opt.n == 0) throw UsageError("--n must be positive");
  auto model = load_model(opt.inference);
  const GridDims dims = opt.dims ? *opt.dims : infer_dims(model->config().input_dim);
  check_input_dim(*model, dims);
  Rng rng(opt.inference.seed, 3);
  const Tensor samples = model->generate(opt.n, rng);
  ensure_dir(opt.out);
  const std::size_t d = dims.count();
  for (std::size_t i = 0; i < opt.n; ++i) {
    const auto values = samples.data().subspan(i * d, d);
    const std::string name = "g" + sample_id(i, opt.n);
    write_voxb(opt.out / (name + ".voxb"), VoxelGrid::from_values(dims, values, 0.5));
    write_slice_montage(opt.out / (name + ".pgm"), values, dims, std::min<std::size_t>(8, dims.z));
  }
}

void cmd_eval(const EvalOptions& opt) {
  const auto pairs = pair_files(list_voxb(opt.pred_dir, opt.pred_suffix), list_voxb(opt.ref_dir, opt.ref_suffix));
  ensure_dir(opt.out);
  CsvWriter csv(opt.out / "metrics.csv", {"sample_id", "dice", "vs", "sen", "spec", "nmi", "ck"});
  constexpr std::size_t kMetrics = 6;
  std::vector<std::vector<double>> columns(kMetrics);
  for (const auto& p : pairs) {
    const MetricsReport r = evaluate(read_voxb(p.pred), read_voxb(p.ref));
    const double vals[kMetrics] = {r.dice, r.vs, r.sen, r.spec, r.nmi, r.ck};
    std::vector<std::string> row{p.id};
    for (std::size_t m = 0; m < kMetrics; ++m) {
      row.push_back(format_double(vals[m]));
      if (!std::isnan(vals[m])) columns[m].push_back(vals[m]);
    }
    csv.row(row);
  }
  std::vector<std::string> mean_row{"mean"}, std_row{"std"};
  for (const auto& col : columns) {
    const double n = static_cast<double>(col.size());
    double mean = std::numeric_limits<double>::quiet_NaN(), sd = std::numeric_limits<double>::quiet_NaN();
    if (!col.empty()) {
      mean = 0.0;
      for (double v : col) mean += v;
      mean /= n;
      double ss = 0.0;
      for (double v : col) ss += (v - mean) * (v - mean);
      sd = col.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    mean_row.push_back(format_double(mean));
    std_row.push_back(format_double(sd));
  }
  csv.row(mean_row);
  csv.row(std_row);
}

void cmd_trace_latent(const TraceOptions& opt) {
  if (opt.inference.model != ModelKind::kLsdEbm && opt.inference.model != ModelKind::kLebm) {
    throw UsageError("trace-latent supports the lsdebm and lebm models");
  }
  if (opt.repeats == 0) throw UsageError("--repeats must be positive");
  auto model = load_model(opt.inference);
  const VolumeSet set = load_volumes(list_voxb(opt.data, opt.suffix), "trace");
  if (set.grids.size() < 2) throw UsageError("trace-latent needs at least two volumes");
  check_input_dim(*model, set.dims);
  const Tensor x = stack(set.grids);
  const int steps = opt.steps < 0 ? model->default_reconstruct_steps() : opt.steps;
  ensure_dir(opt.out);
  CsvWriter csv(opt.out / "trace.csv", {"repeat", "step", "variance"});
  const Rng root(opt.inference.seed, 4);
  for (std::size_t r = 0; r < opt.repeats; ++r) {
    Rng rng = root.split(r);
    const Reconstruction rec = model->reconstruct(x, steps, rng, true);
    for (std::size_t s = 0; s < rec.trace->values.size(); ++s) {
      csv.row({std::to_string(r), std::to_string(s + 1), format_double(rec.trace->values[s])});
    }
  }
}

}  // namespace lsd
