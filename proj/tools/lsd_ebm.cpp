// Command-line front end: make-data, train, reconstruct, generate, eval, trace-latent.
#include <CLI11.hpp>

#include <iostream>

#include "lsd/commands.hpp"
#include "lsd/errors.hpp"

namespace {

constexpr int kUsageExit = 1;
constexpr int kRuntimeExit = 2;

void add_model(CLI::App* cmd, lsd::ModelKind& model) {
  cmd->add_option_function<std::string>(
         "--model", [&model](const std::string& name) { model = lsd::parse_model_kind(CLI::detail::to_lower(name)); },
         "vae | ebm2d | lebm | lsdebm")
      ->required()
      ->type_name("MODEL")
      ->check(CLI::IsMember({"vae", "ebm2d", "lebm", "lsdebm"}, CLI::ignore_case).description(""));
}

void add_config(CLI::App* cmd, std::optional<std::filesystem::path>& config, std::vector<std::string>& overrides) {
  cmd->add_option("--config", config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", overrides, "config override key=value (repeatable, applied after --config)");
}

void add_inference(CLI::App* cmd, lsd::InferenceOptions& opt) {
  add_model(cmd, opt.model);
  cmd->add_option("--ckpt", opt.ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  add_config(cmd, opt.config, opt.overrides);
  cmd->add_option("--seed", opt.seed, "sampling seed")->capture_default_str();
}

lsd::GridDims parse_dims(const std::vector<std::size_t>& v) {
  if (v.size() != 3) throw CLI::ValidationError("--dims", "expects three sizes");
  return {v[0], v[1], v[2]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space diffusion energy-based prior for binary shape reconstruction"};
  app.require_subcommand(1);
  bool serial = false;
  app.add_flag("--serial", serial, "single-threaded BLAS for bit-reproducible runs");

  lsd::MakeDataOptions make;
  std::vector<std::size_t> make_dims{32, 32, 32};
  auto* make_cmd = app.add_subcommand("make-data", "write a synthetic HQ/LQ corpus");
  make_cmd->add_option("--out", make.out, "output directory")->required();
  make_cmd->add_option("--n", make.n, "number of samples")->capture_default_str();
  make_cmd->add_option("--dims", make_dims, "grid size x y z")->expected(3)->capture_default_str();
  make_cmd->add_option("--seed", make.seed)->capture_default_str();
  make_cmd->add_option("--slab", make.slab, "through-plane slab thickness")->capture_default_str();
  make_cmd->add_option("--threshold", make.threshold, "degradation threshold")->capture_default_str();
  make_cmd->add_option("--axis", make.axis, "through-plane axis (0, 1, 2)")->capture_default_str();
  make_cmd->add_flag("--shapes2d", make.shapes2d, "28x28 disc/cross/ring images instead of volumes");

  lsd::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_model(train_cmd, train.model);
  add_config(train_cmd, train.config, train.overrides);
  train_cmd->add_option("--data", train.data, "directory of training volumes")->required();
  train_cmd->add_option("--out", train.out, "run directory")->required();

  lsd::ReconstructOptions rec;
  auto* rec_cmd = app.add_subcommand("reconstruct", "reconstruct degraded volumes");
  add_inference(rec_cmd, rec.inference);
  rec_cmd->add_option("--in", rec.in, "input .voxb file or directory")->required()->check(CLI::ExistingPath);
  rec_cmd->add_option("--suffix", rec.suffix, "only inputs whose name ends with this (e.g. _lq)");
  rec_cmd->add_option("--out", rec.out, "output directory")->required();
  rec_cmd->add_option("--steps", rec.steps, "diffusion depth / chain length (-1: model default)")->capture_default_str();
  rec_cmd->add_flag("--trace", rec.trace, "write trace.csv of latent variance");

  lsd::GenerateOptions gen;
  std::vector<std::size_t> gen_dims;
  auto* gen_cmd = app.add_subcommand("generate", "draw samples from a trained model");
  add_inference(gen_cmd, gen.inference);
  gen_cmd->add_option("--n", gen.n, "number of samples")->capture_default_str();
  gen_cmd->add_option("--dims", gen_dims, "output grid x y z (default inferred)")->expected(3);
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  lsd::EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "segmentation metrics of predictions against references");
  eval_cmd->add_option("--pred-dir", eval.pred_dir)->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--ref-dir", eval.ref_dir)->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--pred-suffix", eval.pred_suffix, "only predictions whose name ends with this");
  eval_cmd->add_option("--ref-suffix", eval.ref_suffix, "only references whose name ends with this");
  eval_cmd->add_option("--out", eval.out, "output directory")->required();

  lsd::TraceOptions trace;
  auto* trace_cmd = app.add_subcommand("trace-latent", "latent variance along denoising / MCMC trajectories");
  add_inference(trace_cmd, trace.inference);
  trace_cmd->add_option("--data", trace.data, "directory of input volumes")->required()->check(CLI::ExistingDirectory);
  trace_cmd->add_option("--suffix", trace.suffix, "only inputs whose name ends with this");
  trace_cmd->add_option("--repeats", trace.repeats)->capture_default_str();
  trace_cmd->add_option("--steps", trace.steps, "-1: model default")->capture_default_str();
  trace_cmd->add_option("--out", trace.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }

  try {
    if (serial) lsd::force_serial();
    if (*make_cmd) {
      make.dims = parse_dims(make_dims);
      lsd::cmd_make_data(make);
    } else if (*train_cmd) {
      lsd::cmd_train(train);
    } else if (*rec_cmd) {
      lsd::cmd_reconstruct(rec);
    } else if (*gen_cmd) {
      if (!gen_dims.empty()) gen.dims = parse_dims(gen_dims);
      lsd::cmd_generate(gen);
    } else if (*eval_cmd) {
      lsd::cmd_eval(eval);
    } else if (*trace_cmd) {
      lsd::cmd_trace_latent(trace);
    }
  } catch (const lsd::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeExit;
  }
  return 0;
}
