#include <malloc.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "acmf/attention.hpp"
#include "acmf/checkpoint.hpp"
#include "acmf/dataset_io.hpp"
#include "acmf/error.hpp"
#include "acmf/evaluate.hpp"
#include "acmf/kernels.hpp"
#include "acmf/refine.hpp"
#include "acmf/report.hpp"
#include "acmf/run_config.hpp"
#include "acmf/tensor_io.hpp"
#include "acmf/train.hpp"

namespace fs = std::filesystem;
using namespace acmf;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kFormat = 3, kNumerical = 4 };

RunConfig load_config(const std::string& file, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!file.empty()) cfg.load_file(file);
  for (const auto& o : overrides) cfg.apply_override(o);
  return cfg;
}

int cmd_synth(const std::string& out, const std::string& config_file, const std::vector<std::string>& overrides) {
  RunConfig cfg = load_config(config_file, overrides);
  cfg.require("seed");
  const Dataset data = synth_dataset(cfg.synth());
  write_dataset(out, data, cfg.resolved());
  std::printf("wrote %zu train and %zu test videos to %s\n", data.train.size(), data.test.size(), out.c_str());
  return kOk;
}

int cmd_train(const std::string& data_dir, const std::string& out, const std::string& config_file,
              const std::vector<std::string>& overrides) {
  RunConfig cfg = load_config(config_file, overrides);
  cfg.require("seed");
  const LoadedDataset data = read_dataset(data_dir);
  if (data.dataset.train.empty()) throw ConfigError("dataset " + data_dir + " has no training videos");
  const Shape& frame = data.dataset.train.front().frames.front().shape();
  if (frame[1] != frame[2]) throw ConfigError("training frames must be square, got " + to_string(frame));
  const ModelConfig model = cfg.model(frame[0], frame[1]);

  TrainResult result = train_mfr(data.dataset.train, model, cfg.train(), [](std::size_t epoch, double loss) {
    std::printf("epoch=%zu loss=%.9f\n", epoch, loss);
    std::fflush(stdout);
  });
  result.checkpoint.run_config = cfg.resolved().dump();
  save_checkpoint(result.checkpoint, out);
  return kOk;
}

struct EvalArgs {
  std::string ckpt, data, report, config;
  bool refine = false;
  std::optional<std::size_t> rounds, nr;
  std::optional<double> refine_lr;
  std::string perturb;
  std::vector<std::string> overrides;
};

int cmd_eval(const EvalArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  RunConfig cfg;
  cfg.set("seed", std::to_string(ckpt.metadata.seed));
  if (!a.config.empty()) cfg.load_file(a.config);
  for (const auto& o : a.overrides) cfg.apply_override(o);
  if (a.refine) cfg.set("refine.enabled", "true");
  if (a.rounds) cfg.set("refine.rounds", std::to_string(*a.rounds));
  if (a.refine_lr) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", *a.refine_lr);
    cfg.set("refine.lr", buf);
  }
  if (a.nr) cfg.set("refine.reference_frames", std::to_string(*a.nr));
  if (!a.perturb.empty()) cfg.set("eval.perturbations", a.perturb);

  const LoadedDataset data = read_dataset(a.data);
  if (data.dataset.test.empty()) throw ConfigError("dataset " + a.data + " has no test videos");
  const Shape expected{ckpt.config.channels, ckpt.config.input_size, ckpt.config.input_size};
  for (const auto* split : {&data.dataset.train, &data.dataset.test}) {
    for (const auto& clip : *split) {
      if (clip.frames.front().shape() != expected) {
        throw ConfigError("checkpoint expects frames " + to_string(expected) + " but video " + clip.video_id + " has " +
                          to_string(clip.frames.front().shape()));
      }
    }
  }

  const EvalOptions options = cfg.eval();
  std::optional<AttentionMap<float>> reference;
  std::vector<Tensor<float>> reference_frames;
  if (options.refine) {
    reference_frames =
        sample_reference_frames(data.dataset.train, options.refine->reference_frames, options.refine->reference_seed);
    reference = mean_gradcam(ckpt.config, ckpt.params, reference_frames);
  }
  const EvalReport report = evaluate(ckpt, data.dataset.test, options, reference ? &*reference : nullptr,
                                     options.refine && options.refine->recompute_reference ? &reference_frames : nullptr);
  write_file_atomic(a.report, report_to_json(report, cfg.resolved(), cfg.timing()).dump(2) + "\n");

  std::printf("auc=%.6f", report.auc.overall);
  for (const auto& [name, value] : report.auc.by_family) std::printf(" %s=%.6f", name.c_str(), value);
  std::printf("\n");
  return kOk;
}

int cmd_viz(const std::string& ckpt_path, const std::string& input, const std::string& out,
            std::optional<double> binarize_top) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  Tensor<float> image = load_tensor<float>(input);
  if (image.rank() == 4 && image.dim(0) == 1) {
    image = Tensor<float>(Shape{image.dim(1), image.dim(2), image.dim(3)}, image.values());
  }
  const Shape expected{ckpt.config.channels, ckpt.config.input_size, ckpt.config.input_size};
  if (image.shape() != expected) {
    throw FormatError(FormatErrorKind::kShapeMismatch,
                      input + ": expected " + to_string(expected) + ", got " + to_string(image.shape()));
  }
  if (binarize_top && !(*binarize_top >= 0.0 && *binarize_top <= 1.0)) {
    throw ConfigError("--binarize-top must be in [0, 1]");
  }
  const AttentionMap<float> map = gradcam_map(ckpt.config, ckpt.params, image);
  write_file_atomic(out, to_pgm(map, binarize_top));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  // Activation buffers are large and short-lived; keeping them on the heap
  // instead of fresh mmap pages avoids a page-fault storm per training step.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"Masked-frequency training and attention-consistency refinement for synthetic forgery detection"};
  app.require_subcommand(1);

  std::string out, config_file, data_dir, ckpt, input;
  std::vector<std::string> overrides;

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic video dataset");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--config", config_file, "key = value config file");
  synth->add_option("overrides", overrides, "key=value overrides");

  auto* train = app.add_subcommand("train", "Stage 1: masked-frequency training");
  train->add_option("--data", data_dir, "Dataset directory")->required();
  train->add_option("--out", out, "Checkpoint path")->required();
  train->add_option("--config", config_file, "key = value config file");
  train->add_option("overrides", overrides, "key=value overrides");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score test videos, optionally with attention-consistency refinement");
  eval->add_option("--ckpt", ea.ckpt, "Checkpoint path")->required();
  eval->add_option("--data", ea.data, "Dataset directory")->required();
  eval->add_option("--report", ea.report, "Report path (JSON)")->required();
  eval->add_option("--config", ea.config, "key = value config file");
  eval->add_flag("--refine", ea.refine, "Refine each video before scoring");
  eval->add_option("--T", ea.rounds, "Refinement rounds");
  eval->add_option("--refine-lr", ea.refine_lr, "Refinement learning rate");
  eval->add_option("--nr", ea.nr, "Reference frame count");
  eval->add_option("--perturb", ea.perturb, "Comma-separated perturbations to evaluate under");
  eval->add_option("overrides", ea.overrides, "key=value overrides");

  std::optional<double> binarize_top;
  auto* viz = app.add_subcommand("viz", "Render a Grad-CAM map as PGM");
  viz->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  viz->add_option("--input", input, "Input frame (ACMF-TENSOR)")->required();
  viz->add_option("--out", out, "Output PGM")->required();
  viz->add_option("--binarize-top", binarize_top, "Keep the top fraction of pixels as 255");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    kernels::apply_thread_limit_from_env();
    if (*synth) return cmd_synth(out, config_file, overrides);
    if (*train) return cmd_train(data_dir, out, config_file, overrides);
    if (*eval) return cmd_eval(ea);
    if (*viz) return cmd_viz(ckpt, input, out, binarize_top);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kFormat;
  } catch (const ShapeError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kFormat;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
