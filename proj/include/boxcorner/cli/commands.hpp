#pragma once

// Library entry points behind the command-line tool. Each command throws
// boxc::Error; the tool maps error kinds to exit codes.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "boxcorner/error.hpp"
#include "boxcorner/eval/pipeline.hpp"
#include "boxcorner/io/checkpoint.hpp"
#include "boxcorner/train/trainer.hpp"

namespace boxc::cli {

enum class ExitCode : int { Ok = 0, Usage = 1, DataError = 2, NumericFailure = 3 };

ExitCode exit_code_for(ErrorKind kind);

struct GenOptions {
  std::uint64_t seed = 0;
  std::uint64_t count = 0;
  std::string out_dir;
  GenConfig gen;
};

void cmd_gen(const GenOptions& options);

struct TrainOptions {
  std::string data_dir;
  std::string out;       // checkpoint path
  std::string log_path;  // defaults to <out>.loss.csv
  TrainConfig config;
  std::uint64_t seed = 0;
  int checkpoint_every = 500;
  std::ostream* progress = nullptr;
  int progress_every = 100;
};

struct TrainSummary {
  std::int64_t steps = 0;
  LossRecord first;
  LossRecord last;
};

// Writes the checkpoint and the per-step loss log. On a non-finite loss the
// checkpoint of the last good parameters is written before rethrowing.
TrainSummary cmd_train(const TrainOptions& options);

// Same, on scenes already in memory.
TrainSummary train_on_scenes(const std::vector<Scene>& scenes, const TrainOptions& options);

// Training loss log row, e.g. "12,0.000993,0.0813,0.0121,0.1055".
std::string format_loss_row(const LossRecord& r);

struct EvalCmdOptions {
  std::string data_dir;
  std::string checkpoint;  // unused in bypass mode
  std::string out;         // report path; empty to skip writing
  EvalOptions eval;
  // Replace eval.sigma_scale with the training value stored in the checkpoint.
  bool sigma_scale_from_checkpoint = true;
};

MetricReport cmd_eval(const EvalCmdOptions& options);

struct InferOptions {
  std::string scene_dir;
  std::string checkpoint;
  EvalOptions eval;
  bool sigma_scale_from_checkpoint = true;
};

// Returns the printout: 3x4 pose, 8 corners with confidences, rms error.
// Throws ErrorKind::InsufficientCorrespondences etc. unchanged.
std::string cmd_infer(const InferOptions& options);

struct RenderOptions {
  std::string scene_dir;
  std::string out;
  std::optional<Pose> pose;  // predicted pose; defaults to the checkpoint's
  std::string checkpoint;    // prediction, or the ground truth when empty
  EvalOptions eval;
  bool sigma_scale_from_checkpoint = true;
};

void cmd_render(const RenderOptions& options);

// Query image with the ground-truth box in green and the predicted box in
// blue; edges crossing the near plane are clipped, never fatal.
Image render_overlay(const Scene& scene, const Pose& predicted);

// 12 numbers, rotation row-major then translation, separated by spaces or commas.
Pose parse_pose(const std::string& text);

}  // namespace boxc::cli
