#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "boxcorner/cli/commands.hpp"
#include "boxcorner/error.hpp"
#include "boxcorner/io/scene_io.hpp"
#include "boxcorner/io/tensor_file.hpp"
#include "boxcorner/simd/kernels.hpp"

using namespace boxc;

namespace {

nlohmann::json read_json_config(const std::string& path) {
  const std::string text = io::read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, path + ": " + e.what());
  }
}

struct PipelineFlags {
  int n_refs = 5;
  std::string selection = "fps";
  double min_conf = PoseEstimateOptions{}.min_conf;
  double sigma_scale = kDefaultSigmaScale;
  CLI::Option* sigma_option = nullptr;

  void add(CLI::App* app) {
    app->add_option("--n-refs", n_refs, "Number of reference views")->check(CLI::PositiveNumber);
    app->add_option("--selection", selection, "Reference selection: fps, neighbors or all")
        ->check(CLI::IsMember({"fps", "neighbors", "all"}));
    app->add_option("--min-conf", min_conf, "Minimum corner confidence used by PnP");
    sigma_option = app->add_option("--sigma-scale", sigma_scale,
                                   "Heatmap sigma as a fraction of the object size (default: the checkpoint's "
                                   "training value, else 0.1)")
                       ->check(CLI::PositiveNumber);
  }
  EvalOptions options() const {
    EvalOptions o;
    o.n_refs = n_refs;
    o.selection = parse_selection(selection);
    o.pose.min_conf = min_conf;
    o.sigma_scale = sigma_scale;
    return o;
  }
  bool sigma_from_checkpoint() const { return sigma_option->count() == 0; }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Box-corner object pose estimation on synthetic cuboid scenes"};
  app.require_subcommand(1);

  // gen
  cli::GenOptions gen;
  std::string gen_config;
  auto* g = app.add_subcommand("gen", "Generate a synthetic dataset");
  g->add_option("--seed", gen.seed, "Dataset seed");
  g->add_option("--count", gen.count, "Number of scenes")->required();
  g->add_option("--out", gen.out_dir, "Output directory")->required();
  g->add_option("--config", gen_config, "JSON generator config");

  // train
  cli::TrainOptions train;
  std::string train_config;
  std::optional<std::int64_t> steps;
  std::optional<double> lr, lambda, sigma_scale;
  std::optional<int> batch_size;
  bool quiet = false;
  auto* t = app.add_subcommand("train", "Train the corner heatmap network");
  t->add_option("--data", train.data_dir, "Dataset directory")->required();
  t->add_option("--out", train.out, "Checkpoint path")->required();
  t->add_option("--log", train.log_path, "Loss log path (default <out>.loss.csv)");
  t->add_option("--seed", train.seed, "Initialization and sampling seed");
  t->add_option("--config", train_config, "JSON training config");
  t->add_option("--steps", steps, "Number of optimizer steps");
  t->add_option("--lr", lr, "Initial learning rate");
  t->add_option("--lambda", lambda, "Weight of the corner-coordinate loss (default 2.0)");
  t->add_option("--sigma-scale", sigma_scale, "Heatmap sigma as a fraction of the object size (default 0.1)");
  t->add_option("--batch-size", batch_size, "Scenes per step");
  t->add_option("--checkpoint-every", train.checkpoint_every, "Steps between intermediate checkpoints");
  t->add_flag("--quiet", quiet, "No progress output");

  // eval
  cli::EvalCmdOptions ev;
  PipelineFlags ev_flags;
  bool bypass = false;
  double occlusion = 0.0;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  e->add_option("--data", ev.data_dir, "Dataset directory")->required();
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint path");
  e->add_option("--out", ev.out, "Report path");
  e->add_option("--seed", ev.eval.seed, "Seed for synthetic occluders");
  e->add_flag("--bypass", bypass, "Decode encoded ground-truth heatmaps instead of running the network");
  e->add_option("--occlusion", occlusion, "Query occluder fraction of the silhouette")->check(CLI::Range(0.0, 1.0));
  ev_flags.add(e);

  // infer
  cli::InferOptions inf;
  PipelineFlags inf_flags;
  auto* i = app.add_subcommand("infer", "Estimate the query pose of one scene");
  i->add_option("--scene", inf.scene_dir, "Scene directory")->required();
  i->add_option("--checkpoint", inf.checkpoint, "Checkpoint path")->required();
  inf_flags.add(i);

  // render
  cli::RenderOptions ren;
  PipelineFlags ren_flags;
  std::string pose_text;
  auto* r = app.add_subcommand("render", "Draw ground-truth and predicted boxes over the query image");
  r->add_option("--scene", ren.scene_dir, "Scene directory")->required();
  r->add_option("--out", ren.out, "Output pixmap (.ppm)")->required();
  r->add_option("--pose", pose_text, "Predicted pose: 12 numbers, R row-major then t");
  r->add_option("--checkpoint", ren.checkpoint, "Predict the pose with this checkpoint");
  ren_flags.add(r);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : static_cast<int>(cli::ExitCode::Usage);
  }

  try {
    if (g->parsed()) {
      if (!gen_config.empty()) read_json_config(gen_config).get_to(gen.gen);
      cli::cmd_gen(gen);
    } else if (t->parsed()) {
      if (!train_config.empty()) read_json_config(train_config).get_to(train.config);
      if (steps) train.config.optim.total_steps = *steps;
      if (lr) train.config.optim.lr = *lr;
      if (lambda) train.config.lambda = *lambda;
      if (sigma_scale) train.config.sigma_scale = *sigma_scale;
      if (batch_size) train.config.batch_size = *batch_size;
      if (!quiet) {
        train.progress = &std::cerr;
        std::cerr << "kernels: " << simd::to_string(simd::active_isa()) << '\n';
      }
      const auto s = cli::cmd_train(train);
      if (!quiet) std::cerr << "trained " << s.steps << " steps\n";
    } else if (e->parsed()) {
      ev.eval = [&] {
        EvalOptions o = ev_flags.options();
        o.seed = ev.eval.seed;
        o.gt_heatmap_bypass = bypass;
        o.query_occlusion = occlusion;
        return o;
      }();
      ev.sigma_scale_from_checkpoint = ev_flags.sigma_from_checkpoint();
      const MetricReport rep = cli::cmd_eval(ev);
      const std::string text = rep.to_string();
      std::cout << text.substr(text.find("# scenes"));
    } else if (i->parsed()) {
      inf.eval = inf_flags.options();
      inf.sigma_scale_from_checkpoint = inf_flags.sigma_from_checkpoint();
      std::cout << cli::cmd_infer(inf);
    } else if (r->parsed()) {
      ren.eval = ren_flags.options();
      ren.sigma_scale_from_checkpoint = ren_flags.sigma_from_checkpoint();
      if (!pose_text.empty()) ren.pose = cli::parse_pose(pose_text);
      cli::cmd_render(ren);
    }
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    const auto code = cli::exit_code_for(err.kind());
    return static_cast<int>(code);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return static_cast<int>(cli::ExitCode::DataError);
  }
  return 0;
}
