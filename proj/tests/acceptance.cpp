// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "boxcorner/cli/commands.hpp"
#include "boxcorner/error.hpp"
#include "boxcorner/eval/pipeline.hpp"
#include "boxcorner/heatmap.hpp"
#include "boxcorner/io/checkpoint.hpp"
#include "boxcorner/io/scene_io.hpp"
#include "boxcorner/io/tensor_file.hpp"
#include "boxcorner/pnp.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace boxc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* spec, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

fs::path work_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "boxcorner_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::read_file(e.path().string());
  return out;
}

// 1
Outcome heatmap_fidelity() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-4.0, 68.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Corners2D c;
    for (auto& p : c.points) p = Vec2(u(rng), u(rng));
    const double sigma = object_sigma(c);
    const auto h = encode_heatmap<double>(c, 64, 64);
    for (int i = 0; i < kNumCorners; ++i)
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
          const double d = std::hypot(x - c.points[i].x(), y - c.points[i].y());
          const double ref = std::exp(-d / (2.0 * sigma * sigma));
          worst = std::max(worst, std::abs(h.values[(static_cast<std::size_t>(y) * 64 + x) * kNumCorners + i] - ref));
        }
  }
  // Integer corners and sigma with 2 sigma^2 = 3 put a pixel at d = 2 sigma^2.
  Corners2D c;
  for (int i = 0; i < kNumCorners; ++i) c.points[i] = Vec2(10 + 5 * i, 20 + 3 * i);
  const double sigma = std::sqrt(1.5);
  const auto h = encode_heatmap_with_sigma<double>(c, 64, 64, sigma);
  bool corner_one = true;
  double e_err = 0.0;
  for (int i = 0; i < kNumCorners; ++i) {
    const int x = 10 + 5 * i, y = 20 + 3 * i;
    corner_one = corner_one && h.values[(static_cast<std::size_t>(y) * 64 + x) * kNumCorners + i] == 1.0;
    e_err = std::max(e_err, std::abs(h.values[(static_cast<std::size_t>(y) * 64 + x + 3) * kNumCorners + i] -
                                     std::exp(-1.0)));
  }
  return {worst <= 1e-12 && corner_one && e_err <= 1e-15,
          "max |H - formula| " + fmt("%.3g", worst) + ", corner value 1: " + (corner_one ? "yes" : "no") +
              ", |H(d = 2 sigma^2) - 1/e| " + fmt("%.3g", e_err)};
}

// 2
Outcome codec_round_trip() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> su(1.5, 8.0), unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double sigma = su(rng);
    const double lo = 3.0 * sigma, hi = 63.0 - 3.0 * sigma;
    Corners2D c;
    for (auto& p : c.points) p = Vec2(lo + (hi - lo) * unit(rng), lo + (hi - lo) * unit(rng));
    const auto h = encode_heatmap_with_sigma<double>(c, 64, 64, sigma);
    const auto d = decode_corners(h);
    for (int i = 0; i < kNumCorners; ++i) worst = std::max(worst, (d.corners.points[i] - c.points[i]).norm());
  }
  return {worst <= 0.25, "1000 sets, worst corner error " + fmt("%.4f", worst) + " px (bound 0.25)"};
}

// 3
Outcome pnp_round_trip() {
  std::mt19937_64 rng(303);
  const Intrinsics k = testing::desk_intrinsics(640, 600.0);
  std::normal_distribution<double> noise(0.0, 0.5);
  double worst_rot = 0.0, worst_t = 0.0;
  std::vector<double> noisy_rot;
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Pose gt = testing::random_pose(rng, 0.5, 1.0);
    const BoundingBox3D box = testing::random_box(rng);
    const auto px = project_corners(gt, k, box);
    std::array<double, kNumCorners> conf;
    conf.fill(1.0);
    Corners2D exact, noisy;
    for (int i = 0; i < kNumCorners; ++i) {
      exact.points[i] = px[i];
      noisy.points[i] = px[i] + Vec2(noise(rng), noise(rng));
    }
    try {
      const RefinedPose a = estimate_pose(exact, conf, box, k);
      worst_rot = std::max(worst_rot, rotation_angle_between(a.pose.rotation, gt.rotation));
      worst_t = std::max(worst_t, (a.pose.translation - gt.translation).norm() / gt.translation.norm());
      const RefinedPose b = estimate_pose(noisy, conf, box, k);
      noisy_rot.push_back(rotation_angle_between(b.pose.rotation, gt.rotation) * 180.0 / M_PI);
    } catch (const Error&) {
      ++failures;
    }
  }
  std::sort(noisy_rot.begin(), noisy_rot.end());
  const double median = noisy_rot.empty() ? INFINITY : noisy_rot[noisy_rot.size() / 2];
  return {failures == 0 && worst_rot <= 1e-6 && worst_t <= 1e-6 && median <= 5.0,
          "noiseless worst rotation " + fmt("%.3g", worst_rot) + " rad, worst relative translation " +
              fmt("%.3g", worst_t) + "; 0.5 px noise median rotation " + fmt("%.3f", median) + " deg (bound 5, soft 2)" +
              (failures ? ", failures " + std::to_string(failures) : "")};
}

// 4
Outcome gradient_correctness() {
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  for (std::uint64_t seed : {401, 402, 403}) {
    const auto r = testing::finite_difference_check(testing::tiny_config(), seed, 1e-5, 1e-8);
    checked += r.checked;
    if (r.worst_rel > worst) {
      worst = r.worst_rel;
      where = r.worst_name;
    }
  }
  return {worst < 1e-4, "3 draws, " + std::to_string(checked) + " entries, worst relative error " + fmt("%.3g", worst) +
                            " (" + where + ")"};
}

// 5
Outcome metric_oracles() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(-0.08, 0.08);
  bool adds_exact = true, add_ge = true;
  for (int trial = 0; trial < 100; ++trial) {
    PointCloud pts;
    for (int i = 0; i < 40; ++i) pts.points.emplace_back(u(rng), u(rng), u(rng));
    const Pose gt = testing::random_pose(rng), pred = testing::random_pose(rng);
    double sum = 0.0;
    for (const auto& p : pts.points) {
      double best = INFINITY;
      for (const auto& q : pts.points) best = std::min(best, (gt.apply(p) - pred.apply(q)).norm());
      sum += best;
    }
    const double adds = adds_metric(gt, pred, pts);
    adds_exact = adds_exact && adds == sum / static_cast<double>(pts.size());
    add_ge = add_ge && add_metric(gt, pred, pts) >= adds;
  }

  std::vector<double> errs;
  std::uniform_real_distribution<double> e(0.0, 0.15);
  for (int i = 0; i < 200; ++i) errs.push_back(e(rng));
  errs.push_back(INFINITY);
  const int n = 1000000;
  double grid = 0.0;
  std::vector<double> sorted = errs;
  std::sort(sorted.begin(), sorted.end());
  for (int s = 0; s < n; ++s) {
    const double t = 0.1 * (s + 0.5) / n;
    grid += static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin()) /
            static_cast<double>(sorted.size());
  }
  grid /= n;
  const double auc_err = std::abs(auc(errs) - grid);

  bool fps_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Pose> poses;
    for (int i = 0; i < 30; ++i) poses.push_back(testing::random_pose(rng));
    const int k = 1 + trial % 10;
    std::vector<int> oracle{0};
    while (static_cast<int>(oracle.size()) < k) {
      int best = -1;
      double best_d = -1.0;
      for (int i = 0; i < 30; ++i) {
        double d = INFINITY;
        for (int j : oracle) d = std::min(d, (poses[i].camera_center() - poses[j].camera_center()).norm());
        if (d > best_d) {
          best_d = d;
          best = i;
        }
      }
      oracle.push_back(best);
    }
    fps_ok = fps_ok && fps_sample(poses, k) == oracle;
  }
  return {adds_exact && add_ge && auc_err <= 1e-6 && fps_ok,
          std::string("adds == brute force: ") + (adds_exact ? "yes" : "no") + ", add >= adds: " +
              (add_ge ? "yes" : "no") + ", |auc - grid| " + fmt("%.3g", auc_err) +
              ", fps == greedy oracle: " + (fps_ok ? "yes" : "no")};
}

// 6
Outcome bypass_soundness() {
  const fs::path dir = work_dir("bypass");
  cli::GenOptions g;
  g.seed = 606;
  g.count = 200;
  g.out_dir = (dir / "data").string();
  cli::cmd_gen(g);
  cli::EvalCmdOptions e;
  e.data_dir = g.out_dir;
  e.out = (dir / "report.txt").string();
  e.eval.gt_heatmap_bypass = true;
  const MetricReport r = cli::cmd_eval(e);
  return {r.scenes.size() == 200 && r.add_s_01d_rate() == 1.0 && r.proj2d_rate() == 1.0,
          std::to_string(r.scenes.size()) + " scenes, ADD(s)-0.1d " + fmt("%.1f%%", 100 * r.add_s_01d_rate()) +
              ", Proj2D@5px " + fmt("%.1f%%", 100 * r.proj2d_rate()) + ", median corner error " +
              fmt("%.4f", r.median_corner_error()) + " px"};
}

// 7
Outcome overfit_check() {
  const fs::path dir = work_dir("overfit");
  const Scene scene = generate_scene(707, 0, GenConfig{});
  cli::TrainOptions t;
  t.out = (dir / "overfit.ckpt").string();
  t.seed = 7;
  t.config.optim.total_steps = 500;
  t.config.optim.lr = 3e-3;
  t.config.batch_size = 1;
  t.config.augment = AugmentConfig::none();
  t.checkpoint_every = 0;

  const std::vector<int> refs = [&] {
    std::vector<int> r(std::min<std::size_t>(5, scene.references.size()));
    std::iota(r.begin(), r.end(), 0);
    return r;
  }();
  const auto sample = make_sample<float>(scene, refs, t.config.sigma_scale);
  const auto init = nn::init_params<float>(t.config.model, t.seed);
  const double before = evaluate_loss(sample, init, t.config).coarse;
  cli::train_on_scenes({scene}, t);
  const io::Checkpoint ck = io::load_checkpoint(t.out);
  const double after = evaluate_loss(sample, ck.params, t.config).coarse;

  EvalOptions eo;
  const Prediction p = predict(scene, &ck.params, ck.config, eo);
  double worst = 0.0;
  for (int c = 0; c < kNumCorners; ++c)
    worst = std::max(worst, (p.decoded.corners.points[c] - scene.gt_corners.points[c]).norm());
  const double ratio = before / after;
  return {ratio >= 5.0 && worst <= 2.0,
          "coarse loss " + fmt("%.3g", before) + " -> " + fmt("%.3g", after) + " (" + fmt("%.1f", ratio) +
              "x, floor 5x, target 10x), worst decoded corner " + fmt("%.3f", worst) + " px (bound 2)"};
}

// Shared by 8 and 9.
struct ToyRun {
  std::string test_dir;
  std::string checkpoint;
  MetricReport trained;
};
std::optional<ToyRun> toy;

constexpr std::int64_t kToySteps = 8000;
constexpr int kToyBatch = 8;
constexpr double kToyLr = 2e-3;
constexpr double kToySigmaScale = 0.3;

ToyRun run_toy() {
  ToyRun run;
  const fs::path dir = work_dir("toy");
  cli::GenOptions g;
  g.seed = 808;
  g.count = 2000;
  g.out_dir = (dir / "train").string();
  cli::cmd_gen(g);
  g.seed = 809;
  g.count = 200;
  g.out_dir = (dir / "test").string();
  cli::cmd_gen(g);
  run.test_dir = g.out_dir;

  cli::TrainOptions t;
  t.data_dir = (dir / "train").string();
  t.seed = 8;
  t.config.sigma_scale = kToySigmaScale;
  t.config.augment = AugmentConfig::none();
  t.config.optim.total_steps = 0;
  t.out = (dir / "untrained.ckpt").string();
  cli::cmd_train(t);
  t.config.optim.total_steps = kToySteps;
  t.config.optim.lr = kToyLr;
  t.config.batch_size = kToyBatch;
  t.out = (dir / "trained.ckpt").string();
  t.progress = &std::cerr;
  t.progress_every = 500;
  cli::cmd_train(t);
  run.checkpoint = t.out;
  return run;
}

Outcome toy_generalization() {
  toy = run_toy();
  cli::EvalCmdOptions e;
  e.data_dir = toy->test_dir;
  e.eval.n_refs = 5;
  e.eval.selection = Selection::Fps;
  e.checkpoint = (fs::path(toy->checkpoint).parent_path() / "untrained.ckpt").string();
  const MetricReport before = cli::cmd_eval(e);
  e.checkpoint = toy->checkpoint;
  e.out = (fs::path(toy->checkpoint).parent_path() / "report.txt").string();
  toy->trained = cli::cmd_eval(e);
  const MetricReport& after = toy->trained;
  const double m0 = before.median_corner_error(), m1 = after.median_corner_error();
  return {after.scenes.size() == 200 && m1 <= 0.5 * m0,
          "median corner error " + fmt("%.3f", m0) + " px untrained -> " + fmt("%.3f", m1) +
              " px trained (bound " + fmt("%.3f", 0.5 * m0) + "); ADD(s)-0.1d " +
              fmt("%.1f%%", 100 * after.add_s_01d_rate()) + " (soft target 50%), Proj2D@5px " +
              fmt("%.1f%%", 100 * after.proj2d_rate()) + ", pose failures " + std::to_string(after.failures()) +
              "; " + std::to_string(kToySteps) + " steps x batch " + std::to_string(kToyBatch) + ", lr " +
              fmt("%g", kToyLr) + ", sigma_scale " + fmt("%g", kToySigmaScale) + ", no augmentation"};
}

// 9
Outcome occlusion_report() {
  if (!toy) {
    toy = run_toy();
    cli::EvalCmdOptions e;
    e.data_dir = toy->test_dir;
    e.checkpoint = toy->checkpoint;
    toy->trained = cli::cmd_eval(e);
  }
  cli::EvalCmdOptions e;
  e.data_dir = toy->test_dir;
  e.checkpoint = toy->checkpoint;
  e.eval.n_refs = 5;
  e.eval.query_occlusion = 0.25;
  e.eval.seed = 909;
  e.out = (fs::path(toy->checkpoint).parent_path() / "report_occluded.txt").string();
  const MetricReport occ = cli::cmd_eval(e);
  const MetricReport& clean = toy->trained;
  const bool complete = occ.scenes.size() == 200;
  return {complete, std::to_string(occ.scenes.size()) + "/200 scenes completed; ADD(s)-0.1d " +
                        fmt("%.1f%%", 100 * clean.add_s_01d_rate()) + " -> " + fmt("%.1f%%", 100 * occ.add_s_01d_rate()) +
                        ", Proj2D@5px " + fmt("%.1f%%", 100 * clean.proj2d_rate()) + " -> " +
                        fmt("%.1f%%", 100 * occ.proj2d_rate()) + ", median corner error " +
                        fmt("%.3f", clean.median_corner_error()) + " -> " + fmt("%.3f", occ.median_corner_error()) +
                        " px, failures " + std::to_string(clean.failures()) + " -> " + std::to_string(occ.failures())};
}

// 10
Outcome determinism() {
  const fs::path dir = work_dir("determinism");
  auto gen = [&](const std::string& name) {
    cli::GenOptions g;
    g.seed = 1010;
    g.count = 8;
    g.out_dir = (dir / name).string();
    cli::cmd_gen(g);
    return g.out_dir;
  };
  const std::string a = gen("gen_a"), b = gen("gen_b");
  const bool gen_same = tree_bytes(a) == tree_bytes(b);

  auto train = [&](const std::string& name) {
    cli::TrainOptions t;
    t.data_dir = a;
    t.seed = 10;
    t.config.optim.total_steps = 10;
    t.config.batch_size = 2;
    t.out = (dir / name).string();
    cli::cmd_train(t);
    return t.out;
  };
  const std::string ca = train("a.ckpt"), cb = train("b.ckpt");
  const bool train_same =
      io::read_file(ca) == io::read_file(cb) && io::read_file(ca + ".loss.csv") == io::read_file(cb + ".loss.csv");

  auto eval = [&](const std::string& name) {
    cli::EvalCmdOptions e;
    e.data_dir = a;
    e.checkpoint = ca;
    e.out = (dir / name).string();
    cli::cmd_eval(e);
    return io::read_file(e.out);
  };
  const bool eval_same = eval("ra.txt") == eval("rb.txt");
  return {gen_same && train_same && eval_same, std::string("gen ") + (gen_same ? "identical" : "DIFFERENT") +
                                                   ", train (10 steps) " + (train_same ? "identical" : "DIFFERENT") +
                                                   ", eval " + (eval_same ? "identical" : "DIFFERENT")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0 means no limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "heatmap formula fidelity", 1, heatmap_fidelity},
      {2, "codec round trip", 30, codec_round_trip},
      {3, "PnP round trip", 60, pnp_round_trip},
      {4, "gradient correctness", 300, gradient_correctness},
      {5, "metric oracles", 0, metric_oracles},
      {6, "geometry-only pipeline (bypass)", 120, bypass_soundness},
      {7, "single-scene overfit", 600, overfit_check},
      {8, "toy generalization", 3600, toy_generalization},
      {9, "occlusion robustness report", 0, occlusion_report},
      {10, "determinism", 0, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = c.budget_seconds <= 0 || secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    const std::string budget = c.budget_seconds > 0 ? fmt(" (budget %.0f s", c.budget_seconds) + (in_time ? ")" : ", EXCEEDED)") : "";
    std::printf("[%s] %2d %s: %s; %.1f s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                budget.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
