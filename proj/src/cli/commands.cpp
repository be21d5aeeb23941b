#include "boxcorner/cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "boxcorner/error.hpp"
#include "boxcorner/io/scene_io.hpp"
#include "boxcorner/io/tensor_file.hpp"

namespace boxc::cli {
namespace {

namespace fs = std::filesystem;

constexpr double kNearPlane = 1e-3;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void draw_segment(Image& img, Vec2 a, Vec2 b, const std::uint8_t color[3]) {
  // Liang-Barsky against the pixel-center rectangle, then Bresenham.
  const double xmin = -0.5, ymin = -0.5, xmax = img.width - 0.5, ymax = img.height - 0.5;
  double t0 = 0.0, t1 = 1.0;
  const Vec2 d = b - a;
  const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
  const double q[4] = {a.x() - xmin, xmax - a.x(), a.y() - ymin, ymax - a.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      if (r > t1) return;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return;
      t1 = std::min(t1, r);
    }
  }
  const Vec2 s = a + t0 * d, e = a + t1 * d;
  long x0 = std::lround(s.x()), y0 = std::lround(s.y());
  const long x1 = std::lround(e.x()), y1 = std::lround(e.y());
  const long dx = std::labs(x1 - x0), dy = -std::labs(y1 - y0);
  const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  long err = dx + dy;
  for (;;) {
    if (x0 >= 0 && y0 >= 0 && x0 < img.width && y0 < img.height) {
      std::uint8_t* px = img.pixel(static_cast<int>(x0), static_cast<int>(y0));
      px[0] = color[0];
      px[1] = color[1];
      px[2] = color[2];
    }
    if (x0 == x1 && y0 == y1) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void draw_box(Image& img, const BoundingBox3D& box, const Pose& pose, const Intrinsics& k,
              const std::uint8_t color[3]) {
  for (const auto& [i, j] : BoundingBox3D::edges()) {
    Vec3 a = pose.apply(box.corners[i]);
    Vec3 b = pose.apply(box.corners[j]);
    if (a.z() < kNearPlane && b.z() < kNearPlane) continue;
    if (a.z() < kNearPlane) a = a + (b - a) * ((kNearPlane - a.z()) / (b.z() - a.z()));
    if (b.z() < kNearPlane) b = b + (a - b) * ((kNearPlane - b.z()) / (a.z() - b.z()));
    auto project = [&](const Vec3& c) { return Vec2(k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy); };
    const Vec2 pa = project(a), pb = project(b);
    if (!pa.allFinite() || !pb.allFinite()) continue;
    draw_segment(img, pa, pb, color);
  }
}

std::vector<Scene> load_scenes_or_throw(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "dataset directory '" + dir + "' does not exist");
  return io::load_dataset(dir);
}

}  // namespace

ExitCode exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NumericFailure: return ExitCode::NumericFailure;
    default: return ExitCode::DataError;
  }
}

void cmd_gen(const GenOptions& o) {
  o.gen.validate();
  if (o.out_dir.empty()) throw Error(ErrorKind::InvalidArgument, "output directory is required");
  io::DatasetManifest m;
  m.seed = o.seed;
  m.count = o.count;
  m.gen = o.gen;
  for (std::uint64_t i = 0; i < o.count; ++i) {
    const Scene s = generate_scene(o.seed, i, o.gen);
    const std::string name = io::scene_dir_name(i);
    io::save_scene((fs::path(o.out_dir) / name).string(), s);
    m.scenes.push_back(name);
  }
  io::save_manifest(o.out_dir, m);
}

std::string format_loss_row(const LossRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g", static_cast<long long>(r.step), r.lr, r.coarse, r.fine,
                r.total);
  return buf;
}

TrainSummary train_on_scenes(const std::vector<Scene>& scenes, const TrainOptions& o) {
  o.config.validate();
  if (o.out.empty()) throw Error(ErrorKind::InvalidArgument, "checkpoint path is required");
  const std::int64_t steps = o.config.optim.total_steps;
  if (steps > 0 && scenes.empty()) throw Error(ErrorKind::InvalidArgument, "dataset has no scenes");
  const std::string log_path = o.log_path.empty() ? o.out + ".loss.csv" : o.log_path;

  io::Checkpoint ck;
  ck.config = o.config.model;
  ck.params = nn::init_params<float>(o.config.model, o.seed);
  ck.extra = {{"train", o.config}, {"seed", o.seed}};
  OptimState<float> opt = init_optim_state(ck.params);

  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw Error(ErrorKind::Io, "cannot open '" + log_path + "' for writing");
  log << "step,lr,coarse,fine,total\n";

  std::seed_seq seq{o.seed, std::uint64_t{0x7472616e}};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(scenes.size());
  std::size_t cursor = order.size();
  auto next_index = [&]() {
    if (cursor == order.size()) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(order[i - 1], order[pick(rng)]);
      }
      cursor = 0;
    }
    return order[cursor++];
  };

  TrainSummary summary;
  std::vector<Scene> batch;
  for (std::int64_t step = 0; step < steps; ++step) {
    batch.clear();
    for (int b = 0; b < o.config.batch_size; ++b) batch.push_back(scenes[next_index()]);
    LossRecord rec;
    try {
      rec = train_step<float>(batch, ck.params, opt, o.config, rng);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NumericFailure) {
        ck.step = opt.step;
        io::save_checkpoint(o.out, ck);
        log.flush();
      }
      throw;
    }
    if (step == 0) summary.first = rec;
    summary.last = rec;
    log << format_loss_row(rec) << '\n';
    if (o.progress && (step % o.progress_every == 0 || step + 1 == steps))
      *o.progress << "step " << rec.step << " lr " << fmt("%.3g", rec.lr) << " coarse " << fmt("%.5f", rec.coarse)
                  << " fine " << fmt("%.5f", rec.fine) << " total " << fmt("%.5f", rec.total) << std::endl;
    if (o.checkpoint_every > 0 && (step + 1) % o.checkpoint_every == 0 && step + 1 < steps) {
      ck.step = opt.step;
      io::save_checkpoint(o.out, ck);
    }
  }
  ck.step = opt.step;
  io::save_checkpoint(o.out, ck);
  log.flush();
  if (!log) throw Error(ErrorKind::Io, "write failed for '" + log_path + "'");
  summary.steps = steps;
  return summary;
}

TrainSummary cmd_train(const TrainOptions& o) { return train_on_scenes(load_scenes_or_throw(o.data_dir), o); }

namespace {

EvalOptions checkpoint_eval_options(EvalOptions e, const io::Checkpoint& ck, bool sigma_from_checkpoint) {
  if (!sigma_from_checkpoint) return e;
  const auto train = ck.extra.find("train");
  if (train != ck.extra.end() && train->contains("sigma_scale")) e.sigma_scale = (*train)["sigma_scale"].get<double>();
  return e;
}

}  // namespace

MetricReport cmd_eval(const EvalCmdOptions& o) {
  const std::vector<Scene> scenes = load_scenes_or_throw(o.data_dir);
  std::optional<io::Checkpoint> ck;
  if (!o.eval.gt_heatmap_bypass) {
    if (o.checkpoint.empty()) throw Error(ErrorKind::InvalidArgument, "a checkpoint is required unless --bypass is set");
    ck = io::load_checkpoint(o.checkpoint);
  }
  const nn::ModelConfig config = ck ? ck->config : nn::ModelConfig::desk();
  const EvalOptions eval = ck ? checkpoint_eval_options(o.eval, *ck, o.sigma_scale_from_checkpoint) : o.eval;
  const MetricReport report = evaluate(scenes, ck ? &ck->params : nullptr, config, eval);
  if (!o.out.empty()) io::write_file(o.out, report.to_string());
  return report;
}

std::string cmd_infer(const InferOptions& o) {
  const Scene scene = io::load_scene(o.scene_dir);
  const io::Checkpoint ck = io::load_checkpoint(o.checkpoint);
  Prediction pred =
      predict(scene, &ck.params, ck.config, checkpoint_eval_options(o.eval, ck, o.sigma_scale_from_checkpoint));
  if (!pred.pose) throw Error(pred.failure_kind, pred.failure);
  std::ostringstream out;
  out << "references";
  for (int r : pred.references) out << ' ' << r;
  out << "\npose\n";
  const Pose& p = pred.pose->pose;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out << fmt("%.9f", p.rotation(r, c)) << ' ';
    out << fmt("%.9f", p.translation[r]) << '\n';
  }
  out << "corners\n";
  for (int c = 0; c < kNumCorners; ++c)
    out << c << ' ' << fmt("%.4f", pred.decoded.corners.points[c].x()) << ' '
        << fmt("%.4f", pred.decoded.corners.points[c].y()) << ' ' << fmt("%.4f", pred.decoded.confidence[c]) << '\n';
  out << "rms " << fmt("%.6f", pred.pose->rms_reproj) << '\n';
  return out.str();
}

Image render_overlay(const Scene& scene, const Pose& predicted) {
  Image img = scene.query.image;
  static const std::uint8_t green[3] = {0, 255, 0};
  static const std::uint8_t blue[3] = {0, 0, 255};
  draw_box(img, scene.box, scene.query.pose, scene.query.intrinsics, green);
  draw_box(img, scene.box, predicted, scene.query.intrinsics, blue);
  return img;
}

void cmd_render(const RenderOptions& o) {
  if (o.out.empty()) throw Error(ErrorKind::InvalidArgument, "output path is required");
  const Scene scene = io::load_scene(o.scene_dir);
  Pose pred = scene.query.pose;
  if (o.pose) {
    pred = *o.pose;
  } else if (!o.checkpoint.empty()) {
    const io::Checkpoint ck = io::load_checkpoint(o.checkpoint);
    const Prediction p =
        predict(scene, &ck.params, ck.config, checkpoint_eval_options(o.eval, ck, o.sigma_scale_from_checkpoint));
    if (!p.pose) throw Error(p.failure_kind, p.failure);
    pred = p.pose->pose;
  }
  io::save_ppm(o.out, render_overlay(scene, pred));
}

Pose parse_pose(const std::string& text) {
  std::string s = text;
  for (char& c : s)
    if (c == ',') c = ' ';
  std::istringstream in(s);
  double v[12];
  for (double& x : v)
    if (!(in >> x)) throw Error(ErrorKind::InvalidArgument, "pose needs 12 numbers (R row-major, then t)");
  std::string extra;
  if (in >> extra) throw Error(ErrorKind::InvalidArgument, "pose has more than 12 numbers");
  Pose p;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = v[3 * r + c];
  p.translation = Vec3(v[9], v[10], v[11]);
  if (!p.is_valid(1e-6)) throw Error(ErrorKind::InvalidArgument, "pose rotation is not a proper rotation");
  return p;
}

}  // namespace boxc::cli
