#include "boxcorner/io/scene_io.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "boxcorner/error.hpp"
#include "boxcorner/io/tensor_file.hpp"

namespace boxc {

void to_json(nlohmann::json& j, const GenConfig& c) {
  j = nlohmann::json{{"image_width", c.image_width},
                     {"image_height", c.image_height},
                     {"focal", c.focal},
                     {"min_distance", c.min_distance},
                     {"max_distance", c.max_distance},
                     {"min_edge", c.min_edge},
                     {"max_edge", c.max_edge},
                     {"min_refs", c.min_refs},
                     {"max_refs", c.max_refs},
                     {"symmetric_prob", c.symmetric_prob},
                     {"target_jitter", c.target_jitter},
                     {"roll_jitter", c.roll_jitter},
                     {"min_elevation", c.min_elevation},
                     {"max_elevation", c.max_elevation},
                     {"cloud_points_per_face", c.cloud_points_per_face},
                     {"cloud_noise", c.cloud_noise},
                     {"corner_margin", c.corner_margin}};
}

void from_json(const nlohmann::json& j, GenConfig& c) {
  c.image_width = j.value("image_width", c.image_width);
  c.image_height = j.value("image_height", c.image_height);
  c.focal = j.value("focal", c.focal);
  c.min_distance = j.value("min_distance", c.min_distance);
  c.max_distance = j.value("max_distance", c.max_distance);
  c.min_edge = j.value("min_edge", c.min_edge);
  c.max_edge = j.value("max_edge", c.max_edge);
  c.min_refs = j.value("min_refs", c.min_refs);
  c.max_refs = j.value("max_refs", c.max_refs);
  c.symmetric_prob = j.value("symmetric_prob", c.symmetric_prob);
  c.target_jitter = j.value("target_jitter", c.target_jitter);
  c.roll_jitter = j.value("roll_jitter", c.roll_jitter);
  c.min_elevation = j.value("min_elevation", c.min_elevation);
  c.max_elevation = j.value("max_elevation", c.max_elevation);
  c.cloud_points_per_face = j.value("cloud_points_per_face", c.cloud_points_per_face);
  c.cloud_noise = j.value("cloud_noise", c.cloud_noise);
  c.corner_margin = j.value("corner_margin", c.corner_margin);
}

}  // namespace boxc

namespace boxc::io {
namespace {

namespace fs = std::filesystem;

constexpr const char* kMetaHeader = "boxcorner-scene 1";

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_view(std::ostringstream& out, const View& v) {
  const auto& k = v.intrinsics;
  out << "intrinsics " << num(k.fx) << ' ' << num(k.fy) << ' ' << num(k.cx) << ' ' << num(k.cy) << ' '
      << k.width << ' ' << k.height << '\n';
  out << "pose";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out << ' ' << num(v.pose.rotation(r, c));
  for (int i = 0; i < 3; ++i) out << ' ' << num(v.pose.translation[i]);
  out << '\n';
  out << "mask " << num(v.mask_rect.x0) << ' ' << num(v.mask_rect.y0) << ' ' << num(v.mask_rect.x1) << ' '
      << num(v.mask_rect.y1) << '\n';
}

class MetaReader {
 public:
  MetaReader(const std::string& text, std::string what) : in_(text), what_(std::move(what)) {}

  void expect(const std::string& word) {
    std::string got;
    if (!(in_ >> got) || got != word) fail("expected '" + word + "'" + (got.empty() ? "" : ", found '" + got + "'"));
  }
  double number() {
    std::string tok;
    if (!(in_ >> tok)) fail("unexpected end of metadata");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail("bad number '" + tok + "'");
    return v;
  }
  long long integer() {
    const double v = number();
    if (v != static_cast<double>(static_cast<long long>(v))) fail("expected an integer");
    return static_cast<long long>(v);
  }
  void finish() {
    std::string extra;
    if (in_ >> extra) fail("unexpected trailing token '" + extra + "'");
  }
  [[noreturn]] void fail(const std::string& msg) const { throw Error(ErrorKind::Format, what_ + ": " + msg); }

  View view() {
    View v;
    expect("intrinsics");
    v.intrinsics.fx = number();
    v.intrinsics.fy = number();
    v.intrinsics.cx = number();
    v.intrinsics.cy = number();
    v.intrinsics.width = static_cast<int>(integer());
    v.intrinsics.height = static_cast<int>(integer());
    if (!v.intrinsics.is_valid()) fail("invalid intrinsics");
    expect("pose");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) v.pose.rotation(r, c) = number();
    for (int i = 0; i < 3; ++i) v.pose.translation[i] = number();
    if (!v.pose.is_valid(1e-9)) fail("pose rotation is not orthonormal with det +1");
    expect("mask");
    v.mask_rect.x0 = number();
    v.mask_rect.y0 = number();
    v.mask_rect.x1 = number();
    v.mask_rect.y1 = number();
    return v;
  }

 private:
  std::istringstream in_;
  std::string what_;
};

RawTensor image_raw(const Image& img) {
  return to_raw<std::uint8_t>({static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width), 3}, img.rgb);
}

RawTensor mask_raw(const MaskBitmap& m) {
  return to_raw<std::uint8_t>({static_cast<std::size_t>(m.height), static_cast<std::size_t>(m.width)}, m.bits);
}

Image load_image(const std::string& path, const Intrinsics& k) {
  const RawTensor raw = load_tensor(path);
  if (raw.dims.size() != 3 || raw.dims[2] != 3 || raw.dims[0] != static_cast<std::uint64_t>(k.height) ||
      raw.dims[1] != static_cast<std::uint64_t>(k.width))
    throw Error(ErrorKind::Format, path + ": image extents do not match the intrinsics");
  Image img;
  img.width = k.width;
  img.height = k.height;
  img.rgb = values_of<std::uint8_t>(raw, path);
  return img;
}

MaskBitmap load_mask(const std::string& path, const Intrinsics& k) {
  const RawTensor raw = load_tensor(path);
  if (raw.dims.size() != 2 || raw.dims[0] != static_cast<std::uint64_t>(k.height) ||
      raw.dims[1] != static_cast<std::uint64_t>(k.width))
    throw Error(ErrorKind::Format, path + ": mask extents do not match the intrinsics");
  MaskBitmap m;
  m.width = k.width;
  m.height = k.height;
  m.bits = values_of<std::uint8_t>(raw, path);
  for (auto b : m.bits)
    if (b > 1) throw Error(ErrorKind::Format, path + ": mask values must be 0 or 1");
  return m;
}

std::string ref_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ref_%02zu", i);
  return buf;
}

}  // namespace

std::string format_scene_meta(const Scene& s) {
  std::ostringstream out;
  out << kMetaHeader << '\n';
  out << "index " << s.index << '\n';
  out << "symmetric " << (s.symmetric ? 1 : 0) << '\n';
  out << "diameter " << num(s.diameter) << '\n';
  out << "box\n";
  for (const auto& c : s.box.corners) out << num(c.x()) << ' ' << num(c.y()) << ' ' << num(c.z()) << '\n';
  out << "query\n";
  write_view(out, s.query);
  out << "references " << s.references.size() << '\n';
  for (std::size_t i = 0; i < s.references.size(); ++i) {
    out << "reference " << i << '\n';
    write_view(out, s.references[i]);
  }
  return out.str();
}

Scene parse_scene_meta(const std::string& text, const std::string& what) {
  MetaReader r(text, what);
  r.expect("boxcorner-scene");
  if (r.integer() != 1) r.fail("unsupported metadata version");
  Scene s;
  r.expect("index");
  const long long idx = r.integer();
  if (idx < 0) r.fail("negative scene index");
  s.index = static_cast<std::uint64_t>(idx);
  r.expect("symmetric");
  const long long sym = r.integer();
  if (sym != 0 && sym != 1) r.fail("symmetric flag must be 0 or 1");
  s.symmetric = sym == 1;
  r.expect("diameter");
  s.diameter = r.number();
  r.expect("box");
  for (auto& c : s.box.corners) {
    c.x() = r.number();
    c.y() = r.number();
    c.z() = r.number();
  }
  r.expect("query");
  s.query = r.view();
  r.expect("references");
  const long long n = r.integer();
  if (n < 0 || n > 4096) r.fail("implausible reference count");
  for (long long i = 0; i < n; ++i) {
    r.expect("reference");
    if (r.integer() != i) r.fail("reference views out of order");
    s.references.push_back(r.view());
  }
  r.finish();
  refresh_ground_truth(s);
  return s;
}

std::string scene_dir_name(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%06llu", static_cast<unsigned long long>(index));
  return buf;
}

void save_scene(const std::string& dir, const Scene& s) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + dir + "': " + ec.message());
  const fs::path d(dir);
  write_file((d / "meta.txt").string(), format_scene_meta(s));
  save_tensor((d / "query.btns").string(), image_raw(s.query.image));
  save_tensor((d / "query_mask.btns").string(), mask_raw(s.query.silhouette));
  for (std::size_t i = 0; i < s.references.size(); ++i) {
    save_tensor((d / (ref_name(i) + ".btns")).string(), image_raw(s.references[i].image));
    save_tensor((d / (ref_name(i) + "_mask.btns")).string(), mask_raw(s.references[i].silhouette));
  }
  std::vector<double> pts;
  pts.reserve(s.cloud.size() * 3);
  for (const auto& p : s.cloud.points) pts.insert(pts.end(), {p.x(), p.y(), p.z()});
  save_tensor((d / "cloud.btns").string(), to_raw<double>({s.cloud.size(), 3}, pts));
}

Scene load_scene(const std::string& dir) {
  const fs::path d(dir);
  const std::string meta = (d / "meta.txt").string();
  Scene s = parse_scene_meta(read_file(meta), meta);
  s.query.image = load_image((d / "query.btns").string(), s.query.intrinsics);
  s.query.silhouette = load_mask((d / "query_mask.btns").string(), s.query.intrinsics);
  for (std::size_t i = 0; i < s.references.size(); ++i) {
    auto& v = s.references[i];
    v.image = load_image((d / (ref_name(i) + ".btns")).string(), v.intrinsics);
    v.silhouette = load_mask((d / (ref_name(i) + "_mask.btns")).string(), v.intrinsics);
  }
  const std::string cloud_path = (d / "cloud.btns").string();
  const RawTensor cloud = load_tensor(cloud_path);
  if (cloud.dims.size() != 2 || cloud.dims[1] != 3) throw Error(ErrorKind::Format, cloud_path + ": expected N x 3");
  const auto vals = values_of<double>(cloud, cloud_path);
  for (std::size_t i = 0; i < cloud.dims[0]; ++i) s.cloud.points.emplace_back(vals[3 * i], vals[3 * i + 1], vals[3 * i + 2]);
  for (const auto& p : s.cloud.points)
    if (!p.allFinite()) throw Error(ErrorKind::Format, cloud_path + ": non-finite point");
  validate_scene(s);
  return s;
}

void save_manifest(const std::string& dir, const DatasetManifest& m) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + dir + "': " + ec.message());
  const nlohmann::json j = {{"format", "boxcorner-dataset"}, {"version", 1},     {"seed", m.seed},
                            {"count", m.count},              {"gen", m.gen},     {"scenes", m.scenes}};
  write_file((fs::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::string& dir) {
  const std::string path = (fs::path(dir) / "manifest.json").string();
  const std::string text = read_file(path);
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "boxcorner-dataset" || j.at("version").get<int>() != 1)
      throw Error(ErrorKind::Format, path + ": not a dataset manifest");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.count = j.at("count").get<std::uint64_t>();
    j.at("gen").get_to(m.gen);
    m.scenes = j.at("scenes").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path + ": " + e.what());
  }
  if (m.scenes.size() != m.count) throw Error(ErrorKind::Format, path + ": scene list does not match count");
  return m;
}

std::vector<Scene> load_dataset(const std::string& dir) {
  const DatasetManifest m = load_manifest(dir);
  std::vector<Scene> out;
  out.reserve(m.scenes.size());
  for (const auto& name : m.scenes) {
    if (name.find('/') != std::string::npos || name.find("..") != std::string::npos)
      throw Error(ErrorKind::Format, dir + ": invalid scene directory name '" + name + "'");
    out.push_back(load_scene((fs::path(dir) / name).string()));
  }
  return out;
}

std::string encode_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  return out;
}

void save_ppm(const std::string& path, const Image& img) { write_file(path, encode_ppm(img)); }

Image decode_ppm(const std::string& bytes, const std::string& what) {
  std::istringstream in(bytes);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  if (!in || magic != "P6" || w < 1 || h < 1 || maxv != 255) throw Error(ErrorKind::Format, what + ": not a P6 pixmap");
  in.get();
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.rgb.size()) throw Error(ErrorKind::Format, what + ": truncated pixmap");
  return img;
}

}  // namespace boxc::io
