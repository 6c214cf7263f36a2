#include "fisheyedist/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fisheyedist {

static_assert(std::endian::native == std::endian::little,
              "PFM writer assumes a little-endian host");

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) fail(path, "cannot open for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) fail(path, "cannot open for writing");
  return out;
}

json parse_json(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, std::ios::in);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(path, std::string("invalid JSON: ") + e.what());
  }
}

// netpbm token reader: skips whitespace and '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      while ((c = in.peek()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(in.get()));
      return tok;
    }
  }
  return tok;
}

int parse_dim(const std::filesystem::path& path, const std::string& tok, const char* name) {
  int value = 0;
  try {
    value = std::stoi(tok);
  } catch (const std::exception&) {
    fail(path, std::string("malformed ") + name);
  }
  if (value <= 0 || value > 1'000'000) fail(path, std::string("unreasonable ") + name);
  return value;
}

// Exactly one whitespace byte separates the header from the binary payload.
void consume_header_separator(std::istream& in, const std::filesystem::path& path) {
  const int c = in.get();
  if (c == EOF || !std::isspace(c)) fail(path, "malformed header/payload separator");
}

std::array<double, 2> json_pair(const json& j, const std::filesystem::path& path,
                                const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 2)
    fail(path, std::string("missing or malformed \"") + key + "\" (expected [a, b])");
  return {j[key][0].get<double>(), j[key][1].get<double>()};
}

Texture texture_from_json(const json& j, const std::filesystem::path& path) {
  Texture t;
  const std::string kind = j.value("kind", "constant");
  if (kind == "constant")
    t.kind = Texture::Kind::constant;
  else if (kind == "checker")
    t.kind = Texture::Kind::checker;
  else if (kind == "value_noise")
    t.kind = Texture::Kind::value_noise;
  else
    fail(path, "unknown texture kind \"" + kind + "\"");
  t.frequency = j.value("frequency", 1.0);
  t.contrast = j.value("contrast", 1.0);
  t.base = j.value("base", 0.5);
  t.octaves = j.value("octaves", 3);
  t.seed = j.value("seed", 0u);
  return t;
}

json texture_to_json(const Texture& t) {
  const char* kind = t.kind == Texture::Kind::constant
                         ? "constant"
                         : (t.kind == Texture::Kind::checker ? "checker" : "value_noise");
  return json{{"kind", kind},     {"frequency", t.frequency}, {"contrast", t.contrast},
              {"base", t.base},   {"octaves", t.octaves},     {"seed", t.seed}};
}

Point3 point_from_json(const json& j, const std::filesystem::path& path, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3)
    fail(path, std::string("missing or malformed \"") + key + "\" (expected [x, y, z])");
  return {j[key][0].get<double>(), j[key][1].get<double>(), j[key][2].get<double>()};
}

std::filesystem::path frame_path(const std::filesystem::path& dir, int index,
                                 const char* suffix) {
  char name[64];
  std::snprintf(name, sizeof(name), "frame_%03d%s", index, suffix);
  return dir / name;
}

}  // namespace

DistanceMap read_pfm(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, std::ios::binary);
  const std::string magic = pnm_token(in);
  if (magic == "PF") fail(path, "color PFM is not supported, expected grayscale \"Pf\"");
  if (magic != "Pf") fail(path, "not a PFM file (bad magic)");
  const int width = parse_dim(path, pnm_token(in), "width");
  const int height = parse_dim(path, pnm_token(in), "height");
  double scale = 0.0;
  try {
    scale = std::stod(pnm_token(in));
  } catch (const std::exception&) {
    fail(path, "malformed scale line");
  }
  if (scale >= 0.0) fail(path, "big-endian PFM (positive scale) is not supported");
  if (static_cast<long long>(width) * height > 100'000'000LL) fail(path, "dimension overflow");
  consume_header_separator(in, path);

  std::vector<float> row(static_cast<std::size_t>(width));
  DistanceMap map(width, height);
  // PFM stores rows bottom-up.
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(width) * 4);
    if (!in) fail(path, "truncated pixel data");
    for (int x = 0; x < width; ++x) {
      if (!std::isfinite(row[x])) fail(path, "non-finite sample");
      map.at(x, y) = static_cast<double>(row[x]);
    }
  }
  return map;
}

void write_pfm(const std::filesystem::path& path, const Grid& map) {
  if (map.size() == 0) throw std::invalid_argument("write_pfm: empty map");
  for (double v : map.data())
    if (!std::isfinite(v)) throw std::invalid_argument("write_pfm: non-finite sample");
  std::ofstream out = open_out(path, std::ios::binary);
  out << "Pf\n" << map.width() << " " << map.height() << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(map.width()));
  for (int y = map.height() - 1; y >= 0; --y) {
    for (int x = 0; x < map.width(); ++x) row[x] = static_cast<float>(map.at(x, y));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(map.width()) * 4);
  }
  if (!out) fail(path, "write failed");
}

Image read_image(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, std::ios::binary);
  const std::string magic = pnm_token(in);
  int channels = 0;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    fail(path, "unsupported image format (expected binary PGM \"P5\" or PPM \"P6\")");
  const int width = parse_dim(path, pnm_token(in), "width");
  const int height = parse_dim(path, pnm_token(in), "height");
  const int maxval = parse_dim(path, pnm_token(in), "maxval");
  if (maxval != 255) fail(path, "only 8-bit images (maxval 255) are supported");
  consume_header_separator(in, path);

  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) fail(path, "truncated pixel data");

  Image img(width, height, channels);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data()[i] = bytes[i] / 255.0;
  return img;
}

void write_image(const std::filesystem::path& path, const Image& image) {
  if (image.size() == 0) throw std::invalid_argument("write_image: empty image");
  std::ofstream out = open_out(path, std::ios::binary);
  out << (image.channels() == 1 ? "P5" : "P6") << "\n"
      << image.width() << " " << image.height() << "\n255\n";
  std::vector<std::uint8_t> bytes(image.data().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp(image.data()[i], 0.0, 1.0);
    bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(path, "write failed");
}

Intrinsics read_intrinsics(const std::filesystem::path& path) {
  const json j = parse_json(path);
  if (!j.contains("model") || !j["model"].is_string())
    fail(path, "missing \"model\" (\"fisheye\" or \"pinhole\")");
  const std::string model = j["model"].get<std::string>();
  const auto size = json_pair(j, path, "size");
  const auto principal = json_pair(j, path, "principal");
  const int width = static_cast<int>(size[0]);
  const int height = static_cast<int>(size[1]);

  try {
    if (model == "fisheye") {
      if (j.contains("f")) fail(path, "fisheye model must not carry a focal length \"f\"");
      if (!j.contains("k") || !j["k"].is_array() || j["k"].size() != 4)
        fail(path, "fisheye model requires \"k\": [k1, k2, k3, k4]");
      if (!j.contains("theta_max")) fail(path, "fisheye model requires \"theta_max\"");
      const auto aspect = json_pair(j, path, "aspect");
      return FisheyeIntrinsics(j["k"][0].get<double>(), j["k"][1].get<double>(),
                               j["k"][2].get<double>(), j["k"][3].get<double>(), aspect[0],
                               aspect[1], principal[0], principal[1], width, height,
                               j["theta_max"].get<double>());
    }
    if (model == "pinhole") {
      if (j.contains("k")) fail(path, "pinhole model must not carry distortion \"k\"");
      if (j.contains("theta_max")) fail(path, "pinhole model must not carry \"theta_max\"");
      const auto f = json_pair(j, path, "f");
      return PinholeIntrinsics(f[0], f[1], principal[0], principal[1], width, height);
    }
  } catch (const json::exception& e) {
    fail(path, std::string("invalid intrinsics: ") + e.what());
  } catch (const std::invalid_argument& e) {
    fail(path, std::string("invalid intrinsics: ") + e.what());
  }
  fail(path, "unknown model \"" + model + "\"");
}

void write_intrinsics(const std::filesystem::path& path, const FisheyeIntrinsics& K) {
  const json j{{"model", "fisheye"},
               {"k", {K.k1, K.k2, K.k3, K.k4}},
               {"aspect", {K.ax, K.ay}},
               {"principal", {K.cx, K.cy}},
               {"size", {K.width, K.height}},
               {"theta_max", K.theta_max}};
  open_out(path, std::ios::out) << j.dump(2) << "\n";
}

void write_intrinsics(const std::filesystem::path& path, const PinholeIntrinsics& K) {
  const json j{{"model", "pinhole"},
               {"f", {K.fx, K.fy}},
               {"principal", {K.cx, K.cy}},
               {"size", {K.width, K.height}}};
  open_out(path, std::ios::out) << j.dump(2) << "\n";
}

std::vector<OdometrySample> read_odometry(const std::filesystem::path& path) {
  const json j = parse_json(path);
  if (!j.is_array()) fail(path, "odometry must be a JSON array of {t, v}");
  std::vector<OdometrySample> samples;
  for (const json& e : j) {
    if (!e.contains("t") || !e.contains("v")) fail(path, "odometry entry needs \"t\" and \"v\"");
    samples.push_back(OdometrySample{e["v"].get<double>(), e["t"].get<double>()});
  }
  return samples;
}

void write_odometry(const std::filesystem::path& path,
                    const std::vector<OdometrySample>& samples) {
  json j = json::array();
  for (const OdometrySample& s : samples) j.push_back({{"t", s.timestamp}, {"v", s.v}});
  open_out(path, std::ios::out) << j.dump(2) << "\n";
}

std::vector<Pose> read_pose_file(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, std::ios::in);
  std::vector<Pose> poses;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    try {
      poses.push_back(parse_pose(line));
    } catch (const std::exception& e) {
      fail(path, std::string("line ") + std::to_string(poses.size() + 1) + ": " + e.what());
    }
  }
  if (poses.empty()) fail(path, "no poses found");
  return poses;
}

void write_pose_file(const std::filesystem::path& path, const std::vector<Pose>& poses) {
  std::ofstream out = open_out(path, std::ios::out);
  for (const Pose& p : poses) out << format_pose(p) << "\n";
}

Scene read_scene(const std::filesystem::path& path) {
  const json j = parse_json(path);
  Scene scene;
  if (j.contains("background")) {
    scene.background_distance = j["background"].value("distance", 100.0);
    scene.background_intensity = j["background"].value("intensity", 0.5);
  }
  for (const json& e : j.value("planes", json::array())) {
    Plane p;
    p.point = point_from_json(e, path, "point");
    p.normal = point_from_json(e, path, "normal").normalized();
    if (e.contains("half_extent")) {
      const auto he = json_pair(e, path, "half_extent");
      p.half_u = he[0];
      p.half_v = he[1];
    }
    if (e.contains("texture")) p.texture = texture_from_json(e["texture"], path);
    scene.planes.push_back(p);
  }
  for (const json& e : j.value("spheres", json::array())) {
    Sphere s;
    s.center = point_from_json(e, path, "center");
    s.radius = e.value("radius", 1.0);
    if (s.radius <= 0.0) fail(path, "sphere radius must be positive");
    if (e.contains("texture")) s.texture = texture_from_json(e["texture"], path);
    scene.spheres.push_back(s);
  }
  for (const json& e : j.value("boxes", json::array())) {
    Box b;
    b.min = point_from_json(e, path, "min");
    b.max = point_from_json(e, path, "max");
    if ((b.max - b.min).minCoeff() <= 0.0) fail(path, "box must have positive extent");
    if (e.contains("texture")) b.texture = texture_from_json(e["texture"], path);
    scene.boxes.push_back(b);
  }
  return scene;
}

void write_scene(const std::filesystem::path& path, const Scene& scene) {
  json j;
  j["background"] = {{"distance", scene.background_distance},
                     {"intensity", scene.background_intensity}};
  j["planes"] = json::array();
  for (const Plane& p : scene.planes)
    j["planes"].push_back({{"point", {p.point.x(), p.point.y(), p.point.z()}},
                           {"normal", {p.normal.x(), p.normal.y(), p.normal.z()}},
                           {"half_extent", {p.half_u, p.half_v}},
                           {"texture", texture_to_json(p.texture)}});
  j["spheres"] = json::array();
  for (const Sphere& s : scene.spheres)
    j["spheres"].push_back({{"center", {s.center.x(), s.center.y(), s.center.z()}},
                            {"radius", s.radius},
                            {"texture", texture_to_json(s.texture)}});
  j["boxes"] = json::array();
  for (const Box& b : scene.boxes)
    j["boxes"].push_back({{"min", {b.min.x(), b.min.y(), b.min.z()}},
                          {"max", {b.max.x(), b.max.y(), b.max.z()}},
                          {"texture", texture_to_json(b.texture)}});
  open_out(path, std::ios::out) << j.dump(2) << "\n";
}

SequenceSnippet read_bundle(const std::filesystem::path& dir) {
  const Intrinsics intr = read_intrinsics(dir / "intrinsics.json");
  const auto* fisheye = std::get_if<FisheyeIntrinsics>(&intr);
  if (fisheye == nullptr)
    fail(dir / "intrinsics.json", "snippet bundles require fisheye intrinsics");

  SequenceSnippet snippet(*fisheye);
  for (int i = 0;; ++i) {
    std::filesystem::path img_path = frame_path(dir, i, ".ppm");
    if (!std::filesystem::exists(img_path)) img_path = frame_path(dir, i, ".pgm");
    if (!std::filesystem::exists(img_path)) break;
    SnippetFrame frame;
    frame.image = read_image(img_path);
    if (frame.image.width() != fisheye->width || frame.image.height() != fisheye->height)
      fail(img_path, "frame size does not match intrinsics");
    const std::filesystem::path dist_path = frame_path(dir, i, "_dist.pfm");
    if (std::filesystem::exists(dist_path)) {
      DistanceMap d = read_pfm(dist_path);
      if (d.width() != fisheye->width || d.height() != fisheye->height)
        fail(dist_path, "distance map size does not match intrinsics");
      frame.gt_distance = std::move(d);
    }
    snippet.frames.push_back(std::move(frame));
  }
  if (snippet.frames.empty()) fail(dir, "no frame_###.ppm/.pgm files found");

  const std::vector<OdometrySample> odo = read_odometry(dir / "odometry.json");
  if (odo.size() != snippet.frames.size())
    fail(dir / "odometry.json", "odometry entry count does not match frame count");
  for (std::size_t i = 0; i < odo.size(); ++i) snippet.frames[i].odometry = odo[i];

  const std::filesystem::path poses_path = dir / "poses.txt";
  if (std::filesystem::exists(poses_path)) {
    const std::vector<Pose> poses = read_pose_file(poses_path);
    if (poses.size() != snippet.frames.size())
      fail(poses_path, "pose count does not match frame count");
    for (std::size_t i = 0; i < poses.size(); ++i) snippet.frames[i].cam_to_ref = poses[i];
  }
  return snippet;
}

void write_bundle(const std::filesystem::path& dir, const SequenceSnippet& snippet) {
  std::filesystem::create_directories(dir);
  write_intrinsics(dir / "intrinsics.json", snippet.intrinsics);
  std::vector<OdometrySample> odo;
  std::vector<Pose> poses;
  bool all_posed = true;
  for (int i = 0; i < snippet.count(); ++i) {
    const SnippetFrame& frame = snippet.frames[i];
    write_image(frame_path(dir, i, frame.image.channels() == 1 ? ".pgm" : ".ppm"), frame.image);
    if (frame.gt_distance) write_pfm(frame_path(dir, i, "_dist.pfm"), *frame.gt_distance);
    odo.push_back(frame.odometry);
    if (frame.cam_to_ref)
      poses.push_back(*frame.cam_to_ref);
    else
      all_posed = false;
  }
  write_odometry(dir / "odometry.json", odo);
  if (all_posed && !poses.empty()) write_pose_file(dir / "poses.txt", poses);
}

}  // namespace fisheyedist
