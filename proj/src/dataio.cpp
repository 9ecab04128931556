#include "dcdepth/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <sstream>

namespace dcdepth {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

bool is_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Netpbm header reader: magic, then whitespace/comment separated integers,
// then exactly one whitespace byte before the raster.
class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void expect_magic(const char* magic) {
    if (bytes_.size() < 2 || bytes_[0] != magic[0] || bytes_[1] != magic[1]) {
      throw ParseError(std::string("bad magic number, expected ") + magic, 0);
    }
    pos_ = 2;
  }

  long next_int(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) throw ParseError(std::string(what) + " too large", start);
      ++pos_;
    }
    if (pos_ == start) {
      throw ParseError(std::string("expected ") + what, start);
    }
    if (pos_ < bytes_.size() && !is_space(bytes_[pos_]) && bytes_[pos_] != '#') {
      throw ParseError(std::string("malformed ") + what, pos_);
    }
    return value;
  }

  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) {
      throw ParseError("missing whitespace before raster", pos_);
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::string header(const char* magic, int w, int h, int maxval) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) +
         "\n" + std::to_string(maxval) + "\n";
}

}  // namespace

// --- netpbm -----------------------------------------------------------------

Image decode_ppm(const std::vector<std::uint8_t>& bytes) {
  HeaderReader hdr(bytes);
  hdr.expect_magic("P6");
  const long w = hdr.next_int("width");
  const long h = hdr.next_int("height");
  const long maxval = hdr.next_int("maxval");
  if (w < 1 || h < 1) throw ParseError("image dimensions must be positive", 2);
  if (maxval != 255) {
    throw UnsupportedFormat("PPM maxval " + std::to_string(maxval) +
                            " is not supported (only 255)");
  }
  const std::size_t start = hdr.raster_start();
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - start < need) {
    throw ParseError("truncated PPM raster: expected " + std::to_string(need) +
                         " bytes, found " + std::to_string(bytes.size() - start),
                     bytes.size());
  }
  Image img(static_cast<int>(w), static_cast<int>(h), 3);
  for (std::size_t i = 0; i < need; ++i) img.data[i] = bytes[start + i] / 255.0;
  return img;
}

Image load_ppm(const fs::path& path) { return decode_ppm(read_file(path)); }

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  if (img.channels != 3 && img.channels != 1) {
    throw std::invalid_argument("encode_ppm: need 1 or 3 channels");
  }
  const std::string hdr = header("P6", img.width, img.height, 255);
  std::vector<std::uint8_t> out(hdr.begin(), hdr.end());
  out.reserve(out.size() + img.pixels() * 3);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    for (int c = 0; c < 3; ++c) {
      const double v = img.data[p * img.channels + (img.channels == 3 ? c : 0)];
      const double clamped = std::clamp(v, 0.0, 1.0);
      out.push_back(static_cast<std::uint8_t>(std::floor(clamped * 255.0 + 0.5)));
    }
  }
  return out;
}

void save_ppm(const Image& img, const fs::path& path) { write_file(path, encode_ppm(img)); }

ScalarMap decode_depth_pgm16(const std::vector<std::uint8_t>& bytes) {
  HeaderReader hdr(bytes);
  hdr.expect_magic("P5");
  const long w = hdr.next_int("width");
  const long h = hdr.next_int("height");
  const long maxval = hdr.next_int("maxval");
  if (w < 1 || h < 1) throw ParseError("image dimensions must be positive", 2);
  if (maxval != 65535) {
    throw UnsupportedFormat("PGM maxval " + std::to_string(maxval) +
                            " is not supported (only 16-bit, 65535)");
  }
  const std::size_t start = hdr.raster_start();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() - start < 2 * n) {
    throw ParseError("truncated PGM raster: expected " + std::to_string(2 * n) +
                         " bytes, found " + std::to_string(bytes.size() - start),
                     bytes.size());
  }
  ScalarMap out;
  out.values = Image(static_cast<int>(w), static_cast<int>(h), 1);
  out.valid.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned code = (static_cast<unsigned>(bytes[start + 2 * i]) << 8) |
                          bytes[start + 2 * i + 1];
    out.values.data[i] = code / 256.0;
    out.valid[i] = code != 0;
  }
  return out;
}

ScalarMap load_depth_pgm16(const fs::path& path) {
  return decode_depth_pgm16(read_file(path));
}

std::vector<std::uint8_t> encode_depth_pgm16(const Image& values, const ValidityMask* valid) {
  if (values.channels != 1) throw std::invalid_argument("encode_depth_pgm16: need one channel");
  if (valid != nullptr && valid->size() != values.pixels()) {
    throw std::invalid_argument("encode_depth_pgm16: validity mask size mismatch");
  }
  const std::string hdr = header("P5", values.width, values.height, 65535);
  std::vector<std::uint8_t> out(hdr.begin(), hdr.end());
  out.reserve(out.size() + values.pixels() * 2);
  for (std::size_t i = 0; i < values.pixels(); ++i) {
    unsigned code = 0;
    if (valid == nullptr || (*valid)[i]) {
      const double v = values.data[i];
      if (!(v >= 0.0) || v * 256.0 > 65535.0) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "encode_depth_pgm16: value " << v << " at pixel " << i
            << " outside [0, " << kPgm16MaxValue << "]";
        throw std::out_of_range(msg.str());
      }
      code = static_cast<unsigned>(std::floor(v * 256.0 + 0.5));
    }
    out.push_back(static_cast<std::uint8_t>(code >> 8));
    out.push_back(static_cast<std::uint8_t>(code & 0xff));
  }
  return out;
}

void save_depth_pgm16(const Image& values, const fs::path& path, const ValidityMask* valid) {
  write_file(path, encode_depth_pgm16(values, valid));
}

// --- key=value text ------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct KeyValue {
  std::string value;
  std::size_t line;
};

// Ordered multimap of key -> values, keeping line numbers for errors.
std::multimap<std::string, KeyValue> parse_key_values(const std::string& text) {
  std::multimap<std::string, KeyValue> out;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line);
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line);
    out.emplace(key, KeyValue{trim(s.substr(eq + 1)), line});
  }
  return out;
}

double to_double(const std::string& key, const KeyValue& kv) {
  double v = 0.0;
  const char* first = kv.value.data();
  const char* last = first + kv.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || kv.value.empty() || !std::isfinite(v)) {
    throw ParseError("value of '" + key + "' is not a number: '" + kv.value + "'", kv.line);
  }
  return v;
}

std::vector<double> to_doubles(const std::string& key, const KeyValue& kv) {
  std::vector<double> out;
  std::istringstream in(kv.value);
  std::string tok;
  while (in >> tok) out.push_back(to_double(key, KeyValue{tok, kv.line}));
  return out;
}

int to_int(const std::string& key, const KeyValue& kv) {
  const double v = to_double(key, kv);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw ParseError("value of '" + key + "' is not an integer", kv.line);
  }
  return static_cast<int>(v);
}

const KeyValue& single(const std::multimap<std::string, KeyValue>& kv, const std::string& key) {
  const auto count = kv.count(key);
  if (count == 0) throw std::invalid_argument("missing key '" + key + "'");
  if (count > 1) throw ParseError("duplicate key '" + key + "'", kv.find(key)->second.line);
  return kv.find(key)->second;
}

void reject_unknown(const std::multimap<std::string, KeyValue>& kv,
                    std::initializer_list<const char*> known) {
  for (const auto& [key, value] : kv) {
    const bool ok = std::any_of(known.begin(), known.end(),
                                [&](const char* k) { return key == k; });
    if (!ok) throw ParseError("unknown key '" + key + "'", value.line);
  }
}

// shortest text that reads back to the same double
std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

}  // namespace

Calibration parse_calibration_text(const std::string& text) {
  const auto kv = parse_key_values(text);
  reject_unknown(kv, {"fx", "fy", "cx", "cy", "width", "height", "baseline"});
  Calibration c;
  c.intrinsics.fx = to_double("fx", single(kv, "fx"));
  c.intrinsics.fy = to_double("fy", single(kv, "fy"));
  c.intrinsics.cx = to_double("cx", single(kv, "cx"));
  c.intrinsics.cy = to_double("cy", single(kv, "cy"));
  c.intrinsics.width = to_int("width", single(kv, "width"));
  c.intrinsics.height = to_int("height", single(kv, "height"));
  c.baseline = to_double("baseline", single(kv, "baseline"));
  c.intrinsics.validate();
  if (!(c.baseline > 0.0)) throw std::invalid_argument("calibration: baseline must be positive");
  return c;
}

Calibration parse_calibration(const fs::path& path) {
  try {
    return parse_calibration_text(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string format_calibration(const Calibration& c) {
  std::ostringstream out;
  out << "fx=" << fmt(c.intrinsics.fx) << "\n"
      << "fy=" << fmt(c.intrinsics.fy) << "\n"
      << "cx=" << fmt(c.intrinsics.cx) << "\n"
      << "cy=" << fmt(c.intrinsics.cy) << "\n"
      << "width=" << c.intrinsics.width << "\n"
      << "height=" << c.intrinsics.height << "\n"
      << "baseline=" << fmt(c.baseline) << "\n";
  return out.str();
}

Manifest parse_manifest(const fs::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::vector<fs::path> entries;
  std::string raw;
  std::size_t line = 0;
  const fs::path base = path.parent_path();
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (entries.size() == 5) throw ParseError(path.string() + ": more than five entries", line);
    const fs::path p(s);
    entries.push_back(p.is_absolute() ? p : base / p);
  }
  if (entries.size() != 5) {
    throw ParseError(path.string() + ": expected calibration plus four image paths, found " +
                         std::to_string(entries.size()) + " entries",
                     line);
  }
  Manifest m;
  m.calibration = entries[0];
  for (std::size_t v = 0; v < 4; ++v) m.images[v] = entries[v + 1];
  return m;
}

void write_manifest(const Manifest& m, const fs::path& path) {
  std::ostringstream out;
  out << "# calibration, then images l r l+1 r+1\n" << m.calibration.generic_string() << "\n";
  for (const auto& p : m.images) out << p.generic_string() << "\n";
  write_text(path, out.str());
}

SceneSample load_scene(const fs::path& manifest_path) {
  const Manifest m = parse_manifest(manifest_path);
  const Calibration calib = parse_calibration(m.calibration);
  SceneSample s;
  s.intrinsics = calib.intrinsics;
  s.baseline = calib.baseline;
  for (std::size_t v = 0; v < 4; ++v) s.images[v] = load_ppm(m.images[v]);
  s.validate();
  return s;
}

std::string format_pose(const Pose6& pose) {
  std::string out;
  for (int i = 0; i < 6; ++i) {
    if (i) out += ' ';
    out += fmt(pose[i]);
  }
  return out + "\n";
}

Pose6 parse_pose(const std::string& text) {
  const std::vector<double> v = to_doubles("pose", KeyValue{trim(text), 1});
  if (v.size() != 6) {
    throw ParseError("pose needs 6 numbers, found " + std::to_string(v.size()), 1);
  }
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

// --- synthetic scenes --------------------------------------------------------

void SceneSpec::validate() const {
  intrinsics.validate();
  if (!(baseline > 0.0)) throw std::invalid_argument("scene spec: baseline must be positive");
  if (planes.empty()) throw std::invalid_argument("scene spec: at least one plane required");
  if (!(texture_frequency > 0.0)) {
    throw std::invalid_argument("scene spec: texture_frequency must be positive");
  }
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const PlaneSpec& p = planes[i];
    if (!(p.depth > 0.0)) {
      throw std::invalid_argument("scene spec: plane " + std::to_string(i) +
                                  " lies behind the camera (depth " + fmt(p.depth) + ")");
    }
    if (p.bounded && !(p.x_min < p.x_max && p.y_min < p.y_max)) {
      throw std::invalid_argument("scene spec: plane " + std::to_string(i) +
                                  " has an empty extent");
    }
  }
}

SceneSpec SceneSpec::fronto_parallel(double depth) {
  SceneSpec s;
  s.planes = {PlaneSpec{depth, 0.0, 0.0, 1}};
  return s;
}

SceneSpec SceneSpec::slanted() {
  SceneSpec s;
  // depth grows from ~2.6 m on the left edge to ~3.6 m on the right edge
  s.planes = {PlaneSpec{3.0, 0.2, 0.0, 2}};
  return s;
}

SceneSpec parse_scene_spec_text(const std::string& text) {
  const auto kv = parse_key_values(text);
  reject_unknown(kv, {"fx", "fy", "cx", "cy", "width", "height", "baseline", "temporal",
                      "plane", "texture_frequency", "seed"});
  SceneSpec s;
  auto opt = [&](const char* key, auto setter) {
    if (kv.count(key)) setter(single(kv, key));
  };
  opt("fx", [&](const KeyValue& v) { s.intrinsics.fx = to_double("fx", v); });
  opt("fy", [&](const KeyValue& v) { s.intrinsics.fy = to_double("fy", v); });
  opt("cx", [&](const KeyValue& v) { s.intrinsics.cx = to_double("cx", v); });
  opt("cy", [&](const KeyValue& v) { s.intrinsics.cy = to_double("cy", v); });
  opt("width", [&](const KeyValue& v) { s.intrinsics.width = to_int("width", v); });
  opt("height", [&](const KeyValue& v) { s.intrinsics.height = to_int("height", v); });
  opt("baseline", [&](const KeyValue& v) { s.baseline = to_double("baseline", v); });
  opt("texture_frequency",
      [&](const KeyValue& v) { s.texture_frequency = to_double("texture_frequency", v); });
  opt("seed", [&](const KeyValue& v) {
    const int seed = to_int("seed", v);
    if (seed < 0) throw ParseError("seed must be non-negative", v.line);
    s.seed = static_cast<std::uint64_t>(seed);
  });
  opt("temporal", [&](const KeyValue& v) {
    const auto p = to_doubles("temporal", v);
    if (p.size() != 6) throw ParseError("temporal needs 6 numbers", v.line);
    s.temporal = Pose6(p[0], p[1], p[2], p[3], p[4], p[5]);
  });
  if (kv.count("plane")) {
    s.planes.clear();
    for (auto [it, end] = kv.equal_range("plane"); it != end; ++it) {
      const auto p = to_doubles("plane", it->second);
      if (p.size() != 4 && p.size() != 8) {
        throw ParseError("plane needs 'depth tilt_x tilt_y texture_seed [x_min x_max y_min y_max]'",
                         it->second.line);
      }
      PlaneSpec plane;
      plane.depth = p[0];
      plane.tilt_x = p[1];
      plane.tilt_y = p[2];
      if (p[3] < 0 || p[3] != std::floor(p[3])) {
        throw ParseError("plane texture seed must be a non-negative integer", it->second.line);
      }
      plane.texture_seed = static_cast<std::uint64_t>(p[3]);
      if (p.size() == 8) {
        plane.bounded = true;
        plane.x_min = p[4];
        plane.x_max = p[5];
        plane.y_min = p[6];
        plane.y_max = p[7];
      }
      s.planes.push_back(plane);
    }
    // multimap keeps insertion order for equal keys, i.e. file order
  }
  s.validate();
  return s;
}

SceneSpec parse_scene_spec(const fs::path& path) {
  try {
    return parse_scene_spec_text(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
  const std::uint64_t h = mix(seed ^ mix(static_cast<std::uint64_t>(ix) ^
                                         mix(static_cast<std::uint64_t>(iy))));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double value_noise(std::uint64_t seed, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
  const double tx = fade(x - fx), ty = fade(y - fy);
  const double a = lattice(seed, ix, iy), b = lattice(seed, ix + 1, iy);
  const double c = lattice(seed, ix, iy + 1), d = lattice(seed, ix + 1, iy + 1);
  const double top = a + tx * (b - a);
  const double bottom = c + tx * (d - c);
  return top + ty * (bottom - top);
}

// three octaves, result in [0.1, 0.9]
double texture(std::uint64_t seed, double frequency, double x, double y) {
  double sum = 0.0, norm = 0.0, amp = 1.0, f = frequency;
  for (int octave = 0; octave < 3; ++octave) {
    sum += amp * value_noise(mix(seed + static_cast<std::uint64_t>(octave)), x * f, y * f);
    norm += amp;
    amp *= 0.5;
    f *= 2.0;
  }
  return 0.1 + 0.8 * (sum / norm);
}

}  // namespace

SceneSample synth_scene(const SceneSpec& spec) {
  spec.validate();
  const Intrinsics& K = spec.intrinsics;
  const Pose6 stereo(spec.baseline, 0, 0, 0, 0, 0);
  const RigidTransform T_stereo = pose_to_transform(stereo);
  const RigidTransform T_temporal = pose_to_transform(spec.temporal);
  const std::array<RigidTransform, 4> cameras{RigidTransform{}, T_stereo, T_temporal,
                                              T_temporal * T_stereo};

  SceneSample sample;
  sample.intrinsics = K;
  sample.baseline = spec.baseline;
  GroundTruth gt;
  gt.stereo = stereo;
  gt.temporal = spec.temporal;

  for (std::size_t view = 0; view < 4; ++view) {
    const Eigen::Matrix3d R = cameras[view].rotation();
    const Eigen::Vector3d origin = cameras[view].translation();
    Image img(K.width, K.height, 3);
    Image depth(K.width, K.height, 1);
    for (int v = 0; v < K.height; ++v) {
      for (int u = 0; u < K.width; ++u) {
        const Eigen::Vector3d ray_cam((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
        const Eigen::Vector3d ray = R * ray_cam;
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_plane = 0;
        for (std::size_t k = 0; k < spec.planes.size(); ++k) {
          const PlaneSpec& p = spec.planes[k];
          const Eigen::Vector3d normal(-p.tilt_x, -p.tilt_y, 1.0);
          const double denom = normal.dot(ray);
          if (std::abs(denom) < 1e-12) continue;
          // ray_cam has unit z, so the ray parameter is the camera z-depth
          const double lambda = (p.depth - normal.dot(origin)) / denom;
          if (!(lambda > 0.0) || lambda >= best) continue;
          if (p.bounded) {
            const Eigen::Vector3d hit = origin + lambda * ray;
            if (hit.x() < p.x_min || hit.x() > p.x_max || hit.y() < p.y_min ||
                hit.y() > p.y_max) {
              continue;
            }
          }
          best = lambda;
          best_plane = k;
        }
        if (!std::isfinite(best)) continue;
        const Eigen::Vector3d hit = origin + best * ray;
        const std::uint64_t seed = mix(spec.seed ^ mix(spec.planes[best_plane].texture_seed));
        for (int c = 0; c < 3; ++c) {
          img.at(u, v, c) = texture(mix(seed + static_cast<std::uint64_t>(c)),
                                    spec.texture_frequency, hit.x(), hit.y());
        }
        depth.at(u, v) = best;
      }
    }
    sample.images[view] = std::move(img);
    gt.depth[view] = std::move(depth);
  }
  sample.ground_truth = std::move(gt);
  return sample;
}

// --- augmentation ------------------------------------------------------------

AugmentParams AugmentParams::random(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  AugmentParams p;
  p.flip = unit(rng) < 0.5;
  p.gamma = in(0.8, 1.2);
  p.brightness = in(0.5, 2.0);
  for (double& c : p.color) c = in(0.8, 1.2);
  return p;
}

Image augment(const Image& img, const AugmentParams& params) {
  Image out = params.flip ? flip_horizontal(img) : img;
  const bool identity = params.gamma == 1.0 && params.brightness == 1.0 &&
                        params.color == std::array<double, 3>{1.0, 1.0, 1.0};
  if (identity) return out;
  for (std::size_t p = 0; p < out.pixels(); ++p) {
    for (int c = 0; c < out.channels; ++c) {
      double& v = out.data[p * out.channels + c];
      const double color = params.color[static_cast<std::size_t>(out.channels == 3 ? c : 0)];
      v = std::clamp(std::pow(v, params.gamma) * params.brightness * color, 0.0, 1.0);
    }
  }
  return out;
}

namespace {

// conjugation by the reflection x -> -x
Pose6 mirror_x(const Pose6& p) { return {-p[0], p[1], p[2], p[3], -p[4], -p[5]}; }

}  // namespace

SceneSample augment_scene(const SceneSample& sample, const AugmentParams& params) {
  SceneSample out = sample;
  const auto L = static_cast<std::size_t>(idx(View::kLeft));
  const auto R = static_cast<std::size_t>(idx(View::kRight));
  const auto L1 = static_cast<std::size_t>(idx(View::kNextLeft));
  const auto R1 = static_cast<std::size_t>(idx(View::kNextRight));
  // a mirrored right camera becomes the new left one
  const std::array<std::size_t, 4> source =
      params.flip ? std::array<std::size_t, 4>{R, L, R1, L1}
                  : std::array<std::size_t, 4>{L, R, L1, R1};
  for (std::size_t v = 0; v < 4; ++v) out.images[v] = augment(sample.images[source[v]], params);
  if (params.flip) {
    out.intrinsics.cx = sample.intrinsics.width - 1 - sample.intrinsics.cx;
  }

  if (sample.ground_truth && params.flip) {
    const GroundTruth& gt = *sample.ground_truth;
    GroundTruth flipped;
    for (std::size_t v = 0; v < 4; ++v) flipped.depth[v] = flip_horizontal(gt.depth[source[v]]);
    const RigidTransform Ts = pose_to_transform(gt.stereo);
    const RigidTransform Tt = pose_to_transform(gt.temporal);
    // new left camera = old right camera: its motion is Ts^-1 Tt Ts
    flipped.temporal = mirror_x(transform_to_pose(Ts.inverse() * Tt * Ts));
    flipped.stereo = mirror_x(transform_to_pose(Ts.inverse()));
    out.ground_truth = std::move(flipped);
  }
  return out;
}

}  // namespace dcdepth
