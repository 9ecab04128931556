#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcdepth/geometry.hpp"
#include "dcdepth/image.hpp"
#include "dcdepth/scene.hpp"

namespace dcdepth {

/// Malformed input file. `offset()` is the byte (or, for text formats, the
/// 1-based line) where parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  [[nodiscard]] std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Valid file in a variant this reader does not handle (e.g. maxval != 255).
class UnsupportedFormat : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- netpbm -----------------------------------------------------------------

/// Binary P6, 8 bit. Values map to [0,1] by /255.
Image load_ppm(const std::filesystem::path& path);
Image decode_ppm(const std::vector<std::uint8_t>& bytes);

/// Inverse of load_ppm: round-half-up of value*255 after clamping to [0,1].
void save_ppm(const Image& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_ppm(const Image& img);

/// Scalar map stored as binary P5, 16 bit big-endian, value*256 rounded.
/// Zero encodes "no value".
struct ScalarMap {
  Image values;        ///< single channel; invalid pixels hold 0
  ValidityMask valid;  ///< 0 where the stored code was 0
};

ScalarMap load_depth_pgm16(const std::filesystem::path& path);
ScalarMap decode_depth_pgm16(const std::vector<std::uint8_t>& bytes);

/// Throws std::out_of_range naming the first value that is negative or
/// exceeds 65535/256. Pixels with `valid[i] == 0` (when given) are written
/// as 0.
void save_depth_pgm16(const Image& values, const std::filesystem::path& path,
                      const ValidityMask* valid = nullptr);
std::vector<std::uint8_t> encode_depth_pgm16(const Image& values,
                                             const ValidityMask* valid = nullptr);

inline constexpr double kPgm16MaxValue = 65535.0 / 256.0;

// --- calibration and manifests -------------------------------------------------

struct Calibration {
  Intrinsics intrinsics;
  double baseline = 0.0;
};

/// Lines of `key=value` with keys fx, fy, cx, cy, width, height, baseline.
/// Blank lines and lines starting with '#' are ignored.
Calibration parse_calibration(const std::filesystem::path& path);
Calibration parse_calibration_text(const std::string& text);
std::string format_calibration(const Calibration& calib);

/// Calibration path followed by the images l, r, l+1, r+1; one path per line,
/// relative paths resolved against the manifest's directory.
struct Manifest {
  std::filesystem::path calibration;
  std::array<std::filesystem::path, 4> images;
};

Manifest parse_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
SceneSample load_scene(const std::filesystem::path& manifest_path);

/// Single line "tx ty tz rx ry rz".
std::string format_pose(const Pose6& pose);
Pose6 parse_pose(const std::string& text);

// --- synthetic scenes --------------------------------------------------------

/// Plane z = depth + tilt_x * x + tilt_y * y in the left camera frame,
/// optionally limited to a rectangle in (x, y).
struct PlaneSpec {
  double depth = 3.0;
  double tilt_x = 0.0;
  double tilt_y = 0.0;
  std::uint64_t texture_seed = 1;
  bool bounded = false;
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
};

struct SceneSpec {
  Intrinsics intrinsics{150.0, 150.0, 127.5, 63.5, 256, 128};
  double baseline = 0.54;
  Pose6 temporal;  ///< next left camera in the left camera frame
  std::vector<PlaneSpec> planes{PlaneSpec{}};
  double texture_frequency = 2.0;  ///< lattice cells per meter, coarsest octave
  std::uint64_t seed = 1;

  void validate() const;

  /// Single fronto-parallel plane.
  static SceneSpec fronto_parallel(double depth = 3.0);
  /// Single plane receding to the right.
  static SceneSpec slanted();
};

/// `key=value` text; see README for the keys. Unknown keys are errors.
SceneSpec parse_scene_spec(const std::filesystem::path& path);
SceneSpec parse_scene_spec_text(const std::string& text);

/// Renders l, r, l+1, r+1 by exact ray-plane intersection. Texture is a
/// seeded value noise over plane coordinates, identical in every view.
/// Ground truth holds per-view depth (0 where no plane is hit) and the exact
/// stereo and temporal poses.
SceneSample synth_scene(const SceneSpec& spec);

// --- augmentation ------------------------------------------------------------

struct AugmentParams {
  bool flip = false;
  double gamma = 1.0;
  double brightness = 1.0;
  std::array<double, 3> color{1.0, 1.0, 1.0};

  /// Draws gamma in [0.8,1.2], brightness in [0.5,2], color in [0.8,1.2];
  /// flip with probability 1/2.
  static AugmentParams random(std::mt19937_64& rng);
};

/// clamp(in^gamma * brightness * color_c, 0, 1), horizontally flipped first
/// when requested.
Image augment(const Image& img, const AugmentParams& params);

/// Applies the same parameters to all four images. A horizontal flip mirrors
/// the rig, so the left and right roles swap: the flipped right image becomes
/// the new left one and vice versa. Ground-truth depths follow the images;
/// poses are mirrored in x.
SceneSample augment_scene(const SceneSample& sample, const AugmentParams& params);

}  // namespace dcdepth
