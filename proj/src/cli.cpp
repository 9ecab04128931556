#include "dcdepth/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "dcdepth/dataio.hpp"
#include "dcdepth/evalkit.hpp"
#include "dcdepth/optim.hpp"

namespace dcdepth {

namespace fs = std::filesystem;

namespace {

/// Input or computation failure; maps to exit code 1.
class Failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// shortest text that reads back to the same double
std::string fmt17(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure("cannot write " + path.string());
  out << text;
  if (!out) throw Failure("write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure("cannot create directory " + dir.string() + ": " + ec.message());
}

// Weight overrides as "key=value" items; keys follow the loss-term names.
void apply_weights(const std::vector<std::string>& items, LossWeights& w) {
  for (const std::string& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--weights", "expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--weights", "value of '" + key + "' is not a number");
    }
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw CLI::ValidationError("--weights", "weight '" + key + "' must be non-negative");
    }
    if (key == "image") {
      w.image = value;
    } else if (key == "ds" || key == "smooth") {
      w.smooth = value;
    } else if (key == "lr" || key == "consistency") {
      w.consistency = value;
    } else if (key == "exp" || key == "explainability") {
      w.explainability = value;
    } else {
      throw CLI::ValidationError("--weights",
                                 "unknown weight '" + key + "' (image, ds, lr, exp)");
    }
  }
}

struct LossFlags {
  double alpha = LossWeights{}.alpha;
  double c1 = LossWeights{}.c1;
  double c2 = LossWeights{}.c2;
  std::vector<std::string> weights;

  void add(CLI::App* app) {
    app->add_option("--alpha", alpha, "SSIM share of the image loss")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    app->add_option("--c1", c1, "SSIM stabilizer c1")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--c2", c2, "SSIM stabilizer c2")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--weights", weights, "term weights, e.g. image=1,ds=1,lr=1,exp=1")
        ->delimiter(',');
  }

  [[nodiscard]] LossWeights resolve() const {
    LossWeights w;
    w.alpha = alpha;
    w.c1 = c1;
    w.c2 = c2;
    apply_weights(weights, w);
    w.validate();
    return w;
  }
};

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
};

constexpr std::array<const char*, 4> kViewFiles{"l", "r", "l1", "r1"};

int cmd_synth(const SynthArgs& args, std::ostream& out) {
  SceneSpec spec = args.spec.empty() ? SceneSpec::fronto_parallel() : parse_scene_spec(args.spec);
  if (args.seed) spec.seed = *args.seed;
  const SceneSample sample = synth_scene(spec);
  const fs::path dir(args.out);
  ensure_dir(dir);

  Manifest manifest;
  manifest.calibration = "calib.txt";
  write_text_file(dir / "calib.txt", format_calibration({sample.intrinsics, sample.baseline}));
  for (std::size_t v = 0; v < 4; ++v) {
    const std::string name = kViewFiles[v];
    manifest.images[v] = name + ".ppm";
    save_ppm(sample.images[v], dir / (name + ".ppm"));
    const Image& depth = sample.ground_truth->depth[v];
    ValidityMask valid(depth.pixels());
    for (std::size_t i = 0; i < depth.pixels(); ++i) valid[i] = depth.data[i] > 0.0;
    save_depth_pgm16(depth, dir / ("gt_depth_" + name + ".pgm"), &valid);
    Image disp(depth.width, depth.height, 1);
    for (std::size_t i = 0; i < depth.pixels(); ++i) {
      if (valid[i]) disp.data[i] = sample.intrinsics.fx * sample.baseline / depth.data[i];
    }
    save_depth_pgm16(disp, dir / ("gt_disp_" + name + ".pgm"), &valid);
  }
  write_text_file(dir / "gt_stereo_pose.txt", format_pose(sample.ground_truth->stereo));
  write_text_file(dir / "gt_temporal_pose.txt", format_pose(sample.ground_truth->temporal));
  const fs::path manifest_path = dir / "scene.txt";
  write_manifest(manifest, manifest_path);
  out << manifest_path.string() << "\n";
  return kExitOk;
}

// --- optimize ------------------------------------------------------------------

struct OptimizeArgs {
  std::vector<std::string> manifests;
  std::string out;
  OptimizeConfig config;
  LossFlags loss;
  std::string eval_view = "r";
  bool flip = false;
  bool augment = false;
  int jobs = 1;
  bool quiet = false;
};

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string csv = "iter,scale,lr,image,smooth,consistency,explainability,total\n";
  for (const TraceRow& r : trace) {
    csv += std::to_string(r.iteration) + "," + std::to_string(r.scale) + "," +
           fmt17(r.learning_rate) + "," + fmt17(r.loss.image) + "," + fmt17(r.loss.smooth) +
           "," + fmt17(r.loss.consistency) + "," + fmt17(r.loss.explainability) + "," +
           fmt17(r.loss.total) + "\n";
  }
  return csv;
}

void write_scene_outputs(const SceneSample& sample, const OptimizeResult& result,
                         const OptimizeArgs& args, bool flipped, const fs::path& dir) {
  const SceneParams& p = result.state.params;
  const Intrinsics& K = sample.intrinsics;
  // after a mirrored run the parameter views map back to swapped roles
  const std::array<std::size_t, 4> role =
      flipped ? std::array<std::size_t, 4>{1, 0, 3, 2} : std::array<std::size_t, 4>{0, 1, 2, 3};
  auto orient = [&](const Image& img) { return flipped ? flip_horizontal(img) : img; };

  std::array<Image, 4> disparity_px;
  for (std::size_t v = 0; v < 4; ++v) {
    Image s = orient(normalized_disparity(p.disparity_logits[role[v]], p.max_disparity));
    for (double& x : s.data) x *= K.width;
    disparity_px[v] = std::move(s);
    save_depth_pgm16(disparity_px[v], dir / (std::string("disp_") + kViewFiles[v] + ".pgm"));
  }

  const std::size_t eval = args.eval_view == "l" ? 0 : 1;
  Image depth(K.width, K.height, 1);
  ValidityMask valid(depth.pixels(), 0);
  for (std::size_t i = 0; i < depth.pixels(); ++i) {
    const double d = K.fx * sample.baseline / disparity_px[eval].data[i];
    if (d <= kPgm16MaxValue) {
      depth.data[i] = d;
      valid[i] = 1;
    }
  }
  save_depth_pgm16(depth, dir / "depth.pgm", &valid);

  Image mask(p.mask_logits.width, p.mask_logits.height, 1);
  for (std::size_t i = 0; i < mask.pixels(); ++i) mask.data[i] = sigmoid(p.mask_logits.data[i]);
  save_depth_pgm16(orient(mask), dir / "mask.pgm");

  Pose6 stereo = p.stereo, temporal = p.temporal;
  if (flipped) {
    // undo the mirror applied by augment_scene
    const auto mirror = [](const Pose6& q) { return Pose6(-q[0], q[1], q[2], q[3], -q[4], -q[5]); };
    const RigidTransform Ts = pose_to_transform(mirror(stereo));
    const RigidTransform Tt = pose_to_transform(mirror(temporal));
    stereo = transform_to_pose(Ts.inverse());
    temporal = transform_to_pose(Ts.inverse() * Tt * Ts);
  }
  write_text_file(dir / "stereo_pose.txt", format_pose(stereo));
  write_text_file(dir / "temporal_pose.txt", format_pose(temporal));
  write_text_file(dir / "loss.csv", trace_csv(result.trace));
}

std::string run_scene(const fs::path& manifest, std::size_t index, const OptimizeArgs& args,
                      const OptimizeConfig& config, const fs::path& dir) {
  SceneSample sample = load_scene(manifest);
  AugmentParams aug;
  if (args.augment) {
    std::mt19937_64 rng(config.seed + index);
    aug = AugmentParams::random(rng);
  }
  if (args.flip) aug.flip = true;
  const SceneSample input = augment_scene(sample, aug);
  ensure_dir(dir);
  const OptimizeResult result = optimize_scene(input, config);
  write_scene_outputs(sample, result, args, aug.flip, dir);
  const TraceRow* last = result.trace.empty() ? nullptr : &result.trace.back();
  std::ostringstream line;
  line << dir.string() << ": " << result.state.step << " steps";
  if (last) line << ", final loss " << fmt17(last->loss.total);
  return line.str();
}

int cmd_optimize(const OptimizeArgs& args, std::ostream& out, std::ostream& err) {
  OptimizeConfig config = args.config;
  config.weights = args.loss.resolve();
  config.validate();
  const fs::path root(args.out);
  ensure_dir(root);

  const std::size_t n = args.manifests.size();
  std::vector<std::string> lines(n);
  std::vector<std::string> errors(n);
  auto dir_for = [&](std::size_t i) {
    return n == 1 ? root : root / fs::path(args.manifests[i]).parent_path().filename();
  };
  if (n > 1) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (dir_for(i) == dir_for(j)) {
          throw Failure("manifests " + args.manifests[j] + " and " + args.manifests[i] +
                        " would share the output directory " + dir_for(i).string());
        }
      }
    }
  }

  // scenes are independent, so workers only share the next-index counter
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        lines[i] = run_scene(args.manifests[i], i, args, config, dir_for(i));
      } catch (const std::exception& e) {
        errors[i] = args.manifests[i] + ": " + e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(args.jobs, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = kExitOk;
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      err << "error: " << errors[i] << "\n";
      code = kExitFailure;
    } else if (!args.quiet) {
      out << lines[i] << "\n";
    }
  }
  return code;
}

// --- postprocess ----------------------------------------------------------------

struct PostprocessArgs {
  std::string disp;
  std::string disp_flipped;
  std::string out;
};

int cmd_postprocess(const PostprocessArgs& args, std::ostream& out) {
  const ScalarMap a = load_depth_pgm16(args.disp);
  const ScalarMap b = load_depth_pgm16(args.disp_flipped);
  if (!a.values.same_shape(b.values)) {
    throw Failure("disparity maps differ in size: " + std::to_string(a.values.width) + "x" +
                  std::to_string(a.values.height) + " vs " + std::to_string(b.values.width) +
                  "x" + std::to_string(b.values.height));
  }
  const Image merged = flip_merge(a.values, b.values);
  ValidityMask valid(merged.pixels());
  for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = a.valid[i] && b.valid[i];
  save_depth_pgm16(merged, args.out, &valid);
  out << args.out << "\n";
  return kExitOk;
}

// --- eval ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string calib;
  double cap = 80.0;
  std::string format = "text";
};

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  const ScalarMap pred = load_depth_pgm16(args.pred);
  const ScalarMap gt = load_depth_pgm16(args.gt);
  if (!pred.values.same_shape(gt.values)) throw Failure("prediction and ground truth differ in size");
  // pixels without a prediction count at the depth floor
  MetricReport report = eigen_metrics(pred.values, gt.values, gt.valid, args.cap);
  if (!args.calib.empty()) {
    const Calibration c = parse_calibration(args.calib);
    if (c.intrinsics.width != gt.values.width || c.intrinsics.height != gt.values.height) {
      throw Failure("calibration size does not match the depth maps");
    }
    Image pd(gt.values.width, gt.values.height, 1), gd = pd;
    const double f = c.intrinsics.fx * c.baseline;
    for (std::size_t i = 0; i < pd.pixels(); ++i) {
      pd.data[i] = f / std::max(pred.values.data[i], kDepthFloor);
      gd.data[i] = gt.valid[i] ? f / gt.values.data[i] : 0.0;
    }
    report.d1_all = d1_all(pd, gd, gt.valid);
  }
  if (args.format == "csv") {
    out << MetricReport::csv_header() << "\n" << report.to_csv_row() << "\n";
  } else {
    out << report.to_key_value();
  }
  return kExitOk;
}

// --- gradcheck ---------------------------------------------------------------------

struct GradcheckArgs {
  int seeds = 20;
  int size = 8;
  double threshold = 1e-4;
  double eps = GradcheckOptions{}.eps;
  LossFlags loss;
  std::string inject_sign_flip;
};

int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err) {
  const LossWeights weights = args.loss.resolve();
  if (!args.inject_sign_flip.empty() &&
      std::find(kBlockNames.begin(), kBlockNames.end(), args.inject_sign_flip) == kBlockNames.end()) {
    throw CLI::ValidationError("--inject-sign-flip", "unknown block '" + args.inject_sign_flip + "'");
  }
  GradcheckOptions options;
  options.eps = args.eps;
  options.flip_sign_of_block = args.inject_sign_flip;
  double worst = 0.0;
  int failures = 0;
  for (int seed = 0; seed < args.seeds; ++seed) {
    const GradcheckScene scene = random_gradcheck_scene(static_cast<std::uint64_t>(seed), args.size, args.size);
    const GradcheckReport report = gradcheck(scene.pyramid, 0, scene.params, weights, options);
    for (const BlockError& b : report.blocks) {
      worst = std::max(worst, b.relative_error);
      if (!(b.relative_error < args.threshold)) {
        ++failures;
        err << "FAIL seed " << seed << " block " << b.name << ": relative error "
            << b.relative_error << " (max |analytic - numeric| " << b.max_abs_error << ")\n";
      }
    }
  }
  out << (failures == 0 ? "PASS" : "FAIL") << " gradcheck: " << args.seeds
      << " seeds, worst relative error " << worst << ", threshold " << args.threshold << "\n";
  return failures == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Per-scene self-supervised stereo depth by direct optimization", "dcdepth"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  SynthArgs synth;
  CLI::App* s = app.add_subcommand("synth", "Render a synthetic textured-plane scene");
  s->add_option("--spec", synth.spec, "scene spec file (key=value); default: fronto-parallel plane")
      ;
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--seed", synth.seed, "override the spec's texture seed");

  OptimizeArgs opt;
  CLI::App* o = app.add_subcommand("optimize", "Optimize depth, poses and mask for scenes");
  o->add_option("--manifest", opt.manifests, "scene manifest (repeatable)")
      ->required()
      ;
  o->add_option("--out", opt.out, "output directory")->required();
  o->add_option("--iterations", opt.config.iterations, "Adam steps per scale")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  o->add_option("--scales", opt.config.scales, "pyramid scales")
      ->check(CLI::Range(1, 8))
      ->capture_default_str();
  o->add_option("--lr", opt.config.learning_rate, "base learning rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  o->add_option("--field-lr-scale", opt.config.field_lr_scale,
                "step multiplier for disparity and mask fields")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  o->add_option("--dmax", opt.config.max_disparity, "maximum disparity, fraction of width")
      ->check(CLI::Range(1e-6, 1.0))
      ->capture_default_str();
  o->add_option("--seed", opt.config.seed, "seed for --augment")->capture_default_str();
  o->add_flag("--deterministic,!--no-deterministic", opt.config.deterministic,
              "fixed summation order (always on; accepted for scripts)");
  o->add_flag("--freeze-stereo-pose,!--free-stereo-pose", opt.config.freeze_stereo_pose,
              "keep the stereo pose at the calibrated baseline (default on)");
  o->add_option("--jobs", opt.jobs, "scenes optimized in parallel")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  o->add_option("--eval-view", opt.eval_view, "disparity map written as depth.pgm")
      ->check(CLI::IsMember({"r", "l"}))
      ->capture_default_str();
  o->add_flag("--flip", opt.flip, "optimize the mirrored scene and map results back");
  o->add_flag("--augment", opt.augment, "apply random photometric augmentation drawn from --seed");
  o->add_flag("--quiet", opt.quiet, "no per-scene summary");
  opt.loss.add(o);

  PostprocessArgs post;
  CLI::App* p = app.add_subcommand("postprocess", "Merge a disparity map with its flipped-input twin");
  p->add_option("--disp", post.disp, "disparity PGM")->required();
  p->add_option("--disp-flipped", post.disp_flipped, "disparity PGM from the mirrored input")
      ->required()
      ;
  p->add_option("--out", post.out, "merged disparity PGM")->required();

  EvalArgs ev;
  CLI::App* e = app.add_subcommand("eval", "Depth error metrics against ground truth");
  e->add_option("--pred", ev.pred, "predicted depth PGM")->required();
  e->add_option("--gt", ev.gt, "ground-truth depth PGM")->required();
  e->add_option("--calib", ev.calib, "calibration; enables D1-all");
  e->add_option("--cap", ev.cap, "depth cap in meters")
      ->check(CLI::IsMember({50.0, 80.0}))
      ->capture_default_str();
  e->add_option("--format", ev.format, "report format")
      ->check(CLI::IsMember({"text", "csv"}))
      ->capture_default_str();

  GradcheckArgs gc;
  CLI::App* g = app.add_subcommand("gradcheck", "Finite-difference check of all loss gradients");
  g->add_option("--seeds", gc.seeds, "random scenes")->check(CLI::PositiveNumber)->capture_default_str();
  g->add_option("--size", gc.size, "scene width and height")->check(CLI::Range(4, 64))->capture_default_str();
  g->add_option("--threshold", gc.threshold, "max relative error")->check(CLI::PositiveNumber)->capture_default_str();
  g->add_option("--eps", gc.eps, "finite-difference step")->check(CLI::PositiveNumber)->capture_default_str();
  g->add_option("--inject-sign-flip", gc.inject_sign_flip)->group("");
  gc.loss.add(g);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (o->parsed()) return cmd_optimize(opt, out, err);
    if (p->parsed()) return cmd_postprocess(post, out);
    if (e->parsed()) return cmd_eval(ev, out);
    if (g->parsed()) return cmd_gradcheck(gc, out, err);
  } catch (const CLI::ValidationError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace dcdepth
