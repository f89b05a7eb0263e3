#include "selfmvs/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "selfmvs/cross_view.hpp"
#include "selfmvs/fusion.hpp"
#include "selfmvs/io.hpp"
#include "selfmvs/losses.hpp"
#include "selfmvs/parallel.hpp"
#include "selfmvs/refine.hpp"
#include "selfmvs/synthetic.hpp"
#include "selfmvs/view_selection.hpp"

namespace selfmvs {
namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::uint64_t seed = 0;
  int threads = 1;
};

std::vector<View> load_views(const io::DatasetLayout& layout) {
  const int n = layout.count_views();
  if (n == 0) throw IoError("no camera files under '" + layout.cams_dir().string() + "'");
  std::vector<View> views;
  for (int i = 0; i < n; ++i) {
    Image img = io::read_ppm(layout.image(i));
    Camera cam = io::read_camera(layout.camera(i), img.size());
    views.push_back({std::move(img), cam});
  }
  return views;
}

DepthMap load_depth(const fs::path& path, const Camera& cam) {
  DepthMap d = io::read_pfm(path);
  SELFMVS_CHECK(size_of(d) == cam.image_size(),
                "depth map '" + path.string() + "' does not match its camera size");
  return d;
}

ConfidenceMap load_confidence(const io::DatasetLayout& layout, int view, const Camera& cam) {
  if (!fs::exists(layout.confidence(view))) {
    return ConfidenceMap::Ones(cam.height(), cam.width());
  }
  ConfidenceMap c = io::read_pfm(layout.confidence(view)).cwiseMax(0.0).cwiseMin(1.0);
  SELFMVS_CHECK(size_of(c) == cam.image_size(), "confidence map size mismatch for view " +
                                                    std::to_string(view));
  return c;
}

ViewScoreMatrix load_scores(const io::DatasetLayout& layout, int n_views) {
  ViewScoreMatrix scores = io::read_pairs(layout.pair_file());
  SELFMVS_CHECK(scores.size() == n_views, "pair.txt lists " + std::to_string(scores.size()) +
                                              " views but the dataset has " +
                                              std::to_string(n_views));
  return scores;
}

std::vector<int> top_sources(const ViewScoreMatrix& scores, int ref, int count) {
  return select_top_k(scores, ref, std::min(count, scores.size() - 1));
}

void add_weight_flags(CLI::App* app, LossWeights* w) {
  app->add_option("--lambda-pc", w->pc, "photometric weight");
  app->add_option("--lambda-dc", w->dc, "depth-consistency weight (unpartitioned)");
  app->add_option("--lambda-dc-high", w->dc_high, "depth-consistency weight, high-quality region");
  app->add_option("--lambda-dc-low", w->dc_low, "depth-consistency weight, low-quality region");
  app->add_option("--lambda-ssim", w->ssim, "SSIM weight");
  app->add_option("--lambda-smooth", w->smooth, "smoothness weight");
}

void add_check_flags(CLI::App* app, CheckConfig* cfg) {
  app->add_option("--tau1", cfg->tau1, "confidence threshold");
  app->add_option("--tau2", cfg->tau2, "pixel re-projection threshold");
  app->add_option("--tau3", cfg->tau3, "relative depth threshold");
  app->add_option("--tau4", cfg->tau4, "minimum passing sources");
  app->add_option("--sources", cfg->n_sources, "sources checked per view (S)");
}

// ---- synth ------------------------------------------------------------------

struct SynthOptions {
  fs::path out;
  std::string scene = "plane";
  std::string rig = "translate";
  synthetic::SceneSpec spec;
  int max_sources = 10;
};

void run_synth(const SynthOptions& o, const GlobalOptions& g, std::ostream& out) {
  synthetic::SceneSpec spec = o.spec;
  spec.surface = synthetic::parse_surface(o.scene);
  if (o.rig == "translate") {
    spec.rig.kind = synthetic::RigKind::kTranslate;
  } else if (o.rig == "lookat") {
    spec.rig.kind = synthetic::RigKind::kLookAt;
  } else {
    throw ContractError("unknown rig '" + o.rig + "' (expected translate or lookat)");
  }
  spec.texture.seed = g.seed + 7;
  spec.noise_seed = g.seed + 1;
  const synthetic::Scene scene = synthetic::render(spec);
  const io::DatasetLayout layout{o.out};
  layout.create_directories();
  const int n = static_cast<int>(scene.views.size());
  for (int i = 0; i < n; ++i) {
    io::write_ppm(layout.image(i), scene.views[i].image);
    io::write_pfm(layout.depth(i), scene.depths[i]);
    io::write_pfm(layout.confidence(i), ConfidenceMap::Ones(spec.height, spec.width));
    io::write_camera(layout.camera(i), scene.views[i].camera);
  }
  const auto cams = scene.cameras();
  const ViewScoreMatrix scores = compute_view_scores(cams, scene.anchors);
  io::write_pairs(layout.pair_file(), scores, o.max_sources);
  io::write_anchors(layout.anchors_file(), scene.anchors, n);
  out << "synth: wrote " << n << " views of a " << o.scene << " scene (" << spec.height << "x"
      << spec.width << ", " << scene.anchors.size() << " anchors) to " << o.out.string() << "\n";
}

// ---- viewsel ----------------------------------------------------------------

struct ViewselOptions {
  fs::path in;
  int ref = 0;
  int k = 4;
  bool write_pairs = false;
  int max_sources = 10;
};

void run_viewsel(const ViewselOptions& o, const GlobalOptions& g, std::ostream& out) {
  const io::DatasetLayout layout{o.in};
  const std::vector<View> views = load_views(layout);
  std::vector<Camera> cams;
  for (const auto& v : views) cams.push_back(v.camera);
  const auto anchors = io::read_anchors(layout.anchors_file());
  const ViewScoreMatrix scores = compute_view_scores(cams, anchors);
  if (o.write_pairs) io::write_pairs(layout.pair_file(), scores, o.max_sources);
  const auto top = select_top_k(scores, o.ref, o.k);
  const auto sample = sample_by_score(scores, o.ref, o.k, g.seed);
  out << std::setprecision(17);
  out << "ref " << o.ref << " scores:";
  for (int j = 0; j < scores.size(); ++j) out << ' ' << scores(o.ref, j);
  out << "\ntop-k:";
  for (int v : top) out << ' ' << v;
  out << "\nsampled:";
  for (int v : sample.views) out << ' ' << v;
  if (sample.degenerate) out << " (degenerate)";
  out << "\n";
}

// ---- check ------------------------------------------------------------------

struct CheckOptions {
  fs::path in;
  CheckConfig cfg;
};

void run_check(const CheckOptions& o, std::ostream& out) {
  const io::DatasetLayout layout{o.in};
  const std::vector<View> views = load_views(layout);
  const int n = static_cast<int>(views.size());
  SELFMVS_CHECK(n >= 2, "check: at least two views required");
  const ViewScoreMatrix scores = load_scores(layout, n);
  std::vector<Camera> cams;
  DepthGallery gallery;
  for (int i = 0; i < n; ++i) {
    cams.push_back(views[i].camera);
    gallery.update(i, load_depth(layout.depth(i), views[i].camera),
                   load_confidence(layout, i, views[i].camera));
  }
  std::error_code ec;
  fs::create_directories(layout.masks_dir(), ec);
  if (ec) throw IoError("cannot create '" + layout.masks_dir().string() + "'");
  out << std::setprecision(6) << std::fixed;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto sources = top_sources(scores, i, o.cfg.n_sources);
    const QualityMask m = quality_mask(i, gallery, cams, sources, o.cfg);
    io::write_mask_pgm(layout.mask(i), m.mask);
    out << "view " << i << " avg(M) " << m.average() << "\n";
    sum += m.average();
  }
  out << "mean avg(M) " << sum / n << "\n";
}

// ---- fuse -------------------------------------------------------------------

struct FuseOptions {
  fs::path in;
  fs::path out;
  FusionConfig cfg;
};

void run_fuse(const FuseOptions& o, std::ostream& out) {
  const io::DatasetLayout layout{o.in};
  const std::vector<View> views = load_views(layout);
  const int n = static_cast<int>(views.size());
  const ViewScoreMatrix scores = load_scores(layout, n);
  std::vector<FusionView> fviews;
  for (int i = 0; i < n; ++i) {
    fviews.push_back({views[i].image, load_depth(layout.depth(i), views[i].camera),
                      load_confidence(layout, i, views[i].camera), views[i].camera,
                      top_sources(scores, i, o.cfg.geometry.n_sources)});
  }
  const PointCloud cloud = fuse(fviews, o.cfg);
  write_ply(cloud, o.out);
  out << "fuse: " << cloud.size() << " points -> " << o.out.string() << "\n";
}

// ---- refine -----------------------------------------------------------------

struct RefineOptions {
  fs::path in;
  int ref = 0;
  fs::path init;
  fs::path truth;
  double init_noise = 0.05;
  double source_noise = 0.0;
  fs::path out_depth;
  fs::path out_trace;
  std::string step_mode = "normalized";
  std::string teacher = "warp-median";
  std::vector<std::string> ablations;
  RefineConfig cfg;
};

void run_refine(RefineOptions o, const GlobalOptions& g, std::ostream& out) {
  const io::DatasetLayout layout{o.in};
  const std::vector<View> views = load_views(layout);
  const int n = static_cast<int>(views.size());
  SELFMVS_CHECK(o.ref >= 0 && o.ref < n, "refine: --ref out of range");
  RefineConfig cfg = o.cfg;
  cfg.seed = g.seed;
  if (o.step_mode == "plain") {
    cfg.step_mode = StepMode::kPlain;
  } else if (o.step_mode == "normalized") {
    cfg.step_mode = StepMode::kPixelNormalized;
  } else {
    throw ContractError("unknown --step-mode '" + o.step_mode + "'");
  }
  for (const auto& a : o.ablations) {
    if (a == "no-freeze") {
      cfg.freeze_teacher = false;
    } else if (a == "top-k-student") {
      cfg.student_policy = StudentPolicy::kTopK;
    } else if (a == "single-lambda") {
      cfg.weights.dc = 0.1;
      cfg.weights.dc_high = cfg.weights.dc_low = 0.0;
    } else {
      throw ContractError("unknown --ablation '" + a + "'");
    }
  }

  RefineProblem problem;
  problem.ref = o.ref;
  problem.views = views;
  problem.scores = load_scores(layout, n);
  for (int i = 0; i < n; ++i) {
    if (i == o.ref) continue;
    DepthMap d = load_depth(layout.depth(i), views[i].camera);
    if (o.source_noise > 0.0) d = synthetic::perturb_depth(d, o.source_noise, g.seed + 101 + i);
    problem.gallery.update(i, std::move(d), load_confidence(layout, i, views[i].camera));
  }
  const Camera& cam = views[o.ref].camera;
  DepthMap init;
  if (!o.init.empty()) {
    init = load_depth(o.init, cam);
  } else {
    init = load_depth(layout.depth(o.ref), cam);
    if (o.init_noise > 0.0) init = synthetic::perturb_depth(init, o.init_noise, g.seed + 13);
  }
  if (!o.truth.empty()) problem.truth = load_depth(o.truth, cam);

  std::unique_ptr<PseudoDepthProvider> teacher;
  if (o.teacher == "warp-median") {
    teacher = std::make_unique<WarpMedianTeacher>();
  } else if (o.teacher == "fixed") {
    teacher = std::make_unique<FixedTeacher>(load_depth(layout.depth(o.ref), cam),
                                             load_confidence(layout, o.ref, cam));
  } else {
    throw ContractError("unknown --teacher '" + o.teacher + "'");
  }

  const RefineResult result = refine_depth(init, problem, *teacher, cfg);
  const fs::path depth_path =
      o.out_depth.empty() ? layout.root / ("refined_" + io::view_name(o.ref) + ".pfm") : o.out_depth;
  const fs::path trace_path =
      o.out_trace.empty() ? layout.root / ("trace_" + io::view_name(o.ref) + ".csv") : o.out_trace;
  io::write_pfm(depth_path, result.depth);
  io::write_file(trace_path, trace_csv(result.trace));
  const auto& last = result.trace.back();
  out << std::setprecision(9);
  out << "refine: " << cfg.iterations << " iterations, final loss " << last.total;
  if (problem.truth) out << ", MAE " << depth_mae(result.depth, *problem.truth);
  out << "\n";
  out << "memory: teacher grad peak " << result.memory.teacher_grad_peak_bytes
      << " B, student grad peak " << result.memory.student_grad_peak_bytes << " B, total peak "
      << result.memory.total_peak_bytes << " B\n";
  out << "wrote " << depth_path.string() << " and " << trace_path.string() << "\n";
}

// ---- loss -------------------------------------------------------------------

struct LossOptions {
  fs::path in;
  int ref = 0;
  int n_sources = 4;
  fs::path depth;
  fs::path pseudo;
  LossWeights weights = LossWeights::baseline();
};

void run_loss(const LossOptions& o, std::ostream& out) {
  const io::DatasetLayout layout{o.in};
  const std::vector<View> views = load_views(layout);
  const int n = static_cast<int>(views.size());
  SELFMVS_CHECK(o.ref >= 0 && o.ref < n, "loss: --ref out of range");
  const ViewScoreMatrix scores = load_scores(layout, n);
  const Camera& cam = views[o.ref].camera;
  const DepthMap depth = load_depth(o.depth.empty() ? layout.depth(o.ref) : o.depth, cam);
  const DepthMap pseudo = o.pseudo.empty() ? depth : load_depth(o.pseudo, cam);
  std::vector<View> sources;
  for (int s : top_sources(scores, o.ref, o.n_sources)) sources.push_back(views[s]);
  const LossReport r =
      total_loss({views[o.ref].image, cam, sources, depth, &pseudo}, o.weights, false);
  out << std::setprecision(17);
  for (const auto& [name, term] : r.components) {
    out << name << ' ' << term.value << " weight " << term.weight << "\n";
  }
  out << "total " << r.total << "\n";
  for (const auto& f : r.flags) out << "flag " << f << "\n";
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised multi-view stereo toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--seed", g.seed, "seed for every random choice");
  app.add_option("--threads", g.threads, "worker threads for row-parallel loops")
      ->check(CLI::PositiveNumber);
  app.set_config("--config", "", "flat key=value configuration file");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "render a synthetic multi-view scene");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--scene", synth.scene, "plane | sphere | step");
  synth_cmd->add_option("--rig", synth.rig, "translate | lookat");
  synth_cmd->add_option("--views", synth.spec.rig.count, "number of cameras");
  synth_cmd->add_option("--baseline", synth.spec.rig.baseline, "camera ring radius");
  synth_cmd->add_option("--height", synth.spec.height, "image rows");
  synth_cmd->add_option("--width", synth.spec.width, "image columns");
  synth_cmd->add_option("--focal", synth.spec.focal, "focal length in pixels (0 = width)");
  synth_cmd->add_option("--channels", synth.spec.texture.channels, "1 or 3");
  synth_cmd->add_option("--period-px", synth.spec.texture.period_px, "texture period in pixels");
  synth_cmd->add_option("--plane-depth", synth.spec.plane_depth, "plane distance from view 0");
  synth_cmd->add_option("--near-depth", synth.spec.near_depth, "step scene foreground depth");
  synth_cmd->add_option("--far-depth", synth.spec.far_depth, "step scene background depth");
  synth_cmd->add_option("--noise", synth.spec.noise_sigma, "additive Gaussian image noise sigma");
  synth_cmd->add_option("--max-sources", synth.max_sources, "sources listed per view in pair.txt");

  ViewselOptions viewsel;
  auto* viewsel_cmd = app.add_subcommand("viewsel", "score views from anchors and select sources");
  viewsel_cmd->add_option("--in", viewsel.in, "dataset directory")->required();
  viewsel_cmd->add_option("--ref", viewsel.ref, "reference view");
  viewsel_cmd->add_option("--k", viewsel.k, "number of sources");
  viewsel_cmd->add_flag("--write-pairs", viewsel.write_pairs, "rewrite pair.txt");
  viewsel_cmd->add_option("--max-sources", viewsel.max_sources, "cap per view in pair.txt (0 = all)");

  CheckOptions check;
  auto* check_cmd = app.add_subcommand("check", "cross-view quality masks for every view");
  check_cmd->add_option("--in", check.in, "dataset directory")->required();
  add_check_flags(check_cmd, &check.cfg);

  FuseOptions fuse_opts;
  auto* fuse_cmd = app.add_subcommand("fuse", "fuse depth maps into a PLY point cloud");
  fuse_cmd->add_option("--in", fuse_opts.in, "dataset directory")->required();
  fuse_cmd->add_option("--out", fuse_opts.out, "output .ply")->required();
  fuse_cmd->add_option("--conf-threshold", fuse_opts.cfg.conf_threshold, "minimum confidence");
  add_check_flags(fuse_cmd, &fuse_opts.cfg.geometry);

  RefineOptions refine;
  auto* refine_cmd = app.add_subcommand("refine", "gradient-descent depth refinement");
  refine_cmd->add_option("--in", refine.in, "dataset directory")->required();
  refine_cmd->add_option("--ref", refine.ref, "reference view");
  refine_cmd->add_option("--init", refine.init, "initial depth PFM (default: perturbed depths/)");
  refine_cmd->add_option("--init-noise", refine.init_noise, "relative noise when --init is absent");
  refine_cmd->add_option("--source-noise", refine.source_noise, "relative noise on source depths");
  refine_cmd->add_option("--truth", refine.truth, "ground-truth PFM for MAE reporting");
  refine_cmd->add_option("--out-depth", refine.out_depth, "refined depth PFM (default refined_<ref>.pfm)");
  refine_cmd->add_option("--out-trace", refine.out_trace, "per-iteration CSV (default trace_<ref>.csv)");
  refine_cmd->add_option("--iterations", refine.cfg.iterations, "descent iterations");
  refine_cmd->add_option("--step", refine.cfg.step_size, "step size");
  refine_cmd->add_option("--step-mode", refine.step_mode, "plain | normalized");
  refine_cmd->add_option("--teacher-views", refine.cfg.teacher_views, "reference plus teacher sources");
  refine_cmd->add_option("--student-views", refine.cfg.student_views, "reference plus student sources");
  refine_cmd->add_option("--cadence", refine.cfg.gallery_cadence, "iterations between pseudo-depth refreshes");
  refine_cmd->add_option("--teacher", refine.teacher, "warp-median | fixed");
  refine_cmd->add_flag("--backtracking", refine.cfg.backtracking, "halve the step until the loss stops rising");
  refine_cmd->add_option("--ablation", refine.ablations, "no-freeze | top-k-student | single-lambda");
  add_weight_flags(refine_cmd, &refine.cfg.weights);
  add_check_flags(refine_cmd, &refine.cfg.check);

  LossOptions loss;
  auto* loss_cmd = app.add_subcommand("loss", "evaluate the objective for one reference view");
  loss_cmd->add_option("--in", loss.in, "dataset directory")->required();
  loss_cmd->add_option("--ref", loss.ref, "reference view");
  loss_cmd->add_option("--k", loss.n_sources, "top-k source views");
  loss_cmd->add_option("--depth", loss.depth, "depth PFM (default depths/<ref>)");
  loss_cmd->add_option("--pseudo", loss.pseudo, "pseudo-depth PFM (default: the depth itself)");
  add_weight_flags(loss_cmd, &loss.weights);

  for (auto* sub : app.get_subcommands({})) sub->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::FileError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    set_num_threads(g.threads);
    if (synth_cmd->parsed()) run_synth(synth, g, out);
    if (viewsel_cmd->parsed()) run_viewsel(viewsel, g, out);
    if (check_cmd->parsed()) run_check(check, out);
    if (fuse_cmd->parsed()) run_fuse(fuse_opts, out);
    if (refine_cmd->parsed()) run_refine(refine, g, out);
    if (loss_cmd->parsed()) run_loss(loss, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::logic_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace selfmvs
