#include "selfmvs/refine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace selfmvs {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<View> gather(std::span<const View> views, std::span<const int> ids) {
  std::vector<View> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(views[id]);
  return out;
}

// Check sources: the best-scored views that have a gallery entry.
std::vector<int> check_sources(const RefineProblem& p, const DepthGallery& gallery, int count) {
  std::vector<int> ranked = select_top_k(p.scores, p.ref, p.scores.size() - 1);
  std::vector<int> out;
  for (int v : ranked) {
    if (static_cast<int>(out.size()) == count) break;
    if (gallery.contains(v)) out.push_back(v);
  }
  return out;
}

void apply_step(DepthMap& depth, const Grid<double>& grad, double step, StepMode mode,
                const DepthRange& range) {
  double scale = step;
  if (mode == StepMode::kPixelNormalized) {
    scale *= static_cast<double>(depth_validity(depth).count());
  }
  for (Eigen::Index k = 0; k < depth.size(); ++k) {
    double& d = depth.data()[k];
    if (!is_valid_depth(d)) continue;
    d = std::clamp(d - scale * grad.data()[k], range.min, range.max);
  }
}

}  // namespace

void RefineConfig::validate() const {
  SELFMVS_CHECK(iterations >= 1, "refine: iterations must be >= 1");
  SELFMVS_CHECK(std::isfinite(step_size) && step_size > 0.0, "refine: step size must be > 0");
  SELFMVS_CHECK(teacher_views >= 2 && student_views >= 2,
                "refine: teacher and student need at least one source view");
  SELFMVS_CHECK(gallery_cadence >= 1, "refine: gallery cadence must be >= 1");
  weights.validate();
}

PseudoDepth WarpMedianTeacher::infer(const TeacherInput& in) const {
  const Camera& cam_ref = in.views[in.ref].camera;
  const int H = cam_ref.height();
  const int W = cam_ref.width();
  std::vector<ReprojectionErrors> hops;
  for (int s : in.sources) {
    hops.push_back(reprojection_errors(in.current, in.gallery.get(s)->depth, cam_ref,
                                       in.views[s].camera));
  }
  PseudoDepth out{in.current, ConfidenceMap::Zero(H, W)};
  std::vector<double> candidates;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (!is_valid_depth(in.current(r, c))) continue;
      candidates.clear();
      for (const auto& h : hops) {
        if (h.defined(r, c)) candidates.push_back(h.reprojected_depth(r, c));
      }
      if (candidates.empty()) continue;
      std::sort(candidates.begin(), candidates.end());
      const std::size_t m = candidates.size();
      const double median =
          m % 2 == 1 ? candidates[m / 2] : 0.5 * (candidates[m / 2 - 1] + candidates[m / 2]);
      int agree = 0;
      for (double v : candidates) {
        if (std::abs(v - median) <= agree_tol_ * median) ++agree;
      }
      out.depth(r, c) = median;
      out.confidence(r, c) = static_cast<double>(agree) / static_cast<double>(hops.size());
    }
  }
  return out;
}

RefineResult refine_depth(const DepthMap& init, const RefineProblem& problem,
                          const PseudoDepthProvider& teacher, const RefineConfig& cfg) {
  cfg.validate();
  const int n_views = static_cast<int>(problem.views.size());
  SELFMVS_CHECK(problem.ref >= 0 && problem.ref < n_views, "refine: reference view out of range");
  SELFMVS_CHECK(problem.scores.size() == n_views, "refine: score matrix does not match views");
  const View& ref_view = problem.views[problem.ref];
  SELFMVS_CHECK(size_of(init) == ref_view.camera.image_size(),
                "refine: initial depth does not match the reference camera");
  SELFMVS_CHECK(cfg.teacher_views - 1 <= n_views - 1 && cfg.student_views - 1 <= n_views - 1,
                "refine: more views requested than the scene provides");

  std::vector<Camera> cams;
  for (const auto& v : problem.views) cams.push_back(v.camera);

  const bool partitioned = cfg.weights.dc_high > 0.0 || cfg.weights.dc_low > 0.0;
  const bool needs_pseudo = cfg.weights.dc > 0.0 || partitioned;

  DepthGallery gallery = problem.gallery;
  memory::Probe probe;
  RefineResult result;
  result.depth = init;
  DepthMap& depth = result.depth;
  double step = cfg.step_size;

  const std::vector<int> teacher_sources =
      select_top_k(problem.scores, problem.ref, cfg.teacher_views - 1);
  std::vector<int> mask_sources;
  if (partitioned) {
    const int S = std::min(cfg.check.n_sources, n_views - 1);
    mask_sources = check_sources(problem, gallery, S);
  }

  for (int it = 0; it < cfg.iterations; ++it) {
    IterationLog log;
    log.iteration = it;
    log.teacher_views = teacher_sources;

    // Teacher branch.
    std::optional<LossReport> teacher_report;
    std::optional<memory::TrackedBytes> pseudo_bytes;
    {
      memory::BranchScope scope(&probe, memory::Branch::kTeacher);
      if (needs_pseudo && it % cfg.gallery_cadence == 0) {
        PseudoDepth pseudo =
            teacher.infer({problem.ref, teacher_sources, depth, problem.views, gallery});
        pseudo_bytes.emplace(memory::BufferKind::kForward,
                             static_cast<std::size_t>(pseudo.depth.size() +
                                                      pseudo.confidence.size()) *
                                 sizeof(double));
        gallery.update(problem.ref, std::move(pseudo.depth), std::move(pseudo.confidence));
      }
      if (!cfg.freeze_teacher) {
        const std::vector<View> tviews = gather(problem.views, teacher_sources);
        LossWeights tw = cfg.weights;
        tw.dc = tw.dc_high = tw.dc_low = 0.0;
        teacher_report = total_loss({ref_view.image, ref_view.camera, tviews, depth}, tw, true);
      }
    }

    std::shared_ptr<const GalleryEntry> pseudo;
    if (needs_pseudo) pseudo = gallery.get(problem.ref);
    std::optional<QualityMask> qmask;
    if (partitioned) {
      qmask = quality_mask(problem.ref, gallery, cams, mask_sources, cfg.check);
      log.mask_ratio = qmask->average();
    }

    // Student branch.
    memory::BranchScope scope(&probe, memory::Branch::kStudent);
    std::vector<int> student_sources;
    if (cfg.student_policy == StudentPolicy::kTopK) {
      student_sources = select_top_k(problem.scores, problem.ref, cfg.student_views - 1);
    } else {
      student_sources = sample_by_score(problem.scores, problem.ref, cfg.student_views - 1,
                                        splitmix64(cfg.seed * 0x100000001b3ULL + it))
                            .views;
    }
    log.student_views = student_sources;
    const std::vector<View> sviews = gather(problem.views, student_sources);
    const LossInputs inputs{ref_view.image, ref_view.camera, sviews, depth,
                            pseudo ? &pseudo->depth : nullptr, qmask ? &qmask->mask : nullptr};
    LossReport report = total_loss(inputs, cfg.weights, true);
    if (!std::isfinite(report.total)) {
      throw DivergenceError(it, "refine: loss became non-finite at iteration " +
                                    std::to_string(it));
    }
    Grid<double> grad = *report.grad_depth;
    if (teacher_report) grad += *teacher_report->grad_depth;

    log.total = report.total + (teacher_report ? teacher_report->total : 0.0);
    for (const auto& [name, term] : report.components) log.components[name] = term.value;
    if (problem.truth) log.mae = depth_mae(depth, *problem.truth);

    DepthMap candidate = depth;
    apply_step(candidate, grad, step, cfg.step_mode, ref_view.camera.depth_range());
    if (cfg.backtracking) {
      for (int tries = 0; tries < 30; ++tries) {
        const LossInputs trial{ref_view.image, ref_view.camera, sviews, candidate,
                               inputs.pseudo, inputs.region_mask};
        if (total_loss(trial, cfg.weights, false).total <= report.total) break;
        step *= 0.5;
        candidate = depth;
        apply_step(candidate, grad, step, cfg.step_mode, ref_view.camera.depth_range());
      }
    }
    log.step = step;
    depth = std::move(candidate);
    result.trace.push_back(std::move(log));
  }
  result.memory = probe.report();
  result.gallery = std::move(gallery);
  return result;
}

memory::ProbeReport memory_probe(const DepthMap& init, const RefineProblem& problem,
                                 const PseudoDepthProvider& teacher, const RefineConfig& cfg) {
  return refine_depth(init, problem, teacher, cfg).memory;
}

std::string trace_csv(const std::vector<IterationLog>& trace) {
  std::ostringstream os;
  os.precision(17);
  std::vector<std::string> names;
  if (!trace.empty()) {
    for (const auto& [name, v] : trace.front().components) names.push_back(name);
  }
  os << "iteration,total";
  for (const auto& n : names) os << ',' << n;
  os << ",mask_ratio,mae,step\n";
  for (const auto& log : trace) {
    os << log.iteration << ',' << log.total;
    for (const auto& n : names) {
      auto it = log.components.find(n);
      os << ',' << (it == log.components.end() ? 0.0 : it->second);
    }
    os << ',' << log.mask_ratio << ',' << log.mae << ',' << log.step << '\n';
  }
  return os.str();
}

}  // namespace selfmvs
