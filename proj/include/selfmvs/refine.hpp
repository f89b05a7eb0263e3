#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selfmvs/cross_view.hpp"
#include "selfmvs/losses.hpp"
#include "selfmvs/memory_probe.hpp"
#include "selfmvs/view_selection.hpp"

namespace selfmvs {

enum class StudentPolicy {
  kScoreSampling,  // sample_by_score, resampled every iteration
  kTopK,           // same deterministic top-K list as the teacher
};

enum class StepMode {
  kPlain,            // d -= step * grad
  kPixelNormalized,  // d -= step * n_valid * grad, so step is resolution independent
};

struct RefineConfig {
  int iterations = 200;
  double step_size = 0.05;
  StepMode step_mode = StepMode::kPixelNormalized;
  LossWeights weights = LossWeights::region_aware();
  int teacher_views = 5;  // reference + 4 sources
  int student_views = 4;  // reference + 3 sources
  std::uint64_t seed = 0;
  int gallery_cadence = 1;
  CheckConfig check;
  // Teacher runs inference only. Off = ablation where the teacher also
  // evaluates a photometric objective with gradients.
  bool freeze_teacher = true;
  StudentPolicy student_policy = StudentPolicy::kScoreSampling;
  // Halve the step until the loss on the current view set does not increase.
  bool backtracking = false;

  void validate() const;
};

struct PseudoDepth {
  DepthMap depth;
  ConfidenceMap confidence;
};

struct TeacherInput {
  int ref;
  std::span<const int> sources;
  // Current estimate; read-only, no gradient state is attached.
  const DepthMap& current;
  std::span<const View> views;
  const DepthGallery& gallery;
};

class PseudoDepthProvider {
 public:
  virtual ~PseudoDepthProvider() = default;
  virtual PseudoDepth infer(const TeacherInput& in) const = 0;
};

// Pseudo-depth from cached source depths: every reference pixel is carried
// to each teacher source with the current estimate, the source's cached
// depth is re-lifted into the reference frame, and the median of those
// depths is taken. Confidence is the fraction of sources whose candidate
// agrees with the median within `agree_tol` (relative).
class WarpMedianTeacher final : public PseudoDepthProvider {
 public:
  explicit WarpMedianTeacher(double agree_tol = 0.01) : agree_tol_(agree_tol) {}
  PseudoDepth infer(const TeacherInput& in) const override;

 private:
  double agree_tol_;
};

// Returns a fixed map (e.g. ground truth, or ground truth plus noise).
class FixedTeacher final : public PseudoDepthProvider {
 public:
  FixedTeacher(DepthMap depth, ConfidenceMap confidence)
      : pseudo_{std::move(depth), std::move(confidence)} {}
  PseudoDepth infer(const TeacherInput&) const override { return pseudo_; }

 private:
  PseudoDepth pseudo_;
};

struct RefineProblem {
  int ref = 0;
  std::vector<View> views;  // indexed by view id
  ViewScoreMatrix scores{1};
  // Cached pseudo-depths of the source views used by the teacher and by
  // the cross-view check.
  DepthGallery gallery;
  // Optional ground truth, only used to report MAE in the trace.
  std::optional<DepthMap> truth;
};

struct IterationLog {
  int iteration = 0;
  double total = 0.0;
  std::map<std::string, double> components;
  double mask_ratio = -1.0;  // avg(M), -1 when no mask was computed
  double mae = -1.0;         // -1 without ground truth
  double step = 0.0;
  std::vector<int> teacher_views;
  std::vector<int> student_views;
};

struct RefineResult {
  DepthMap depth;
  std::vector<IterationLog> trace;
  memory::ProbeReport memory;
  // Gallery after the last iteration, including the reference pseudo-depth.
  DepthGallery gallery;
};

// Gradient descent on total_loss over the reference depth. Per iteration:
// the teacher takes the top-K sources and refreshes the reference
// pseudo-depth in the gallery (inference only), the cross-view check
// partitions it into high/low quality when partitioned weights are set, and
// the student evaluates the objective on its own sources and steps. Throws
// DivergenceError on a non-finite loss.
RefineResult refine_depth(const DepthMap& init, const RefineProblem& problem,
                          const PseudoDepthProvider& teacher, const RefineConfig& cfg);

// Runs refine_depth and returns the gradient/forward buffer accounting of
// the teacher and student passes.
memory::ProbeReport memory_probe(const DepthMap& init, const RefineProblem& problem,
                                 const PseudoDepthProvider& teacher, const RefineConfig& cfg);

// Writes iteration, total, every component, mask ratio and MAE as CSV.
std::string trace_csv(const std::vector<IterationLog>& trace);

}  // namespace selfmvs
