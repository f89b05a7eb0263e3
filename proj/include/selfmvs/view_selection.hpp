#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "selfmvs/geometry.hpp"

namespace selfmvs {

// Pairwise view scores; score(i, j) >= 0 and score(i, i) = 0.
class ViewScoreMatrix {
 public:
  explicit ViewScoreMatrix(int n_views);
  explicit ViewScoreMatrix(Eigen::MatrixXd scores);

  int size() const { return static_cast<int>(scores_.rows()); }
  double operator()(int i, int j) const { return scores_(i, j); }
  void set(int i, int j, double score);
  const Eigen::MatrixXd& matrix() const { return scores_; }

 private:
  Eigen::MatrixXd scores_;
};

struct Anchor {
  Point3 position;
  std::vector<bool> visible;  // one flag per view
};

struct ViewScoreParams {
  double theta0_deg = 5.0;
  double sigma1 = 1.0;
  double sigma2 = 10.0;
};

// Piecewise Gaussian on the triangulation angle, in degrees.
double view_angle_weight(double theta_deg, const ViewScoreParams& params = {});

// Angle in degrees at `p` between the rays to centers a and b. 0 when
// either ray is degenerate.
double baseline_angle_deg(const Point3& p, const Vec3& a, const Vec3& b);

// score(i,j) = sum over anchors visible in both views of
// view_angle_weight(angle at the anchor between the two camera centers).
ViewScoreMatrix compute_view_scores(std::span<const Camera> cams, std::span<const Anchor> anchors,
                                    const ViewScoreParams& params = {});

// The k sources with the largest score(ref, .), descending; ties go to the
// lower view index.
std::vector<int> select_top_k(const ViewScoreMatrix& scores, int ref, int k);

struct ViewSample {
  std::vector<int> views;
  // Fewer than k sources had a positive score; the remainder was filled
  // uniformly from zero-score sources.
  bool degenerate = false;
};

// k distinct sources drawn sequentially without replacement, each draw
// proportional to score(ref, .) among the remaining candidates.
ViewSample sample_by_score(const ViewScoreMatrix& scores, int ref, int k, std::uint64_t seed);

}  // namespace selfmvs
