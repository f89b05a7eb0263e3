#include "selfmvs/view_selection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace selfmvs {

ViewScoreMatrix::ViewScoreMatrix(int n_views) {
  SELFMVS_CHECK(n_views >= 1, "view score matrix needs at least one view");
  scores_ = Eigen::MatrixXd::Zero(n_views, n_views);
}

ViewScoreMatrix::ViewScoreMatrix(Eigen::MatrixXd scores) : scores_(std::move(scores)) {
  SELFMVS_CHECK(scores_.rows() == scores_.cols() && scores_.rows() >= 1,
                "view score matrix must be square");
  SELFMVS_CHECK(scores_.allFinite() && (scores_.array() >= 0.0).all(),
                "view scores must be finite and non-negative");
  SELFMVS_CHECK((scores_.diagonal().array() == 0.0).all(), "view score diagonal must be zero");
}

void ViewScoreMatrix::set(int i, int j, double score) {
  SELFMVS_CHECK(i >= 0 && j >= 0 && i < size() && j < size(), "view index out of range");
  SELFMVS_CHECK(std::isfinite(score) && score >= 0.0, "view score must be finite and >= 0");
  SELFMVS_CHECK(i != j || score == 0.0, "view score diagonal must be zero");
  scores_(i, j) = score;
}

double view_angle_weight(double theta_deg, const ViewScoreParams& params) {
  const double d = theta_deg - params.theta0_deg;
  const double sigma = theta_deg <= params.theta0_deg ? params.sigma1 : params.sigma2;
  return std::exp(-(d * d) / (2.0 * sigma * sigma));
}

double baseline_angle_deg(const Point3& p, const Vec3& a, const Vec3& b) {
  const Vec3 u = a - p;
  const Vec3 v = b - p;
  return std::atan2(u.cross(v).norm(), u.dot(v)) * 180.0 / std::numbers::pi;
}

ViewScoreMatrix compute_view_scores(std::span<const Camera> cams, std::span<const Anchor> anchors,
                                    const ViewScoreParams& params) {
  const int n = static_cast<int>(cams.size());
  SELFMVS_CHECK(n >= 2, "compute_view_scores: at least two views required");
  bool any_shared = false;
  for (const auto& a : anchors) {
    SELFMVS_CHECK(static_cast<int>(a.visible.size()) == n,
                  "compute_view_scores: anchor visibility has wrong length");
    if (std::count(a.visible.begin(), a.visible.end(), true) >= 2) any_shared = true;
  }
  SELFMVS_CHECK(any_shared, "compute_view_scores: no anchor is visible in two views");

  ViewScoreMatrix scores(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (const auto& a : anchors) {
        if (!a.visible[i] || !a.visible[j]) continue;
        s += view_angle_weight(baseline_angle_deg(a.position, cams[i].center(), cams[j].center()),
                               params);
      }
      scores.set(i, j, s);
      scores.set(j, i, s);
    }
  }
  return scores;
}

std::vector<int> select_top_k(const ViewScoreMatrix& scores, int ref, int k) {
  const int n = scores.size();
  SELFMVS_CHECK(ref >= 0 && ref < n, "select_top_k: reference view out of range");
  SELFMVS_CHECK(k >= 1 && k <= n - 1,
                "select_top_k: k = " + std::to_string(k) + " outside [1, " +
                    std::to_string(n - 1) + "]");
  std::vector<int> candidates;
  for (int j = 0; j < n; ++j) {
    if (j != ref) candidates.push_back(j);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](int a, int b) { return scores(ref, a) > scores(ref, b); });
  candidates.resize(k);
  return candidates;
}

ViewSample sample_by_score(const ViewScoreMatrix& scores, int ref, int k, std::uint64_t seed) {
  const int n = scores.size();
  SELFMVS_CHECK(ref >= 0 && ref < n, "sample_by_score: reference view out of range");
  SELFMVS_CHECK(k >= 1 && k <= n - 1,
                "sample_by_score: k = " + std::to_string(k) + " outside [1, " +
                    std::to_string(n - 1) + "]");
  std::mt19937_64 rng(seed);
  std::vector<int> positive, zero;
  for (int j = 0; j < n; ++j) {
    if (j == ref) continue;
    (scores(ref, j) > 0.0 ? positive : zero).push_back(j);
  }

  ViewSample out;
  std::vector<double> weights;
  for (int j : positive) weights.push_back(scores(ref, j));
  const int draws = std::min<int>(k, static_cast<int>(positive.size()));
  for (int d = 0; d < draws; ++d) {
    std::discrete_distribution<int> pick(weights.begin(), weights.end());
    const int idx = pick(rng);
    out.views.push_back(positive[idx]);
    weights[idx] = 0.0;
  }
  if (draws < k) {
    out.degenerate = true;
    std::shuffle(zero.begin(), zero.end(), rng);
    out.views.insert(out.views.end(), zero.begin(), zero.begin() + (k - draws));
  }
  return out;
}

}  // namespace selfmvs
