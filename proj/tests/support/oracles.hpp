#pragma once

// Brute-force reference implementations and generators shared by the unit and
// acceptance tests. Nothing here calls into the library's loss or sampling code.

#include "mrkp/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using mrkp::Points;
using Rng = std::mt19937_64;

inline Points<double> random_points(Eigen::Index n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Points<double> p(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) p(i, c) = u(rng);
  }
  return p;
}

inline double distance(const Points<double>& a, Eigen::Index i, const Points<double>& b, Eigen::Index j) {
  double s = 0;
  for (int c = 0; c < 3; ++c) s += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
  return std::sqrt(s);
}

inline double nearest_distance(const Points<double>& from, Eigen::Index i, const Points<double>& to,
                               Eigen::Index begin = 0, Eigen::Index end = -1) {
  if (end < 0) end = to.rows();
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = begin; j < end; ++j) best = std::min(best, distance(from, i, to, j));
  return best;
}

/// A reconstruction with arbitrary segment sizes (no keypoint geometry behind it).
inline mrkp::SkeletonReconstruction toy_reconstruction(const std::vector<int>& sizes, Rng& rng) {
  mrkp::SkeletonReconstruction rec;
  rec.layout.keypoint_count = 0;
  rec.layout.segment_begin.push_back(0);
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    rec.layout.endpoints.emplace_back(0, static_cast<Eigen::Index>(s + 1));
    for (int m = 0; m < sizes[s]; ++m) rec.layout.arc.push_back(sizes[s] > 1 ? double(m) / (sizes[s] - 1) : 0.0);
    rec.layout.segment_begin.push_back(rec.layout.segment_begin.back() + sizes[s]);
  }
  rec.points = random_points(rec.layout.total_points(), rng);
  std::uniform_real_distribution<double> act(0.05, 0.95);
  rec.activations.resize(static_cast<Eigen::Index>(sizes.size()));
  for (Eigen::Index s = 0; s < rec.activations.size(); ++s) rec.activations(s) = act(rng);
  return rec;
}

inline double fidelity(const mrkp::SkeletonReconstruction& rec, const Points<double>& target) {
  double total = 0;
  for (Eigen::Index s = 0; s < rec.layout.segment_count(); ++s) {
    double seg = 0;
    for (Eigen::Index p = rec.layout.segment_begin[s]; p < rec.layout.segment_begin[s + 1]; ++p) {
      seg += nearest_distance(rec.points, p, target);
    }
    total += rec.activations(s) * seg;
  }
  return total;
}

/// Walks segments nearest first with a remaining weight budget of 1.
inline double coverage(const mrkp::SkeletonReconstruction& rec, const Points<double>& target) {
  double total = 0;
  const Eigen::Index segments = rec.layout.segment_count();
  for (Eigen::Index j = 0; j < target.rows(); ++j) {
    std::vector<std::pair<double, Eigen::Index>> d;
    for (Eigen::Index s = 0; s < segments; ++s) {
      d.emplace_back(nearest_distance(target, j, rec.points, rec.layout.segment_begin[s], rec.layout.segment_begin[s + 1]),
                     s);
    }
    std::sort(d.begin(), d.end());
    double budget = 1.0;
    for (const auto& [dist, s] : d) {
      const double a = rec.activations(s);
      if (a >= budget) {
        total += budget * dist;
        break;
      }
      total += a * dist;
      budget -= a;
    }
  }
  return total;
}

/// One-sided sums in both directions.
inline double chamfer_sum(const Points<double>& a, const Points<double>& b) {
  double total = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) total += nearest_distance(a, i, b);
  for (Eigen::Index j = 0; j < b.rows(); ++j) total += nearest_distance(b, j, a);
  return total;
}

/// Farthest point sampling recomputing every min distance from scratch.
inline std::vector<Eigen::Index> farthest_points(const Points<double>& p, Eigen::Index m, Eigen::Index first) {
  std::vector<Eigen::Index> chosen = {first};
  while (static_cast<Eigen::Index>(chosen.size()) < m) {
    Eigen::Index best = -1;
    double best_d = -1;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c : chosen) d = std::min(d, distance(p, i, p, c));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

/// True when no nearest-neighbor choice, segment ordering or prefix boundary
/// lies within `margin` of switching, so central differences see one smooth piece.
inline bool well_separated(const mrkp::SkeletonReconstruction& rec, const Points<double>& target, double margin) {
  auto gap_ok = [margin](std::vector<double> d) {
    std::sort(d.begin(), d.end());
    for (std::size_t i = 1; i < d.size(); ++i) {
      if (d[i] - d[i - 1] < margin) return false;
    }
    return true;
  };
  for (Eigen::Index p = 0; p < rec.points.rows(); ++p) {
    std::vector<double> d;
    for (Eigen::Index j = 0; j < target.rows(); ++j) d.push_back(distance(rec.points, p, target, j));
    if (!gap_ok(d)) return false;
  }
  for (Eigen::Index j = 0; j < target.rows(); ++j) {
    std::vector<std::pair<double, Eigen::Index>> seg;
    for (Eigen::Index s = 0; s < rec.layout.segment_count(); ++s) {
      std::vector<double> d;
      for (Eigen::Index p = rec.layout.segment_begin[s]; p < rec.layout.segment_begin[s + 1]; ++p) {
        d.push_back(distance(target, j, rec.points, p));
      }
      if (!gap_ok(d)) return false;
      seg.emplace_back(*std::min_element(d.begin(), d.end()), s);
    }
    std::vector<double> mins;
    for (const auto& s : seg) mins.push_back(s.first);
    if (!gap_ok(mins)) return false;
    std::sort(seg.begin(), seg.end());
    double acc = 0;
    for (const auto& s : seg) {
      acc += rec.activations(s.second);
      if (std::abs(acc - 1.0) < margin) return false;
    }
  }
  return true;
}

/// Central differences of a scalar function of a dense matrix.
template <typename M>
M numeric_gradient(const std::function<double(const M&)>& f, const M& x, double h = 1e-4) {
  M g = M::Zero(x.rows(), x.cols());
  M probe = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double keep = probe(r, c);
      probe(r, c) = keep + h;
      const double up = f(probe);
      probe(r, c) = keep - h;
      const double down = f(probe);
      probe(r, c) = keep;
      g(r, c) = (up - down) / (2 * h);
    }
  }
  return g;
}

template <typename A, typename B>
double relative_error(const A& analytic, const B& numeric) {
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-8});
  return (analytic - numeric).norm() / scale;
}

/// Best one-to-one matching size within tau over all assignments (small inputs only).
inline std::size_t optimal_match_count(const Points<double>& pred, const Points<double>& ann, double tau) {
  std::size_t best = 0;
  std::vector<bool> used(static_cast<std::size_t>(ann.rows()), false);
  std::function<void(Eigen::Index, std::size_t)> go = [&](Eigen::Index p, std::size_t count) {
    if (p == pred.rows()) {
      best = std::max(best, count);
      return;
    }
    go(p + 1, count);
    for (Eigen::Index a = 0; a < ann.rows(); ++a) {
      if (used[static_cast<std::size_t>(a)] || distance(pred, p, ann, a) > tau) continue;
      used[static_cast<std::size_t>(a)] = true;
      go(p + 1, count + 1);
      used[static_cast<std::size_t>(a)] = false;
    }
  };
  go(0, 0);
  return best;
}

}  // namespace oracle
