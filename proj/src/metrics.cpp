#include "mrkp/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

namespace mrkp {
namespace {

Eigen::Index nearest_point(const Points<double>& cloud, const Vector3<double>& p) {
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    const double d = (cloud.row(i).transpose() - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::optional<double> mean_of(const std::map<std::string, CategoryScores>& cats,
                              std::optional<double> CategoryScores::*field) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& [name, s] : cats) {
    if (s.*field) {
      sum += *(s.*field);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
  return buf;
}

nlohmann::json maybe(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

Eigen::Index nearest_channel(const Points<double>& keypoints, const Vector3<double>& position) {
  require(keypoints.rows() >= 1, ErrorKind::kArgument, "no keypoints to compare against");
  return nearest_point(keypoints, position);
}

double das(const KeypointSet& pred_src, const KeypointSet& pred_ref, const AnnotationSet& ann_src,
           const AnnotationSet& ann_ref) {
  require(pred_src.keypoints.rows() == pred_ref.keypoints.rows(), ErrorKind::kArgument,
          "source and reference predictions must share K");
  std::size_t evaluated = 0, aligned = 0;
  for (const auto& a : ann_src.keypoints) {
    const AnnotatedKeypoint* r = ann_ref.find(a.semantic_id);
    if (!r) continue;
    ++evaluated;
    if (nearest_channel(pred_src.keypoints, a.position) == nearest_channel(pred_ref.keypoints, r->position)) {
      ++aligned;
    }
  }
  require(evaluated > 0, ErrorKind::kUndefinedMetric,
          "'" + ann_src.cloud_id + "' and '" + ann_ref.cloud_id + "' share no semantic ids");
  return static_cast<double>(aligned) / static_cast<double>(evaluated);
}

std::vector<std::pair<Eigen::Index, std::size_t>> greedy_match(const Points<double>& predicted,
                                                              const AnnotationSet& annotations, double tau) {
  require(tau > 0, ErrorKind::kArgument, "mIoU threshold tau must be positive");
  struct Candidate {
    double d;
    Eigen::Index p;
    std::size_t a;
  };
  std::vector<Candidate> candidates;
  for (Eigen::Index p = 0; p < predicted.rows(); ++p) {
    for (std::size_t a = 0; a < annotations.keypoints.size(); ++a) {
      const double d = (predicted.row(p).transpose() - annotations.keypoints[a].position).norm();
      if (d <= tau) candidates.push_back({d, p, a});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    if (x.d != y.d) return x.d < y.d;
    if (x.p != y.p) return x.p < y.p;
    return x.a < y.a;
  });
  std::vector<bool> used_p(static_cast<std::size_t>(predicted.rows()), false);
  std::vector<bool> used_a(annotations.keypoints.size(), false);
  std::vector<std::pair<Eigen::Index, std::size_t>> matches;
  for (const auto& c : candidates) {
    if (used_p[static_cast<std::size_t>(c.p)] || used_a[c.a]) continue;
    used_p[static_cast<std::size_t>(c.p)] = true;
    used_a[c.a] = true;
    matches.emplace_back(c.p, c.a);
  }
  return matches;
}

double keypoint_iou(const KeypointSet& pred, const AnnotationSet& ann, double tau) {
  require(pred.keypoints.rows() >= 1, ErrorKind::kArgument, "mIoU needs at least one prediction");
  require(!ann.keypoints.empty(), ErrorKind::kArgument, "mIoU needs annotations for '" + ann.cloud_id + "'");
  const auto m = static_cast<double>(greedy_match(pred.keypoints, ann, tau).size());
  return m / (static_cast<double>(pred.keypoints.rows()) + static_cast<double>(ann.keypoints.size()) - m);
}

double miou(const std::vector<KeypointSet>& preds, const std::vector<const AnnotationSet*>& anns, double tau) {
  require(!preds.empty() && preds.size() == anns.size(), ErrorKind::kArgument,
          "mIoU needs matching, nonempty prediction and annotation lists");
  double sum = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += keypoint_iou(preds[i], *anns[i], tau);
  return sum / static_cast<double>(preds.size());
}

double part_correspondence(const KeypointSet& pred_a, const PointCloud& cloud_a, const KeypointSet& pred_b,
                           const PointCloud& cloud_b) {
  require(cloud_a.part_labels && cloud_b.part_labels, ErrorKind::kArgument,
          "part correspondence needs part labels on '" + cloud_a.id + "' and '" + cloud_b.id + "'");
  const Eigen::Index k = pred_a.keypoints.rows();
  require(k >= 1 && k == pred_b.keypoints.rows(), ErrorKind::kArgument, "predictions must share K");
  Eigen::Index agree = 0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const int la = (*cloud_a.part_labels)[static_cast<std::size_t>(
        nearest_point(cloud_a.points, pred_a.keypoints.row(c).transpose()))];
    const int lb = (*cloud_b.part_labels)[static_cast<std::size_t>(
        nearest_point(cloud_b.points, pred_b.keypoints.row(c).transpose()))];
    if (la == lb) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(k);
}

void validate_sigmas(const std::vector<double>& sigmas) {
  require(!sigmas.empty(), ErrorKind::kArgument, "need at least one sigma");
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    require(std::isfinite(sigmas[i]) && sigmas[i] >= 0, ErrorKind::kArgument, "sigmas must be finite and >= 0");
    require(i == 0 || sigmas[i] >= sigmas[i - 1], ErrorKind::kArgument, "sigmas must be sorted ascending");
  }
}

std::vector<RepeatabilityPoint> repeatability(const Detector& detector, const std::vector<PointCloud>& clouds,
                                              const std::vector<double>& sigmas, double threshold,
                                              std::uint64_t seed) {
  validate_sigmas(sigmas);
  require(!clouds.empty(), ErrorKind::kArgument, "repeatability needs at least one cloud");
  require(threshold >= 0, ErrorKind::kArgument, "repeatability threshold must be non-negative");
  std::vector<Points<double>> clean;
  clean.reserve(clouds.size());
  for (const auto& c : clouds) clean.push_back(detector(c));

  std::mt19937_64 seeds(seed);
  std::vector<RepeatabilityPoint> curve;
  for (double sigma : sigmas) {
    std::size_t kept = 0, total = 0;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      const std::uint64_t noise_seed = seeds();
      const Points<double> noisy = detector(add_gaussian_noise(clouds[i], sigma, noise_seed));
      require(noisy.rows() == clean[i].rows(), ErrorKind::kArgument, "detector changed K under noise");
      for (Eigen::Index k = 0; k < noisy.rows(); ++k) {
        if ((noisy.row(k) - clean[i].row(k)).norm() <= threshold) ++kept;
        ++total;
      }
    }
    curve.push_back({sigma, static_cast<double>(kept) / static_cast<double>(total)});
  }
  return curve;
}

std::set<std::string> parse_metric_names(const std::string& text) {
  std::set<std::string> out;
  std::stringstream in(text);
  std::string name;
  while (std::getline(in, name, ',')) {
    if (name.empty()) continue;
    if (std::find(metric_names().begin(), metric_names().end(), name) == metric_names().end()) {
      std::string valid;
      for (const auto& n : metric_names()) valid += (valid.empty() ? "" : ", ") + n;
      throw Error(ErrorKind::kArgument, "unknown metric '" + name + "'; valid names: " + valid);
    }
    out.insert(name);
  }
  require(!out.empty(), ErrorKind::kArgument, "no metrics selected");
  return out;
}

std::optional<double> MetricsReport::mean_das() const { return mean_of(per_category, &CategoryScores::das); }
std::optional<double> MetricsReport::mean_miou() const { return mean_of(per_category, &CategoryScores::miou); }
std::optional<double> MetricsReport::mean_part_corr() const {
  return mean_of(per_category, &CategoryScores::part_corr);
}

std::string MetricsReport::to_text() const {
  std::ostringstream out;
  out << "# mIoU: greedy one-to-one Euclidean matching, tau = " << format_double(options.tau) << "\n";
  out << "# DAS: " << options.das_reference_draws << " seeded reference draws per source, shared ids only\n";
  out << "# part correspondence: " << options.part_pairs << " seeded pairs per category\n";
  out << "# values in percent\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %8s %8s %10s %8s\n", "category", "DAS", "mIoU", "PartCorr", "objects");
  out << line;
  for (const auto& [name, s] : per_category) {
    std::snprintf(line, sizeof line, "%-16s %8s %8s %10s %8zu\n", name.c_str(), cell(s.das).c_str(),
                  cell(s.miou).c_str(), cell(s.part_corr).c_str(), s.objects);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-16s %8s %8s %10s\n", "mean", cell(mean_das()).c_str(),
                cell(mean_miou()).c_str(), cell(mean_part_corr()).c_str());
  out << line;
  if (!repeatability_curve.empty()) {
    out << "# repeatability, threshold " << format_double(options.repeat_threshold) << "\nsigma ratio\n";
    for (const auto& p : repeatability_curve) out << format_double(p.sigma) << ' ' << format_double(p.ratio) << '\n';
  }
  return out.str();
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["protocol"] = {{"miou_matching", "greedy one-to-one euclidean"},
                   {"tau", options.tau},
                   {"das_reference_draws", options.das_reference_draws},
                   {"part_pairs", options.part_pairs},
                   {"repeat_threshold", options.repeat_threshold},
                   {"seed", options.seed}};
  j["metrics"] = std::vector<std::string>(metrics.begin(), metrics.end());
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (const auto& [name, s] : per_category) {
    cats[name] = {{"das", maybe(s.das)},
                  {"miou", maybe(s.miou)},
                  {"part_corr", maybe(s.part_corr)},
                  {"objects", s.objects},
                  {"das_pairs", s.das_pairs},
                  {"das_undefined", s.das_undefined},
                  {"part_pairs", s.part_pairs}};
  }
  j["per_category"] = cats;
  j["mean"] = {{"das", maybe(mean_das())}, {"miou", maybe(mean_miou())}, {"part_corr", maybe(mean_part_corr())}};
  nlohmann::ordered_json curve = nlohmann::ordered_json::array();
  for (const auto& p : repeatability_curve) curve.push_back({{"sigma", p.sigma}, {"ratio", p.ratio}});
  j["repeatability_curve"] = curve;
  return j.dump(2) + "\n";
}

CategoryScores evaluate_category(const std::vector<PointCloud>& clouds, const std::vector<KeypointSet>& preds,
                                 const std::map<std::string, AnnotationSet>& annotations,
                                 const std::set<std::string>& metrics, const EvalOptions& options) {
  require(clouds.size() == preds.size(), ErrorKind::kArgument, "one prediction per cloud is required");
  require(options.tau > 0, ErrorKind::kArgument, "mIoU threshold tau must be positive");
  CategoryScores s;
  s.objects = clouds.size();

  std::vector<std::size_t> annotated;
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    if (annotations.count(clouds[i].id)) annotated.push_back(i);
  }

  if (metrics.count("das") && annotated.size() >= 2) {
    std::mt19937_64 rng(options.seed);
    double sum = 0;
    for (std::size_t idx = 0; idx < annotated.size(); ++idx) {
      std::uniform_int_distribution<std::size_t> pick(0, annotated.size() - 2);
      for (std::size_t d = 0; d < options.das_reference_draws; ++d) {
        std::size_t r = pick(rng);
        if (r >= idx) ++r;
        const std::size_t a = annotated[idx], b = annotated[r];
        try {
          sum += das(preds[a], preds[b], annotations.at(clouds[a].id), annotations.at(clouds[b].id));
          ++s.das_pairs;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kUndefinedMetric) throw;
          ++s.das_undefined;
        }
      }
    }
    if (s.das_pairs > 0) s.das = sum / static_cast<double>(s.das_pairs);
  }

  if (metrics.count("miou") && !annotated.empty()) {
    std::vector<KeypointSet> p;
    std::vector<const AnnotationSet*> a;
    for (std::size_t i : annotated) {
      p.push_back(preds[i]);
      a.push_back(&annotations.at(clouds[i].id));
    }
    s.miou = miou(p, a, options.tau);
  }

  if (metrics.count("part_corr") && clouds.size() >= 2) {
    std::mt19937_64 rng(options.seed + 1);
    std::uniform_int_distribution<std::size_t> first(0, clouds.size() - 1), second(0, clouds.size() - 2);
    double sum = 0;
    for (std::size_t n = 0; n < options.part_pairs; ++n) {
      const std::size_t a = first(rng);
      std::size_t b = second(rng);
      if (b >= a) ++b;
      sum += part_correspondence(preds[a], clouds[a], preds[b], clouds[b]);
      ++s.part_pairs;
    }
    if (s.part_pairs > 0) s.part_corr = sum / static_cast<double>(s.part_pairs);
  }
  return s;
}

}  // namespace mrkp
