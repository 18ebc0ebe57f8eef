#include "mrkp/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <random>

namespace mrkp {
namespace {

struct Wire {
  int a, b;  // indices into the structural points
  int part;
};

struct Shape {
  std::vector<Vector3<double>> anchors;  // structural points, annotated in order
  std::vector<Vector3<double>> extra;    // unannotated wire ends
  std::vector<Wire> wires;               // indices >= anchors.size() refer to extra
  std::vector<int> owner;                // part label claimed around each anchor

  const Vector3<double>& at(int i) const {
    const auto n = static_cast<int>(anchors.size());
    return i < n ? anchors[i] : extra[i - n];
  }
};

Shape make_box(double l, double w, double h) {
  Shape s;
  for (int i = 0; i < 8; ++i) {
    s.anchors.emplace_back((i & 1 ? 0.5 : -0.5) * l, (i & 2 ? 0.5 : -0.5) * w, (i & 4 ? 0.5 : -0.5) * h);
  }
  // bottom ring, top ring, pillars
  for (int i = 0; i < 8; ++i) {
    for (int bit : {1, 2, 4}) {
      const int j = i | bit;
      if (j == i) continue;
      const int part = bit == 4 ? 2 : (i & 4 ? 1 : 0);
      s.wires.push_back({i, j, part});
    }
  }
  s.owner.assign(8, 2);
  return s;
}

Shape make_tee(double bar, double stem) {
  Shape s;
  s.anchors = {{-0.5 * bar, stem, 0}, {0.5 * bar, stem, 0}, {0, stem, 0}, {0, 0, 0}};
  s.wires = {{0, 2, 0}, {2, 1, 0}, {2, 3, 1}};
  s.owner = {0, 0, 0, 1};
  return s;
}

Shape make_cross(double horizontal, double vertical) {
  Shape s;
  s.anchors = {{0, 0, 0},
               {-0.5 * horizontal, 0, 0},
               {0.5 * horizontal, 0, 0},
               {0, -0.5 * vertical, 0},
               {0, 0.5 * vertical, 0}};
  s.wires = {{0, 1, 0}, {0, 2, 0}, {0, 3, 1}, {0, 4, 1}};
  s.owner = {0, 0, 0, 1, 1};
  return s;
}

Shape make_airplane(double fuselage, double span) {
  Shape s;
  const double wing_x = 0.1 * fuselage;
  const double tail_x = -0.5 * fuselage;
  s.anchors = {{0.5 * fuselage, 0, 0},
               {tail_x, 0, 0},
               {wing_x - 0.15 * span, -0.5 * span, 0},
               {wing_x - 0.15 * span, 0.5 * span, 0},
               {tail_x, 0, 0.25 * fuselage}};
  s.extra = {{wing_x, 0, 0}};
  const int root = 5;
  s.wires = {{0, 1, 0}, {root, 2, 1}, {root, 3, 1}, {1, 4, 2}};
  s.owner = {0, 0, 1, 1, 2};
  return s;
}

constexpr double kOwnerRadius = 0.06;

double draw(const Range& r, std::mt19937_64& rng) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

Shape make_shape(const SyntheticSpec& spec, std::mt19937_64& rng) {
  const double l = draw(spec.length, rng);
  const double w = draw(spec.width, rng);
  switch (spec.family) {
    case ShapeFamily::kBox: return make_box(l, w, draw(spec.width, rng));
    case ShapeFamily::kTee: return make_tee(l, w);
    case ShapeFamily::kCross: return make_cross(l, w);
    case ShapeFamily::kAirplaneToy: return make_airplane(l, w);
  }
  throw Error(ErrorKind::kArgument, "unknown shape family");
}

}  // namespace

std::string to_string(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::kBox: return "box";
    case ShapeFamily::kTee: return "tee";
    case ShapeFamily::kCross: return "cross";
    case ShapeFamily::kAirplaneToy: return "airplane-toy";
  }
  return "unknown";
}

ShapeFamily parse_shape_family(const std::string& text) {
  for (auto f : {ShapeFamily::kBox, ShapeFamily::kTee, ShapeFamily::kCross, ShapeFamily::kAirplaneToy}) {
    if (to_string(f) == text) return f;
  }
  throw Error(ErrorKind::kArgument, "unknown shape family '" + text + "' (box, tee, cross, airplane-toy)");
}

Eigen::Index annotation_count(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::kBox: return 8;
    case ShapeFamily::kTee: return 4;
    case ShapeFamily::kCross: return 5;
    case ShapeFamily::kAirplaneToy: return 5;
  }
  return 0;
}

int part_count(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::kBox: return 3;
    case ShapeFamily::kTee: return 2;
    case ShapeFamily::kCross: return 2;
    case ShapeFamily::kAirplaneToy: return 3;
  }
  return 0;
}

void validate(const SyntheticSpec& spec) {
  for (const auto* r : {&spec.length, &spec.width}) {
    require(std::isfinite(r->lo) && std::isfinite(r->hi) && r->lo > 0 && r->lo <= r->hi, ErrorKind::kArgument,
            "synthetic ranges need 0 < lo <= hi");
  }
  require(std::isfinite(spec.jitter) && spec.jitter >= 0, ErrorKind::kArgument, "jitter must be non-negative");
  require(spec.points_per_cloud >= 16, ErrorKind::kArgument, "synthetic clouds need at least 16 points");
}

SyntheticDataset generate(const SyntheticSpec& spec, std::size_t count) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::string category = to_string(spec.family);

  SyntheticDataset out;
  for (std::size_t n = 0; n < count; ++n) {
    const Shape shape = make_shape(spec, rng);
    std::vector<double> cumulative;
    double total = 0;
    for (const auto& w : shape.wires) {
      total += (shape.at(w.b) - shape.at(w.a)).norm();
      cumulative.push_back(total);
    }

    PointCloud cloud;
    cloud.category = category;
    char id[64];
    std::snprintf(id, sizeof id, "%s_%04zu", category.c_str(), n);
    cloud.id = id;
    cloud.points.resize(spec.points_per_cloud, 3);
    std::vector<int> labels(static_cast<std::size_t>(spec.points_per_cloud));
    for (Eigen::Index i = 0; i < spec.points_per_cloud; ++i) {
      const double u = unit(rng) * total;
      std::size_t k = 0;
      while (k + 1 < cumulative.size() && cumulative[k] < u) ++k;
      const Wire& w = shape.wires[k];
      const double t = unit(rng);
      Vector3<double> p = shape.at(w.a) + t * (shape.at(w.b) - shape.at(w.a));
      for (int c = 0; c < 3; ++c) p(c) += spec.jitter * noise(rng);
      cloud.points.row(i) = p.transpose();
      // Junctions belong to one part so every annotated point has a single label around it.
      int label = w.part;
      for (std::size_t a = 0; a < shape.anchors.size(); ++a) {
        if ((p - shape.anchors[a]).norm() < kOwnerRadius) label = shape.owner[a];
      }
      labels[static_cast<std::size_t>(i)] = label;
    }
    cloud.part_labels = std::move(labels);

    const auto map = unit_box_transform(cloud.points);
    cloud.points = map.apply(cloud.points);
    AnnotationSet ann;
    ann.cloud_id = cloud.id;
    for (std::size_t a = 0; a < shape.anchors.size(); ++a) {
      const Points<double> p = map.apply(shape.anchors[a].transpose());
      ann.keypoints.push_back({static_cast<int>(a), p.row(0).transpose()});
    }
    out.clouds.push_back(std::move(cloud));
    out.annotations.push_back(std::move(ann));
  }
  return out;
}

void save_dataset(const SyntheticDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& c : data.clouds) save_xyz(c, dir / (c.id + ".xyz"));
  save_annotations(data.annotations, dir / "annotations.txt");
}

}  // namespace mrkp
