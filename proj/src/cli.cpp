#include "mrkp/cli.hpp"

#include "mrkp/checkpoint.hpp"
#include "mrkp/io.hpp"
#include "mrkp/manifest.hpp"
#include "mrkp/metrics.hpp"
#include "mrkp/synthetic.hpp"
#include "mrkp/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

namespace mrkp {
namespace fs = std::filesystem;

namespace {

constexpr std::array<std::array<unsigned char, 3>, 10> kPalette = {{{31, 119, 180},
                                                                    {255, 127, 14},
                                                                    {44, 160, 44},
                                                                    {214, 39, 40},
                                                                    {148, 103, 189},
                                                                    {140, 86, 75},
                                                                    {227, 119, 194},
                                                                    {127, 127, 127},
                                                                    {188, 189, 34},
                                                                    {23, 190, 207}}};

std::vector<double> parse_sigmas(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      require(used == tok.size(), ErrorKind::kArgument, "");
    } catch (const std::exception&) {
      throw Error(ErrorKind::kArgument, "'" + tok + "' in --sigmas is not a number");
    }
  }
  validate_sigmas(out);
  return out;
}

std::string manifest_comment(const RunManifest& m, const char* prefix = "#") {
  return std::string(prefix) + " manifest " + m.id() + "\n";
}

void write_manifest(RunManifest& m, const fs::path& path) { write_file_atomic(path, m.to_json()); }

struct Category {
  std::string name;
  std::vector<PointCloud> clouds;
};

// Subdirectories holding clouds become categories; otherwise the directory
// itself is one category.
std::vector<Category> load_categories(const fs::path& dir, const std::string& fallback) {
  require(fs::is_directory(dir), ErrorKind::kIo, "data directory '" + dir.string() + "' does not exist");
  std::vector<Category> out;
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) subdirs.push_back(e.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& sub : subdirs) {
    auto clouds = load_directory(sub);
    if (clouds.empty()) continue;
    const std::string name = sub.filename().string();
    for (auto& c : clouds) c.category = name;
    out.push_back({name, std::move(clouds)});
  }
  if (out.empty()) {
    auto clouds = load_directory(dir);
    for (auto& c : clouds) c.category = fallback;
    out.push_back({fallback, std::move(clouds)});
  }
  for (const auto& c : out) {
    require(!c.clouds.empty(), ErrorKind::kIo, "no .xyz or .ply clouds in '" + dir.string() + "'");
  }
  return out;
}

struct Loaded {
  Checkpoint checkpoint;
  Model model;
};

Loaded load(const fs::path& path) {
  Checkpoint ck = load_checkpoint(path);
  Model m = load_model(ck);
  return {std::move(ck), std::move(m)};
}

struct TrainArgs {
  std::string config, data, out, resume;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::vector<std::string> overrides;
  std::size_t checkpoint_every = 0;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  std::optional<Checkpoint> ck;
  if (!a.resume.empty()) ck = load_checkpoint(a.resume);
  TrainConfig config = !a.config.empty() ? load_config(a.config) : (ck ? ck->config : TrainConfig{});
  if (a.seed) config.seed = *a.seed;
  if (a.epochs) config.epochs = *a.epochs;
  for (const auto& o : a.overrides) apply_override(config, o);
  validate(config);

  require(fs::is_directory(a.data), ErrorKind::kIo, "data directory '" + a.data + "' does not exist");
  std::vector<PointCloud> raw = load_directory(a.data);
  require(!raw.empty(), ErrorKind::kArgument, "no .xyz or .ply clouds in '" + a.data + "'");
  for (auto& c : raw) c.category = config.category;
  std::vector<PointCloud> dataset = prepare_dataset(raw, config.points_per_cloud, config.seed);

  Trainer trainer = ck ? Trainer::resume(*ck, dataset, &config) : Trainer(config, dataset);
  RunManifest manifest = make_manifest("train", config, dataset_fingerprint(dataset), dataset.size());
  manifest.artifacts = {"checkpoint.mrkp", "steps.csv", "config.txt", "manifest.json"};
  const fs::path dir = a.out;

  std::string log = manifest_comment(manifest) + step_log_header() + "\n";
  if (!a.quiet) out << step_log_header() << "\n";
  trainer.run_to_end([&](const StepRecord& r) {
    const std::string line = format_step(r);
    log += line + "\n";
    if (!a.quiet) out << line << "\n" << std::flush;
    if (a.checkpoint_every > 0 && r.step % a.checkpoint_every == 0) {
      save_checkpoint(trainer.checkpoint(), dir / "checkpoint.mrkp");
    }
  });
  save_checkpoint(trainer.checkpoint(), dir / "checkpoint.mrkp");
  write_file_atomic(dir / "steps.csv", log);
  write_file_atomic(dir / "config.txt", to_text(config));
  write_manifest(manifest, dir / "manifest.json");
  out << "trained " << trainer.steps_done() << " steps; artifacts in " << dir.string() << "\n";
  return kExitOk;
}

int cmd_detect(const std::string& checkpoint, const std::string& cloud_path, const std::string& out_path,
               std::uint64_t seed, std::ostream& out) {
  require(!cloud_path.empty(), ErrorKind::kArgument, "--cloud is required");
  Loaded l = load(checkpoint);
  const PointCloud cloud = load_pointcloud(cloud_path);
  const FramedCloud framed = frame_cloud(cloud, l.checkpoint.config.points_per_cloud, seed);
  const Points<double> kp = framed.to_input(l.model.detect(framed.cloud).keypoints);

  RunManifest manifest = make_manifest("detect", l.checkpoint.config, dataset_fingerprint({cloud}), 1);
  manifest.artifacts = {fs::path(out_path).filename().string()};
  std::string text = manifest_comment(manifest);
  for (Eigen::Index k = 0; k < kp.rows(); ++k) {
    text += std::to_string(k) + ' ' + format_double(kp(k, 0)) + ' ' + format_double(kp(k, 1)) + ' ' +
            format_double(kp(k, 2)) + '\n';
  }
  write_file_atomic(out_path, text);
  write_manifest(manifest, out_path + ".manifest.json");
  out << "wrote " << kp.rows() << " keypoints to " << out_path << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint, keypoints, data, annotations, out, metrics = "das,miou,part_corr", sigmas;
  double tau = 0.1;
  double threshold = 0.1;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const std::set<std::string> metrics = parse_metric_names(a.metrics);
  require(a.checkpoint.empty() != a.keypoints.empty(), ErrorKind::kArgument,
          "give exactly one of --checkpoint or --keypoints");
  require(!metrics.count("repeatability") || !a.checkpoint.empty(), ErrorKind::kArgument,
          "repeatability needs --checkpoint (it runs the detector on noisy copies)");
  const bool needs_annotations = metrics.count("das") || metrics.count("miou");
  require(!needs_annotations || !a.annotations.empty(), ErrorKind::kArgument, "das and miou need --annotations");

  std::optional<Loaded> loaded;
  if (!a.checkpoint.empty()) loaded = load(a.checkpoint);
  const TrainConfig config = loaded ? loaded->checkpoint.config : TrainConfig{};
  const Eigen::Index points = loaded ? config.points_per_cloud : std::numeric_limits<Eigen::Index>::max();

  const std::string fallback = loaded ? config.category : fs::path(a.data).filename().string();
  const std::vector<Category> categories = load_categories(a.data, fallback.empty() ? "default" : fallback);
  std::map<std::string, AnnotationSet> annotations;
  if (!a.annotations.empty()) annotations = load_annotations(a.annotations);

  EvalOptions options;
  options.tau = a.tau;
  options.repeat_threshold = a.threshold;
  options.seed = a.seed;
  if (!a.sigmas.empty()) options.sigmas = parse_sigmas(a.sigmas);
  require(options.tau > 0, ErrorKind::kArgument, "--tau must be positive");

  MetricsReport report;
  report.options = options;
  report.metrics = metrics;
  std::vector<PointCloud> all_framed;
  std::vector<PointCloud> fingerprinted;
  for (const auto& cat : categories) {
    std::vector<PointCloud> framed_clouds;
    std::vector<KeypointSet> preds;
    std::map<std::string, AnnotationSet> framed_ann;
    for (const auto& cloud : cat.clouds) {
      fingerprinted.push_back(cloud);
      const FramedCloud f = frame_cloud(cloud, points, a.seed);
      KeypointSet kp;
      kp.source_id = cloud.id;
      if (loaded) {
        kp.keypoints = loaded->model.detect(f.cloud).keypoints;
      } else {
        const fs::path file = fs::path(a.keypoints) / (cloud.id + ".kp");
        require(fs::is_regular_file(file), ErrorKind::kIo, "missing keypoint file '" + file.string() + "'");
        kp.keypoints = f.to_model(load_keypoints(file));
      }
      if (auto it = annotations.find(cloud.id); it != annotations.end()) {
        AnnotationSet s = it->second;
        for (auto& k : s.keypoints) k.position = f.to_model(k.position.transpose()).row(0).transpose();
        framed_ann[cloud.id] = std::move(s);
      }
      preds.push_back(std::move(kp));
      framed_clouds.push_back(f.cloud);
    }
    if (!preds.empty()) {
      const Eigen::Index k = preds.front().keypoints.rows();
      for (const auto& p : preds) {
        require(p.keypoints.rows() == k, ErrorKind::kArgument, "keypoint files disagree on K in '" + cat.name + "'");
      }
    }
    report.per_category[cat.name] = evaluate_category(framed_clouds, preds, framed_ann, metrics, options);
    all_framed.insert(all_framed.end(), framed_clouds.begin(), framed_clouds.end());
  }
  if (metrics.count("repeatability")) {
    const Model& model = loaded->model;
    report.repeatability_curve = repeatability(
        [&model](const PointCloud& c) { return model.detect(c).keypoints; }, all_framed, options.sigmas,
        options.repeat_threshold, options.seed);
  }

  RunManifest manifest = make_manifest("eval", config, dataset_fingerprint(fingerprinted), fingerprinted.size());
  manifest.flags["tau"] = format_double(options.tau);
  manifest.flags["das_reference_draws"] = std::to_string(options.das_reference_draws);
  manifest.flags["part_pairs"] = std::to_string(options.part_pairs);
  manifest.flags["predictions"] = loaded ? "checkpoint" : "keypoint files";
  manifest.artifacts = {"report.txt", "report.json", "manifest.json"};
  const std::string text = manifest_comment(manifest) + report.to_text();
  if (!a.out.empty()) {
    const fs::path dir = a.out;
    write_file_atomic(dir / "report.txt", text);
    write_file_atomic(dir / "report.json", report.to_json());
    write_manifest(manifest, dir / "manifest.json");
  }
  out << text;
  return kExitOk;
}

int cmd_noise_sweep(const std::string& checkpoint, const std::string& data, const std::string& sigmas_text,
                    double threshold, std::uint64_t seed, const std::string& out_path, std::ostream& out) {
  const std::vector<double> sigmas = parse_sigmas(sigmas_text);
  require(threshold >= 0, ErrorKind::kArgument, "--threshold must be non-negative");
  Loaded l = load(checkpoint);
  const auto categories = load_categories(data, l.checkpoint.config.category);
  std::vector<PointCloud> clouds, raw;
  for (const auto& cat : categories) {
    for (const auto& c : cat.clouds) {
      raw.push_back(c);
      clouds.push_back(frame_cloud(c, l.checkpoint.config.points_per_cloud, seed).cloud);
    }
  }
  const Model& model = l.model;
  const auto curve =
      repeatability([&model](const PointCloud& c) { return model.detect(c).keypoints; }, clouds, sigmas, threshold, seed);

  RunManifest manifest = make_manifest("noise-sweep", l.checkpoint.config, dataset_fingerprint(raw), raw.size());
  manifest.flags["threshold"] = format_double(threshold);
  manifest.artifacts = {fs::path(out_path).filename().string()};
  std::string text = manifest_comment(manifest) + "sigma ratio\n";
  for (const auto& p : curve) text += format_double(p.sigma) + ' ' + format_double(p.ratio) + '\n';
  write_file_atomic(out_path, text);
  write_manifest(manifest, out_path + ".manifest.json");
  out << text;
  return kExitOk;
}

int cmd_export_viz(const std::string& checkpoint, const std::string& cloud_path, const std::string& out_path,
                   std::uint64_t seed, std::ostream& out) {
  require(!cloud_path.empty(), ErrorKind::kArgument, "--cloud is required");
  Loaded l = load(checkpoint);
  const PointCloud cloud = load_pointcloud(cloud_path);
  const FramedCloud f = frame_cloud(cloud, l.checkpoint.config.points_per_cloud, seed);
  const EncodedCloud enc = l.model.encode(f.cloud);
  const SkeletonReconstruction rec = reconstruct(l.model, enc);
  const Vector<double> saliency = pointwise_saliency(enc.scores);
  const Points<double> pts = f.to_input(f.cloud.points);
  const Points<double> kp = f.to_input(enc.keypoints.keypoints);
  const Points<double> rp = f.to_input(rec.points);

  RunManifest manifest = make_manifest("export-viz", l.checkpoint.config, dataset_fingerprint({cloud}), 1);
  manifest.artifacts = {fs::path(out_path).filename().string()};
  const Eigen::Index n = pts.rows(), k = kp.rows(), t = rp.rows();
  std::string s = "ply\nformat ascii 1.0\n" + manifest_comment(manifest, "comment") +
                  "comment kind 0 = cloud, 1 = keypoint, 2 = reconstruction\n"
                  "element vertex " + std::to_string(n + k + t) +
                  "\nproperty double x\nproperty double y\nproperty double z\n"
                  "property uchar red\nproperty uchar green\nproperty uchar blue\n"
                  "property double saliency\nproperty int kind\nproperty int channel\nend_header\n";
  auto vertex = [&s](const auto& row, const std::array<unsigned char, 3>& rgb, double sal, int kind, long channel) {
    s += format_double(row(0)) + ' ' + format_double(row(1)) + ' ' + format_double(row(2)) + ' ' +
         std::to_string(rgb[0]) + ' ' + std::to_string(rgb[1]) + ' ' + std::to_string(rgb[2]) + ' ' +
         format_double(sal) + ' ' + std::to_string(kind) + ' ' + std::to_string(channel) + '\n';
  };
  for (Eigen::Index i = 0; i < n; ++i) vertex(pts.row(i), {160, 160, 160}, saliency(i), 0, -1);
  for (Eigen::Index c = 0; c < k; ++c) vertex(kp.row(c), channel_color(c), 0.0, 1, c);
  for (Eigen::Index seg = 0; seg < rec.layout.segment_count(); ++seg) {
    const unsigned char a = static_cast<unsigned char>(std::clamp(rec.activations(seg), 0.0, 1.0) * 255.0);
    for (Eigen::Index i = rec.layout.segment_begin[seg]; i < rec.layout.segment_begin[seg + 1]; ++i) {
      vertex(rp.row(i), {a, 64, static_cast<unsigned char>(255 - a)}, rec.activations(seg), 2, seg);
    }
  }
  write_file_atomic(out_path, s);
  write_manifest(manifest, out_path + ".manifest.json");
  out << "wrote " << (n + k + t) << " vertices to " << out_path << "\n";
  return kExitOk;
}

int cmd_synth(const std::string& family, std::size_t count, Eigen::Index points, std::uint64_t seed, double jitter,
              const std::string& out_path, std::ostream& out) {
  SyntheticSpec spec;
  spec.family = parse_shape_family(family);
  spec.points_per_cloud = points;
  spec.seed = seed;
  spec.jitter = jitter;
  require(count >= 1, ErrorKind::kArgument, "--count must be at least 1");
  save_dataset(generate(spec, count), out_path);
  out << "wrote " << count << " " << family << " clouds and annotations.txt to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int exit_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIncompatible: return kExitIncompatible;
    case ErrorKind::kNumeric: return kExitNumeric;
    default: return kExitUsage;
  }
}

Points<double> FramedCloud::to_input(const Points<double>& p) const {
  return ((p / map.scale).rowwise() + map.center.transpose()).eval();
}

FramedCloud frame_cloud(const PointCloud& cloud, Eigen::Index points, std::uint64_t seed) {
  validate(cloud);
  FramedCloud f;
  f.map = unit_box_transform(cloud.points);
  f.cloud = cloud;
  f.cloud.points = f.map.apply(cloud.points);
  if (f.cloud.size() > points) f.cloud = farthest_point_sample(f.cloud, points, seed);
  return f;
}

std::array<unsigned char, 3> channel_color(Eigen::Index channel) {
  return kPalette[static_cast<std::size_t>(channel % static_cast<Eigen::Index>(kPalette.size()))];
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised semantic 3D keypoints from mutual reconstruction", "mrkp"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train on a directory of clouds");
  t->add_option("--config", train.config, "flat key=value config file");
  t->add_option("--data", train.data, "directory of .xyz/.ply clouds")->required();
  t->add_option("--out", train.out, "output directory")->required();
  t->add_option("--seed", train.seed, "overrides the config seed");
  t->add_option("--epochs", train.epochs, "overrides the config epochs");
  t->add_option("--override", train.overrides, "key=value, repeatable");
  t->add_option("--resume", train.resume, "continue from a checkpoint");
  t->add_option("--checkpoint-every", train.checkpoint_every, "also checkpoint every N steps");
  t->add_flag("--quiet", train.quiet, "do not echo step records");

  std::string checkpoint, cloud, out_path, data, sigmas = "0,0.01,0.02,0.03,0.04,0.05", family = "tee";
  std::uint64_t seed = 0;
  double threshold = 0.1, jitter = 0.005;
  std::size_t count = 200;
  Eigen::Index points = 2048;

  auto* d = app.add_subcommand("detect", "predict keypoints for one cloud");
  d->add_option("--checkpoint", checkpoint)->required();
  d->add_option("--cloud", cloud)->required();
  d->add_option("--out", out_path)->required();
  d->add_option("--seed", seed, "downsampling seed");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "score predictions against annotations");
  e->add_option("--checkpoint", eval.checkpoint);
  e->add_option("--keypoints", eval.keypoints, "directory of <cloud_id>.kp files in detect format");
  e->add_option("--data", eval.data)->required();
  e->add_option("--annotations", eval.annotations);
  e->add_option("--metrics", eval.metrics, "comma-separated: das, miou, part_corr, repeatability");
  e->add_option("--tau", eval.tau, "mIoU match distance");
  e->add_option("--sigmas", eval.sigmas);
  e->add_option("--threshold", eval.threshold);
  e->add_option("--seed", eval.seed);
  e->add_option("--out", eval.out);

  auto* n = app.add_subcommand("noise-sweep", "repeatability under Gaussian noise");
  n->add_option("--checkpoint", checkpoint)->required();
  n->add_option("--data", data)->required();
  n->add_option("--sigmas", sigmas, "comma-separated, ascending");
  n->add_option("--threshold", threshold);
  n->add_option("--seed", seed);
  n->add_option("--out", out_path)->required();

  auto* v = app.add_subcommand("export-viz", "colored ply of cloud, keypoints and reconstruction");
  v->add_option("--checkpoint", checkpoint)->required();
  v->add_option("--cloud", cloud)->required();
  v->add_option("--out", out_path)->required();
  v->add_option("--seed", seed);

  auto* s = app.add_subcommand("synth", "write a synthetic category");
  s->add_option("--family", family, "box, tee, cross, airplane-toy");
  s->add_option("--count", count);
  s->add_option("--points", points);
  s->add_option("--seed", seed);
  s->add_option("--jitter", jitter);
  s->add_option("--out", out_path)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (t->parsed()) return cmd_train(train, out);
    if (d->parsed()) return cmd_detect(checkpoint, cloud, out_path, seed, out);
    if (e->parsed()) return cmd_eval(eval, out);
    if (n->parsed()) return cmd_noise_sweep(checkpoint, data, sigmas, threshold, seed, out_path, out);
    if (v->parsed()) return cmd_export_viz(checkpoint, cloud, out_path, seed, out);
    if (s->parsed()) return cmd_synth(family, count, points, seed, jitter, out_path, out);
  } catch (const Error& ex) {
    err << "error (" << to_string(ex.kind()) << "): " << ex.what() << "\n";
    return exit_status(ex.kind());
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "error (io): " << ex.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace mrkp
