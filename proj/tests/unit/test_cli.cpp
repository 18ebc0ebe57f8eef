#include "mrkp/cli.hpp"
#include "mrkp/checkpoint.hpp"
#include "mrkp/io.hpp"
#include "mrkp/metrics.hpp"
#include "mrkp/model.hpp"

#include "support/scratch.hpp"

#include <doctest.h>

#include <json.hpp>

#include <sstream>

using namespace mrkp;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

const std::vector<std::string> kSmall = {
    "--override", "K=4",
    "--override", "points_per_cloud=256",
    "--override", "encoder.sa1_centers=64",
    "--override", "encoder.sa1_group=16",
    "--override", "encoder.sa2_centers=16",
    "--override", "encoder.sa2_group=16",
    "--override", "encoder.global_width=64",
    "--override", "category=box",
    "--quiet"};

Run train(const fs::path& data, const fs::path& out, std::vector<std::string> extra = {}) {
  std::vector<std::string> args = {"train", "--data", data.string(), "--out", out.string(), "--seed", "5"};
  args.insert(args.end(), kSmall.begin(), kSmall.end());
  args.insert(args.end(), extra.begin(), extra.end());
  return cli(args);
}

// One small dataset and trained run shared by the cases below.
struct Fixture {
  ScratchDir dir{"cli"};
  fs::path data = dir / "data";
  fs::path run = dir / "run";
  fs::path checkpoint = run / "checkpoint.mrkp";

  Fixture() {
    const Run s = cli({"synth", "--family", "box", "--count", "6", "--points", "400", "--seed", "2", "--out",
                       data.string()});
    REQUIRE(s.code == 0);
    const Run t = train(data, run, {"--epochs", "1"});
    REQUIRE(t.code == 0);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

std::vector<std::string> body_lines(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

}  // namespace

TEST_CASE("train: missing data directory is a usage error") {
  ScratchDir dir("cli_missing");
  const Run r = train(dir / "nope", dir / "out");
  CHECK(r.code == 2);
  CHECK(r.err.find("nope") != std::string::npos);
}

TEST_CASE("train: unknown subcommand and unknown override key") {
  CHECK(cli({"fly"}).code == 2);
  CHECK(cli({}).code == 2);
  auto& f = fixture();
  const Run r = train(f.data, f.dir / "bad", {"--override", "lambda_q=1"});
  CHECK(r.code == 2);
  CHECK(r.err.find("lambda_q") != std::string::npos);
}

TEST_CASE("train: artifacts, manifest epochs and a reproducible step log") {
  auto& f = fixture();
  for (const char* name : {"checkpoint.mrkp", "steps.csv", "config.txt", "manifest.json"}) {
    CHECK(fs::is_regular_file(f.run / name));
  }
  const auto manifest = nlohmann::json::parse(read_file(f.run / "manifest.json"));
  CHECK(manifest["command"] == "train");
  CHECK(manifest["config"]["epochs"] == "1");
  CHECK(manifest["dataset"]["size"] == 6);
  const std::string id = manifest["id"];
  CHECK(read_file(f.run / "steps.csv").rfind("# manifest " + id + "\n", 0) == 0);

  const auto steps = body_lines(f.run / "steps.csv");
  REQUIRE(steps.size() >= 2);
  CHECK(steps.front().rfind("step,", 0) == 0);

  const fs::path again = f.dir / "again";
  REQUIRE(train(f.data, again, {"--epochs", "1"}).code == 0);
  CHECK(read_file(again / "steps.csv") == read_file(f.run / "steps.csv"));
  CHECK(read_file(again / "checkpoint.mrkp") == read_file(f.checkpoint));
}

TEST_CASE("train: resuming with more epochs continues the same log") {
  auto& f = fixture();
  const fs::path two = f.dir / "two", resumed = f.dir / "resumed";
  REQUIRE(train(f.data, two, {"--epochs", "2"}).code == 0);
  REQUIRE(train(f.data, resumed, {"--epochs", "2", "--resume", f.checkpoint.string()}).code == 0);
  const auto full = body_lines(two / "steps.csv"), tail = body_lines(resumed / "steps.csv");
  const auto first = body_lines(f.run / "steps.csv");
  REQUIRE(full.size() == first.size() + tail.size() - 1);
  for (std::size_t i = 1; i < tail.size(); ++i) CHECK(tail[i] == full[first.size() - 1 + i]);
  CHECK(read_file(two / "checkpoint.mrkp") == read_file(resumed / "checkpoint.mrkp"));
}

TEST_CASE("detect: K records, idempotent, in the input frame") {
  auto& f = fixture();
  const fs::path cloud = f.data / "box_0000.xyz";
  const fs::path a = f.dir / "a.kp", b = f.dir / "b.kp";
  REQUIRE(cli({"detect", "--checkpoint", f.checkpoint.string(), "--cloud", cloud.string(), "--out", a.string()}).code == 0);
  REQUIRE(cli({"detect", "--checkpoint", f.checkpoint.string(), "--cloud", cloud.string(), "--out", b.string()}).code == 0);
  CHECK(body_lines(a) == body_lines(b));
  const auto lines = body_lines(a);
  REQUIRE(lines.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(lines[k].rfind(std::to_string(k) + " ", 0) == 0);
  CHECK(fs::is_regular_file(a.string() + ".manifest.json"));

  // the cloud scaled by 3 gives keypoints scaled by 3
  PointCloud big = load_pointcloud(cloud);
  big.points *= 3.0;
  const fs::path big_path = f.dir / "big.xyz", c = f.dir / "c.kp";
  save_xyz(big, big_path);
  REQUIRE(cli({"detect", "--checkpoint", f.checkpoint.string(), "--cloud", big_path.string(), "--out", c.string()}).code == 0);
  const Points<double> ka = load_keypoints(a), kc = load_keypoints(c);
  CHECK((kc - 3.0 * ka).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("detect: an invalid checkpoint exits 3") {
  auto& f = fixture();
  const fs::path junk = f.dir / "junk.mrkp";
  write_text(junk, "not a checkpoint");
  const Run r = cli({"detect", "--checkpoint", junk.string(), "--cloud", (f.data / "box_0000.xyz").string(), "--out",
                     (f.dir / "x.kp").string()});
  CHECK(r.code == 3);
  CHECK(!fs::exists(f.dir / "x.kp"));
}

TEST_CASE("eval: a metric typo exits 2 and names the valid metrics") {
  auto& f = fixture();
  const Run r = cli({"eval", "--checkpoint", f.checkpoint.string(), "--data", f.data.string(), "--annotations",
                     (f.data / "annotations.txt").string(), "--metrics", "das,mou"});
  CHECK(r.code == 2);
  CHECK(r.err.find("part_corr") != std::string::npos);
}

TEST_CASE("eval: annotation positions used as keypoint files score 1") {
  auto& f = fixture();
  const fs::path kp_dir = f.dir / "ann_kp";
  fs::create_directories(kp_dir);
  for (const auto& [id, ann] : load_annotations(f.data / "annotations.txt")) {
    Points<double> p(static_cast<Eigen::Index>(ann.keypoints.size()), 3);
    for (std::size_t i = 0; i < ann.keypoints.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = ann.keypoints[i].position.transpose();
    save_keypoints(p, kp_dir / (id + ".kp"));
  }
  const fs::path out = f.dir / "eval_ann";
  const Run r = cli({"eval", "--keypoints", kp_dir.string(), "--data", f.data.string(), "--annotations",
                     (f.data / "annotations.txt").string(), "--metrics", "das,miou", "--out", out.string()});
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(read_file(out / "report.json"));
  const auto text = report.dump();
  INFO(text);
  CHECK(fs::is_regular_file(out / "report.txt"));
  CHECK(fs::is_regular_file(out / "manifest.json"));
  CHECK(r.out.find("tau") != std::string::npos);
  CHECK(report["mean"]["das"] == 1.0);
  CHECK(report["mean"]["miou"] == 1.0);
}

TEST_CASE("eval: checkpoint predictions give scores in range") {
  auto& f = fixture();
  const Run r = cli({"eval", "--checkpoint", f.checkpoint.string(), "--data", f.data.string(), "--annotations",
                     (f.data / "annotations.txt").string()});
  CHECK(r.code == 0);
  CHECK(cli({"eval", "--data", f.data.string(), "--metrics", "part_corr"}).code == 2);
}

TEST_CASE("noise-sweep: zero sigma gives ratio 1, bad sigmas exit 2, curve matches the library") {
  auto& f = fixture();
  const fs::path out = f.dir / "sweep.txt";
  REQUIRE(cli({"noise-sweep", "--checkpoint", f.checkpoint.string(), "--data", f.data.string(), "--sigmas", "0",
               "--out", out.string()})
              .code == 0);
  const auto lines = body_lines(out);
  REQUIRE(lines.size() == 2);
  CHECK(lines[1] == "0 1");

  CHECK(cli({"noise-sweep", "--checkpoint", f.checkpoint.string(), "--data", f.data.string(), "--sigmas", "0.02,0.01",
             "--out", out.string()})
            .code == 2);
  CHECK(cli({"noise-sweep", "--checkpoint", f.checkpoint.string(), "--data", f.data.string(), "--sigmas", "0,abc",
             "--out", out.string()})
            .code == 2);

  REQUIRE(cli({"noise-sweep", "--checkpoint", f.checkpoint.string(), "--data", f.data.string(), "--sigmas",
               "0,0.01,0.05", "--threshold", "0.05", "--seed", "3", "--out", out.string()})
              .code == 0);
  const Checkpoint ck = load_checkpoint(f.checkpoint);
  const Model model = load_model(ck);
  std::vector<PointCloud> clouds;
  for (const auto& c : load_directory(f.data)) clouds.push_back(frame_cloud(c, ck.config.points_per_cloud, 3).cloud);
  const auto curve = repeatability([&](const PointCloud& c) { return model.detect(c).keypoints; }, clouds,
                                   {0, 0.01, 0.05}, 0.05, 3);
  const auto got = body_lines(out);
  REQUIRE(got.size() == 4);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(got[i + 1] == format_double(curve[i].sigma) + " " + format_double(curve[i].ratio));
  }
}

TEST_CASE("export-viz: one vertex per point, keypoint and reconstruction point") {
  auto& f = fixture();
  const fs::path out = f.dir / "viz.ply";
  REQUIRE(cli({"export-viz", "--checkpoint", f.checkpoint.string(), "--cloud", (f.data / "box_0001.xyz").string(),
               "--out", out.string()})
              .code == 0);
  const Checkpoint ck = load_checkpoint(f.checkpoint);
  const Model model = load_model(ck);
  const FramedCloud framed = frame_cloud(load_pointcloud(f.data / "box_0001.xyz"), ck.config.points_per_cloud, 0);
  const auto rec = reconstruct(model, model.encode(framed.cloud));
  const Eigen::Index expected = framed.cloud.size() + 4 + rec.layout.total_points();

  std::istringstream in(read_file(out));
  std::string line;
  Eigen::Index declared = -1, body = 0;
  bool in_body = false;
  while (std::getline(in, line)) {
    if (in_body) {
      body += !line.empty();
    } else if (line.rfind("element vertex ", 0) == 0) {
      declared = std::stol(line.substr(15));
    } else if (line == "end_header") {
      in_body = true;
    }
  }
  CHECK(declared == expected);
  CHECK(body == expected);

  const fs::path empty = f.dir / "empty.xyz";
  write_text(empty, "");
  CHECK(cli({"export-viz", "--checkpoint", f.checkpoint.string(), "--cloud", empty.string(), "--out",
             (f.dir / "e.ply").string()})
            .code == 2);
}

TEST_CASE("synth: unknown family exits 2") {
  ScratchDir dir("cli_synth");
  CHECK(cli({"synth", "--family", "pyramid", "--out", (dir / "x").string()}).code == 2);
}
