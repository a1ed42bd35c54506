#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "doctest.h"
#include "drape/cli.hpp"
#include "json.hpp"

using namespace drape;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "drape");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(DRAPE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "drape_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

json params(double stretch, double bending, double density) {
  return {{"kStretchWarp", stretch}, {"kStretchWeft", stretch}, {"kStretchBias", stretch},
          {"kBendingWarp", bending}, {"kBendingWeft", bending}, {"kBendingBias", bending},
          {"density", density}};
}

json coarse_capture() {
  return {{"edge_length", 0.1}, {"camera", {{"width", 32}, {"height", 32}}}};
}

}  // namespace

TEST_CASE("help exits 0 for every subcommand") {
  CHECK(run({"--help"}).code == 0);
  for (const char* sub : {"simulate", "render", "sweep", "augment", "gen-dataset", "stats", "distance", "rank",
                          "validate-metric", "embed", "report"}) {
    CAPTURE(sub);
    const auto r = run({sub, "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--") != std::string::npos);
  }
}

TEST_CASE("usage errors exit 2") {
  const auto unknown = run({"frobnicate"});
  CHECK(unknown.code == 2);
  const auto flag = run({"simulate", "--scene", "hanging", "--params", "p.json", "--bogus"});
  CHECK(flag.code == 2);
  CHECK_FALSE(flag.err.empty());
  CHECK(run({}).code == 2);
  CHECK(run({"simulate", "--scene", "hanging"}).code == 2);
}

TEST_CASE("configuration errors exit 3 with a JSON error line") {
  const auto dir = scratch_dir("config_error");
  const auto missing = run({"-o", dir.string(), "simulate", "--scene", "hanging", "--params", (dir / "nope.json").string()});
  CHECK(missing.code == 3);
  const auto err = json::parse(missing.err.substr(0, missing.err.find('\n')));
  CHECK(err.at("exit_code") == 3);
  CHECK(err.at("error") == "config");

  json p = params(300, 1e-5, 0.2);
  p.erase("density");
  write_json(dir / "p.json", p);
  CHECK(run({"-o", dir.string(), "simulate", "--scene", "hanging", "--params", (dir / "p.json").string()}).code == 3);
  write_json(dir / "ok.json", params(300, 1e-5, 0.2));
  CHECK(run({"-o", dir.string(), "simulate", "--scene", "sideways", "--params", (dir / "ok.json").string()}).code == 3);
}

TEST_CASE("the installed binary reports the same exit codes") {
  CHECK(run_binary("--help") == 0);
  CHECK(run_binary("embed --help") == 0);
  CHECK(run_binary("frobnicate") == 2);
  CHECK(run_binary("stats --manifest") == 2);
  const auto dir = scratch_dir("binary");
  CHECK(run_binary("-o " + dir.string() + " simulate --scene hanging --params " + (dir / "none.json").string()) == 3);
  // A missing data artifact is a runtime failure, not a configuration error.
  CHECK(run_binary("-o " + dir.string() + " stats --manifest " + (dir / "none.jsonl").string()) == 1);
}

TEST_CASE("simulate then render, reproducibly") {
  const auto dir = scratch_dir("simulate");
  write_json(dir / "p.json", params(300, 1e-5, 0.2));
  write_json(dir / "capture.json", coarse_capture());
  const auto a = dir / "a", b = dir / "b";
  for (const auto& out : {a, b}) {
    const auto r = run({"-o", out.string(), "simulate", "--scene", "hanging", "--params", (dir / "p.json").string(),
                        "--config", (dir / "capture.json").string(), "--jitter-seed", "4"});
    REQUIRE(r.code == 0);
  }
  CHECK(fs::exists(a / "mesh.obj"));
  CHECK(slurp(a / "mesh.obj") == slurp(b / "mesh.obj"));
  CHECK(slurp(a / "convergence.json") == slurp(b / "convergence.json"));
  const auto conv = json::parse(slurp(a / "convergence.json"));
  CHECK(conv.at("converged") == true);
  const auto manifest = json::parse(slurp(a / "run_manifest.json"));
  CHECK(manifest.at("subcommand") == "simulate");
  CHECK(manifest.at("config_hash") == json::parse(slurp(b / "run_manifest.json")).at("config_hash"));
  CHECK(manifest.at("versions").contains("drape"));
  CHECK(manifest.contains("wall_seconds"));

  write_json(dir / "camera.json", {{"width", 48}, {"height", 48}});
  const auto rd = dir / "render";
  const auto r = run({"-o", rd.string(), "render", "--mesh", (a / "mesh.obj").string(), "--camera",
                      (dir / "camera.json").string(), "--shaded", "--sweep"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(rd / "depth.png"));
  CHECK(fs::exists(rd / "depth.png.json"));
  CHECK(fs::exists(rd / "shaded.png"));
  CHECK(fs::exists(rd / "depth_v00.png"));
  CHECK(fs::exists(rd / "depth_v10.png"));
  CHECK(slurp(rd / "depth_v05.png") == slurp(rd / "depth.png"));
}

TEST_CASE("augment, gen-dataset and stats") {
  const auto dir = scratch_dir("dataset");
  write_json(dir / "gen.json", {{"count", 3}, {"capture", coarse_capture()}, {"seed", 2}});
  const auto ds = dir / "ds";
  REQUIRE(run({"-o", ds.string(), "--seed", "5", "gen-dataset", "--config", (dir / "gen.json").string()}).code == 0);
  CHECK(fs::exists(ds / "manifest.jsonl"));
  std::ifstream m(ds / "manifest.jsonl");
  int lines = 0;
  std::string first_path;
  for (std::string line; std::getline(m, line); ++lines)
    if (first_path.empty()) first_path = json::parse(line).at("path");
  CHECK(lines == 66);

  const auto st = dir / "stats";
  const auto s = run({"-o", st.string(), "stats", "--manifest", (ds / "manifest.jsonl").string()});
  REQUIRE(s.code == 0);
  const auto stats = json::parse(slurp(st / "stats.json"));
  CHECK(stats.at("samples") == 3);
  CHECK(fs::exists(st / "stats.md"));
  CHECK(fs::exists(st / "spearman.png"));

  write_json(dir / "policy.json", {{"noise", {{"p", 1.0}}}, {"blur", {{"p", 1.0}}}});
  const auto au = dir / "aug";
  for (int k = 0; k < 2; ++k)
    REQUIRE(run({"-o", (au / std::to_string(k)).string(), "augment", "--input", (ds / first_path).string(), "--policy",
                 (dir / "policy.json").string(), "--sample-seed", "9", "--output", "x.png", "--equalize"})
                .code == 0);
  CHECK(slurp(au / "0" / "x.png") == slurp(au / "1" / "x.png"));
}

TEST_CASE("validate-metric agrees with individual distance calls") {
  const auto dir = scratch_dir("metric");
  // 20 mm mesh: coarser grids leave jitter noise above the bending contrast.
  write_json(dir / "metric.json", {{"replicates", 1}, {"capture", {{"edge_length", 0.02}, {"camera", {{"width", 64}, {"height", 64}}}}}});
  const json a = params(300, 1e-6, 0.2), b = params(300, 1e-4, 0.2);
  write_json(dir / "a.json", a);
  write_json(dir / "b.json", b);
  write_json(dir / "set.json", json::array({{{"name", "soft"}, {"params", a}}, {{"name", "stiff"}, {"params", b}}}));

  const auto v = run({"-o", (dir / "v").string(), "--seed", "11", "validate-metric", "--materials",
                      (dir / "set.json").string(), "--config", (dir / "metric.json").string()});
  REQUIRE(v.code == 0);
  CHECK(v.out.find("PASS") != std::string::npos);
  const auto matrix = json::parse(slurp(dir / "v" / "self_distance.json"));
  CHECK(matrix.at("pass") == true);

  const auto d = run({"-o", (dir / "d").string(), "--seed", "11", "distance", "--a", (dir / "a.json").string(), "--b",
                      (dir / "b.json").string(), "--config", (dir / "metric.json").string()});
  REQUIRE(d.code == 0);
  const auto dist = json::parse(slurp(dir / "d" / "distance.json"));
  CHECK(dist.at("d").get<double>() == doctest::Approx(matrix.at("distances")[0][1].get<double>()).epsilon(1e-12));

  const auto rk = run({"-o", (dir / "r").string(), "--seed", "11", "rank", "--ref", (dir / "a.json").string(),
                       "--candidates", (dir / "set.json").string(), "--config", (dir / "metric.json").string()});
  REQUIRE(rk.code == 0);
  const auto ranking = json::parse(slurp(dir / "r" / "ranking.json"));
  CHECK(ranking[0].at("name") == "soft");
}

TEST_CASE("embed writes coordinates, summary and plot") {
  const auto dir = scratch_dir("embed");
  std::ofstream(dir / "t.csv") << "ref,chosen,rejected\n0,1,2\n1,0,2\n2,1,0\n";
  write_json(dir / "opt.json", {{"iterations", 200}, {"restarts", 2}});
  const auto r = run({"-o", (dir / "e").string(), "embed", "--triplets", (dir / "t.csv").string(), "--config",
                      (dir / "opt.json").string(), "--labels", "a,b,c"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "e" / "embedding.csv"));
  CHECK(fs::exists(dir / "e" / "embedding.json"));
  CHECK(slurp(dir / "e" / "embedding.svg").find("<svg") == 0);
  std::ofstream(dir / "bad.csv") << "x,y\n";
  CHECK(run({"-o", (dir / "f").string(), "embed", "--triplets", (dir / "bad.csv").string()}).code == 3);
}

TEST_CASE("sweep and report") {
  const auto dir = scratch_dir("sweep");
  write_json(dir / "p.json", params(300, 1e-5, 0.2));
  write_json(dir / "capture.json", coarse_capture());
  const auto r = run({"-o", (dir / "s").string(), "sweep", "--param", "kStretchBias", "--values", "100", "144", "1000",
                      "--params", (dir / "p.json").string(), "--config", (dir / "capture.json").string()});
  REQUIRE(r.code == 0);
  const auto sw = json::parse(slurp(dir / "s" / "sweep.json"));
  CHECK(sw.at("cells").size() == 6);
  CHECK(fs::exists(dir / "s" / "sweep_depth.png"));
  CHECK(fs::exists(dir / "s" / "sweep_shaded.png"));

  write_json(dir / "metric.json", {{"replicates", 1}, {"capture", coarse_capture()}});
  write_json(dir / "set.json", json::array({params(300, 1e-6, 0.2), params(300, 1e-4, 0.2), params(1000, 1e-5, 0.3)}));
  const auto rep = run({"-o", (dir / "r").string(), "report", "--materials", (dir / "set.json").string(), "--params",
                        (dir / "p.json").string(), "--sweep-param", "kBending", "--sweep-values", "1e-6", "1e-5",
                        "--config", (dir / "metric.json").string()});
  REQUIRE(rep.code == 0);
  const auto md = slurp(dir / "r" / "report.md");
  CHECK(md.find("## Parameter sweep") != std::string::npos);
  CHECK(md.find("## Search by drape similarity") != std::string::npos);
  CHECK(fs::exists(dir / "r" / "report_sweep.png"));
  CHECK(fs::exists(dir / "r" / "report_ranking.png"));
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
