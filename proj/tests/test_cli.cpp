#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

using nlohmann::json;

namespace {

std::string binary() {
  const char* bin = std::getenv("LSC_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "LSC_BIN must point at the CLI binary");
  return bin;
}

struct CommandResult {
  int code = -1;
  std::string output;  // stdout only
};

CommandResult run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + binary() + " " + args +
                          " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CommandResult result;
  char buffer[4096];
  while (std::size_t got = std::fread(buffer, 1, sizeof buffer, pipe))
    result.output.append(buffer, got);
  const int status = pclose(pipe);
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("lsc_cli_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// Verification output lines with the wall-time field blanked, for replay
// comparison.
std::string strip_seconds(const std::string& lines) {
  std::istringstream in(lines);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    j["seconds"] = 0.0;
    out += j.dump() + "\n";
  }
  return out;
}

const std::string kTrainConfig = R"(
[task]
kind = rowsum
classes = 3
time_steps = 6
channels = 2
train_samples = 48
val_samples = 16
test_samples = 16

[stack]
cell = simple
depth = 1
width = 6
activation = sigmoid

[pretrain]
enabled = false

[train]
learning_rate = 3.14e-3
batch_size = 16
max_epochs = 2
patience = 3
)";

}  // namespace

TEST_CASE("usage errors exit with code two") {
  CHECK(run("").code == 2);
  CHECK(run("bogus-subcommand").code == 2);
  CHECK(run("verify --bogus-flag").code == 2);
  CHECK(run("train").code == 2);  // --config is required
  CHECK(run("train --config /nonexistent/path.ini").code == 2);
  CHECK(run("report /nonexistent/dir").code == 2);

  auto dir = temp_dir("badcfg");
  write_file(dir / "bad.ini", "[task]\nbogus_key = 1\n");
  CHECK(run("train --config " + (dir / "bad.ini").string()).code == 2);
  write_file(dir / "badval.ini", kTrainConfig + "\n[train]\nseeds = banana\n");
  CHECK(run("train --config " + (dir / "badval.ini").string()).code == 2);
}

TEST_CASE("fast verification suites pass and emit parseable reports") {
  CommandResult psd = run("verify --claim psd --seed 7 --samples 500");
  CHECK(psd.code == 0);
  std::istringstream lines(psd.output);
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    CHECK(j.at("pass") == true);
    for (const char* key : {"claim", "n", "samples", "observed", "predicted", "tolerance",
                            "seconds"})
      CHECK(j.contains(key));
    ++count;
  }
  CHECK(count == 1);

  CommandResult pascal = run("verify --claim pascal_bound --seed 7");
  CHECK(pascal.code == 0);
  CHECK(pascal.output.find("\"pass\":true") != std::string::npos);
  CHECK(pascal.output.find("\"pass\":false") == std::string::npos);
}

TEST_CASE("the curve writer produces the documented artifact") {
  auto dir = temp_dir("curve");
  const std::string out = (dir / "curve.csv").string();
  CommandResult r = run("pascal --depth 4 --time 30 --rho 1.0 --out " + out);
  CHECK(r.code == 0);
  const std::string text = slurp(out);
  CHECK(text.rfind("t,value,bound_binomial,bound_constant\n", 0) == 0);
  // One row per origin step (t = 0..30) plus the header.
  CHECK(std::count(text.begin(), text.end(), '\n') == 32);

  CommandResult replay = run("pascal --depth 4 --time 30 --rho 1.0 --out " + out + ".again");
  CHECK(replay.code == 0);
  CHECK(slurp(out + ".again") == text);
}

TEST_CASE("pre-training runs converge, trace to CSV and respect seed precedence") {
  auto dir = temp_dir("pretrain");
  const std::string base =
      "pretrain --cell simple --depth 2 --width 8 --rho-target 0.5 --grad-mode eigen_adjoint";

  auto trace = [&](const std::string& name) { return (dir / (name + ".csv")).string(); };

  CommandResult a = run(base + " --seed 22 --out " + trace("flag"));
  CHECK(a.code == 0);
  json ja = json::parse(a.output);
  CHECK(ja.at("converged") == true);
  CHECK(ja.at("steps").get<int>() <= 50);
  const double mean = ja.at("mean_rho").get<double>();
  CHECK(mean > 0.48);
  CHECK(mean < 0.52);

  const std::string header = slurp(trace("flag"));
  CHECK(header.rfind("step,mean_rho,std_rho,ema_std,loss,kappa_time_l1,kappa_time_l2,"
                     "kappa_depth_l1,kappa_depth_l2\n",
                     0) == 0);

  // Environment seed matches the explicit flag run.
  CommandResult b = run(base + " --out " + trace("env"), "LSC_SEED=22");
  CHECK(b.code == 0);
  CHECK(slurp(trace("env")) == header);

  // The flag outranks the environment.
  CommandResult c = run(base + " --seed 22 --out " + trace("both"), "LSC_SEED=5");
  CHECK(c.code == 0);
  CHECK(slurp(trace("both")) == header);

  // A different seed changes the trajectory.
  CommandResult d = run(base + " --seed 5 --out " + trace("other"));
  CHECK(d.code == 0);
  CHECK(slurp(trace("other")) != header);

  // Config-file seed is the fallback and loses to the environment.
  write_file(dir / "pre.ini", "seed = 22\n[pretrain]\nrho_target = 0.5\n");
  CommandResult e = run("pretrain --cell simple --depth 2 --width 8 --grad-mode eigen_adjoint"
                        " --config " +
                        (dir / "pre.ini").string() + " --out " + trace("cfg"));
  CHECK(e.code == 0);
  CHECK(slurp(trace("cfg")) == header);
  CommandResult f = run("pretrain --cell simple --depth 2 --width 8 --grad-mode eigen_adjoint"
                        " --config " +
                        (dir / "pre.ini").string() + " --out " + trace("cfg_env"),
                        "LSC_SEED=5");
  CHECK(f.code == 0);
  CHECK(slurp(trace("cfg_env")) == slurp(trace("other")));
}

TEST_CASE("training, reporting and replay round-trip through an output directory") {
  auto dir = temp_dir("train");
  auto out_a = dir / "run_a";
  auto out_b = dir / "run_b";
  write_file(dir / "run.ini", kTrainConfig + "\n[train]\nseeds = 1,2\noutput_dir = " +
                                  out_a.string() + "\n");
  write_file(dir / "run2.ini", kTrainConfig + "\n[train]\nseeds = 1,2\noutput_dir = " +
                                   out_b.string() + "\n");

  CommandResult first = run("train --config " + (dir / "run.ini").string());
  CHECK(first.code == 0);
  json summary = json::parse(first.output);
  CHECK(summary.at("failed_seeds") == 0);
  CHECK(summary.at("seeds").size() == 2);

  CommandResult report = run("report " + out_a.string());
  CHECK(report.code == 0);
  json reported = json::parse(report.output);
  CHECK(reported.at("consistent") == true);
  CHECK(reported.at("seeds_checked") == 2);

  // Byte-identical artifacts under the same root seed.
  CommandResult second = run("train --config " + (dir / "run2.ini").string());
  CHECK(second.code == 0);
  CHECK(second.output == first.output);
  for (const char* name : {"seed_1_metrics.csv", "seed_2_metrics.csv", "aggregate.json"})
    CHECK(slurp(out_b / name) == slurp(out_a / name));

  // The seed override changes the artifacts.
  CommandResult shifted = run("train --config " + (dir / "run2.ini").string() +
                              " --seeds 3,4");
  CHECK(shifted.code == 0);
  CHECK(slurp(out_b / "aggregate.json") != slurp(out_a / "aggregate.json"));

  // A corrupted metric value is caught by the cross-check.
  const std::string metrics_path = (out_a / "seed_1_metrics.csv").string();
  std::string metrics = slurp(metrics_path);
  const auto pos = metrics.rfind("test,");
  REQUIRE(pos != std::string::npos);
  metrics.replace(pos + 5, 1, "9");
  write_file(metrics_path, metrics);
  CommandResult broken = run("report " + out_a.string());
  CHECK(broken.code == 1);
  CHECK(json::parse(broken.output).at("consistent") == false);
}

TEST_CASE("verification replays bit-identically apart from wall time") {
  CommandResult a = run("verify --claim init --seed 11 --samples 1000");
  CommandResult b = run("verify --claim init --seed 11 --samples 1000");
  CHECK(a.code == 0);
  CHECK(b.code == 0);
  CHECK(strip_seconds(a.output) == strip_seconds(b.output));
  CHECK(!strip_seconds(a.output).empty());

  CommandResult c = run("verify --claim init --seed 12 --samples 1000");
  CHECK(strip_seconds(c.output) != strip_seconds(a.output));
}
