#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsc/errors.hpp"
#include "lsc/io.hpp"
#include "lsc/pretrain.hpp"
#include "lsc/rng.hpp"
#include "lsc/tasks.hpp"
#include "lsc/train.hpp"

using namespace lsc;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("lsc_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(bytes), 4);
}

void write_idx_images(const std::string& path, std::size_t count, std::size_t rows,
                      std::size_t cols, const std::vector<unsigned char>& pixels) {
  std::ofstream out(path, std::ios::binary);
  write_be32(out, 0x00000803u);
  write_be32(out, std::uint32_t(count));
  write_be32(out, std::uint32_t(rows));
  write_be32(out, std::uint32_t(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()), std::streamsize(pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<unsigned char>& labels) {
  std::ofstream out(path, std::ios::binary);
  write_be32(out, 0x00000801u);
  write_be32(out, std::uint32_t(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), std::streamsize(labels.size()));
}

// One-hot per-step logit rows spelling out a given argmax sequence.
std::vector<Vec> logit_track(const std::vector<std::size_t>& argmaxes, std::size_t classes) {
  std::vector<Vec> rows;
  for (std::size_t a : argmaxes) {
    Vec row(classes, 0.0);
    row[a] = 1.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("latency encoding maps brightness to spike step") {
  CHECK_FALSE(spike_latency_encode(0.0, 0.2, 50.0, 20).has_value());
  CHECK_FALSE(spike_latency_encode(0.2, 0.2, 50.0, 20).has_value());
  CHECK_FALSE(spike_latency_encode(0.15, 0.2, 50.0, 20).has_value());

  // round(50 * ln(1 / 0.8)) = round(11.157) = 11.
  auto full = spike_latency_encode(1.0, 0.2, 50.0, 20);
  REQUIRE(full.has_value());
  CHECK(*full == 11);
  // Clamped into the available window.
  CHECK(*spike_latency_encode(1.0, 0.2, 50.0, 10) == 9);
  // Dimmer pixels spike strictly later.
  CHECK(*spike_latency_encode(0.5, 0.2, 50.0, 100) > *full);
  CHECK(*spike_latency_encode(0.25, 0.2, 50.0, 100) >
        *spike_latency_encode(0.5, 0.2, 50.0, 100));

  CHECK_THROWS_AS(spike_latency_encode(1.5, 0.2, 50.0, 20), DomainError);
  CHECK_THROWS_AS(spike_latency_encode(-0.1, 0.2, 50.0, 20), DomainError);
  CHECK_THROWS_AS(spike_latency_encode(0.5, 0.2, 50.0, 0), RangeError);
}

TEST_CASE("synthetic task generation is shaped, labeled and deterministic") {
  TaskSpec spec;
  spec.kind = TaskKind::Rowsum;
  spec.time_steps = 9;
  spec.channels = 2;
  spec.classes = 3;
  spec.train_samples = 96;
  spec.val_samples = 24;
  spec.test_samples = 32;

  RandomSource rng(5);
  Dataset data = synthetic_generate(spec, rng);
  CHECK(data.train.size() == 96);
  CHECK(data.val.size() == 24);
  CHECK(data.test.size() == 32);

  std::vector<std::size_t> seen(spec.classes, 0);
  for (const Sample& s : data.train) {
    REQUIRE(s.inputs.size() == 9);
    for (const Vec& frame : s.inputs) REQUIRE(frame.size() == 2);
    REQUIRE(s.label < 3);
    ++seen[s.label];
  }
  for (std::size_t count : seen) CHECK(count > 0);

  RandomSource replay(5);
  Dataset again = synthetic_generate(spec, replay);
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    CHECK(again.train[i].label == data.train[i].label);
    CHECK(again.train[i].inputs == data.train[i].inputs);
  }

  // Frame repetition doubles the sequence with pairwise-equal frames.
  spec.repeat_inputs = true;
  CHECK(spec.sequence_length() == 18);
  RandomSource rng2(7);
  Dataset doubled = synthetic_generate(spec, rng2);
  for (const Sample& s : doubled.val) {
    REQUIRE(s.inputs.size() == 18);
    for (std::size_t t = 0; t < 18; t += 2) CHECK(s.inputs[t] == s.inputs[t + 1]);
  }

  // Recall task wires one channel per symbol plus a cue channel.
  TaskSpec recall;
  recall.kind = TaskKind::DelayedRecall;
  recall.classes = 4;
  recall.channels = 5;
  recall.time_steps = 8;
  RandomSource rng3(9);
  Dataset recalled = synthetic_generate(recall, rng3);
  for (const Sample& s : recalled.test) CHECK(s.label < 4);

  recall.channels = 4;
  CHECK_THROWS_AS(recall.validate(), ConfigurationError);
  TaskSpec bad;
  bad.classes = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigurationError);
}

TEST_CASE("mode prediction uses frequency, then run length, then index") {
  // Straight majority.
  CHECK(mode_prediction(logit_track({1, 0, 1, 1}, 2)) == 1);
  // Frequency tie broken by the longest consecutive run.
  CHECK(mode_prediction(logit_track({0, 1, 1, 0}, 2)) == 1);
  // Full tie falls to the lowest index.
  CHECK(mode_prediction(logit_track({0, 1}, 2)) == 0);
  CHECK(mode_prediction(logit_track({2, 2, 0, 0}, 3)) == 0);

  // Swapped criteria order: frequency winner 0 (4 vs 3), run winner 1 (3 vs 2).
  std::vector<std::size_t> track = {0, 0, 1, 1, 1, 0, 0};
  CHECK(mode_prediction(logit_track(track, 2), false) == 0);
  CHECK(mode_prediction(logit_track(track, 2), true) == 1);

  CHECK(mode_accuracy(logit_track({1, 1, 0}, 2), 1));
  CHECK_FALSE(mode_accuracy(logit_track({1, 1, 0}, 2), 0));

  CHECK_THROWS_AS(mode_prediction({}), RangeError);
  CHECK_THROWS_AS(mode_prediction({Vec{1.0, 0.0}, Vec{1.0}}), DimensionError);
}

TEST_CASE("doubles print in shortest exact form") {
  for (double v : {0.0, 1.0, -1.0, 0.1, 1.0 / 3.0, 3.14e-3, 6.62607015e-34, 1e300,
                   -2.5e-308, 0.517145392014, 1234567.0}) {
    const std::string text = format_double(v);
    CHECK(std::stod(text) == v);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(2.0) == "2");
}

TEST_CASE("csv tables round-trip through disk") {
  auto dir = temp_dir("csv");
  CsvTable table;
  table.header = {"alpha", "beta", "gamma"};
  table.rows = {{"1", "0.5", "x"}, {"2", "-3.25", "y"}};
  const std::string path = (dir / "table.csv").string();
  write_csv(path, table);

  CsvTable back = read_csv(path);
  CHECK(back.header == table.header);
  CHECK(back.rows == table.rows);

  CHECK_THROWS_AS(read_csv((dir / "missing.csv").string()), IoError);
}

TEST_CASE("ini and json configurations flatten identically") {
  const std::string ini = R"(# run configuration
[task]
kind = rowsum
time_steps = 12

[stack]
cell = simple
width = 8

[train]
seeds = 1,2,3
)";
  auto flat = parse_config_text(ini);
  CHECK(flat.at("task.kind") == "rowsum");
  CHECK(flat.at("task.time_steps") == "12");
  CHECK(flat.at("stack.cell") == "simple");
  CHECK(flat.at("stack.width") == "8");
  CHECK(flat.at("train.seeds") == "1,2,3");

  const std::string json = R"({
    "task": {"kind": "rowsum", "time_steps": 12},
    "stack": {"cell": "simple", "width": 8},
    "train": {"seeds": [1, 2, 3]}
  })";
  CHECK(parse_config_text(json) == flat);

  auto dir = temp_dir("config");
  const std::string path = (dir / "run.ini").string();
  write_text_file(path, ini);
  CHECK(parse_config_file(path) == flat);
}

TEST_CASE("artifact writers emit the documented schemas") {
  auto dir = temp_dir("artifacts");

  std::vector<EpochMetrics> history = {{1, "train", 1.25, 0.5, 3.5},
                                       {1, "val", 1.5, 0.25, 4.5},
                                       {0, "test", 1.1, 0.6, 3.0}};
  const std::string metrics_path = (dir / "metrics.csv").string();
  write_metrics_csv(metrics_path, history);
  CsvTable metrics = read_csv(metrics_path);
  CHECK(metrics.header == std::vector<std::string>{"epoch", "split", "loss", "accuracy",
                                                   "perplexity"});
  REQUIRE(metrics.rows.size() == 3);
  CHECK(metrics.rows[0][1] == "train");
  CHECK(std::stod(metrics.rows[0][2]) == 1.25);

  // Pretrain trace: per-layer multiplier columns, identity on the converged
  // final step.
  StackConfig stack;
  for (int l = 0; l < 2; ++l) {
    CellSpec spec;
    spec.type = CellType::PascalRnn;
    spec.width = 2;
    spec.input_width = 2;
    spec.rho = 1.6;
    stack.layers.push_back(spec);
  }
  RandomSource rng(11);
  auto params = init_stack_params(stack, rng);
  PretrainConfig config;
  config.max_steps = 60;
  RandomSource run_rng(13);
  PretrainReport report = pretrain_run(stack, params, config, run_rng);
  REQUIRE(report.converged);

  const std::string trace_path = (dir / "trace.csv").string();
  write_trace_csv(trace_path, report);
  CsvTable trace = read_csv(trace_path);
  CHECK(trace.header ==
        std::vector<std::string>{"step", "mean_rho", "std_rho", "ema_std", "loss",
                                 "kappa_time_l1", "kappa_time_l2", "kappa_depth_l1",
                                 "kappa_depth_l2"});
  REQUIRE(trace.rows.size() == report.steps_taken);
  CHECK(trace.rows.front()[0] == "1");
  CHECK(std::stod(trace.rows.front()[5]) == doctest::Approx(0.85));
  CHECK(trace.rows.back()[5] == "1");  // converged step applied no multiplier
  CHECK(trace.rows.back()[8] == "1");

  // Norm-profile curve rows: one per origin step.
  std::vector<Vec> inputs(6, Vec{1.0, 1.0});
  StackRun run = stack_forward(stack, params, inputs);
  BoundCurve curve = norm_curve(run, 2);
  const std::string curve_path = (dir / "curve.csv").string();
  write_curve_csv(curve_path, curve, stack.depth());
  CsvTable curves = read_csv(curve_path);
  CHECK(curves.header ==
        std::vector<std::string>{"t", "value", "bound_binomial", "bound_constant"});
  CHECK(curves.rows.size() == 7);
}

TEST_CASE("image task reads the big-endian byte format") {
  auto dir = temp_dir("idx");
  const std::size_t rows = 3, cols = 4, pixels = rows * cols, count = 8;

  std::vector<unsigned char> image_bytes(count * pixels, 0);
  for (std::size_t i = 0; i < count; ++i) {
    image_bytes[i * pixels + 0] = 255;  // always spikes early
    image_bytes[i * pixels + 1] = 40;   // below threshold: never spikes
    image_bytes[i * pixels + 2 + i % 4] = 200;
  }
  std::vector<unsigned char> label_bytes = {0, 1, 2, 3, 0, 1, 2, 3};
  const std::string images_path = (dir / "imgs.idx").string();
  const std::string labels_path = (dir / "lbls.idx").string();
  write_idx_images(images_path, count, rows, cols, image_bytes);
  write_idx_labels(labels_path, label_bytes);

  TaskSpec spec;
  spec.kind = TaskKind::SpikeLatencyImages;
  spec.classes = 4;
  spec.channels = pixels;
  spec.time_steps = 25;
  spec.train_samples = 5;
  spec.val_samples = 2;
  spec.test_samples = 1;
  spec.images_path = images_path;
  spec.labels_path = labels_path;

  RandomSource rng(17);
  Dataset data = image_latency_generate(spec, rng);
  CHECK(data.train.size() == 5);
  CHECK(data.val.size() == 2);
  CHECK(data.test.size() == 1);
  for (const Sample& s : data.train) {
    REQUIRE(s.inputs.size() == 25);
    REQUIRE(s.inputs.front().size() == pixels);
    double mass0 = 0.0, mass1 = 0.0, total = 0.0;
    for (const Vec& frame : s.inputs) {
      mass0 += frame[0];
      mass1 += frame[1];
      for (double v : frame) total += v;
    }
    CHECK(mass0 == 1.0);  // bright pixel spikes exactly once
    CHECK(mass1 == 0.0);  // sub-threshold pixel stays silent
    CHECK(total == doctest::Approx(2.0));  // two active pixels per image
  }

  // Deterministic under the same seed.
  RandomSource replay(17);
  Dataset again = image_latency_generate(spec, replay);
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    CHECK(again.train[i].label == data.train[i].label);
    CHECK(again.train[i].inputs == data.train[i].inputs);
  }

  // Not enough images for the requested splits.
  spec.train_samples = 20;
  RandomSource r2(18);
  CHECK_THROWS_AS(image_latency_generate(spec, r2), IoError);
  spec.train_samples = 5;

  // A label outside the configured class range is refused.
  spec.classes = 3;
  RandomSource r3(19);
  CHECK_THROWS_AS(image_latency_generate(spec, r3), IoError);

  // Corrupt magic numbers are refused.
  spec.classes = 4;
  write_idx_labels(images_path, label_bytes);  // label magic where images belong
  RandomSource r4(20);
  CHECK_THROWS_AS(image_latency_generate(spec, r4), IoError);
}

TEST_CASE("training jobs aggregate per-seed test metrics") {
  auto dir = temp_dir("train");

  RunConfig config;
  config.task.kind = TaskKind::Rowsum;
  config.task.time_steps = 6;
  config.task.channels = 2;
  config.task.classes = 3;
  config.task.train_samples = 48;
  config.task.val_samples = 16;
  config.task.test_samples = 16;

  CellSpec cell;
  cell.type = CellType::SimpleRnn;
  cell.width = 6;
  cell.input_width = 2;
  config.stack.layers = {cell};

  config.batch_size = 16;
  config.max_epochs = 2;
  config.early_stop_patience = 3;
  config.seeds = {1, 2};
  config.output_dir = dir.string();

  TrainSummary summary = train_run(config);
  REQUIRE(summary.seeds.size() == 2);
  CHECK(summary.failed_seeds == 0);
  CHECK(summary.mean_test_accuracy ==
        doctest::Approx((summary.seeds[0].test_accuracy + summary.seeds[1].test_accuracy) /
                        2.0));
  for (const SeedResult& seed : summary.seeds) {
    CHECK_FALSE(seed.failed);
    CHECK(seed.test_accuracy >= 0.0);
    CHECK(seed.test_accuracy <= 1.0);
    CHECK(seed.test_perplexity >= 1.0);
    // Two epochs of train+val rows, then the test row.
    REQUIRE(seed.history.size() == 5);
    CHECK(seed.history[0].split == "train");
    CHECK(seed.history[1].split == "val");
    CHECK(seed.history.back().split == "test");
  }

  // Artifacts: one metrics file per seed plus the aggregate document.
  for (std::uint64_t seed : {1, 2}) {
    CsvTable metrics = read_csv(dir.string() + "/seed_" + std::to_string(seed) +
                                "_metrics.csv");
    CHECK(metrics.rows.size() == 5);
  }
  nlohmann::json aggregate = read_json(dir.string() + "/aggregate.json");
  CHECK(aggregate.at("failed_seeds") == 0);
  CHECK(aggregate.at("mean_test_accuracy").get<double>() ==
        doctest::Approx(summary.mean_test_accuracy));
  CHECK(aggregate.at("seeds").size() == 2);

  // The whole pipeline replays identically.
  RunConfig again = config;
  again.output_dir.clear();
  TrainSummary replay = train_run(again);
  CHECK(replay.mean_test_accuracy == summary.mean_test_accuracy);
  CHECK(replay.seeds[0].test_loss == summary.seeds[0].test_loss);
  CHECK(replay.seeds[1].best_epoch == summary.seeds[1].best_epoch);

  RunConfig bad = config;
  bad.seeds.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigurationError);
  bad = config;
  bad.stack.layers[0].input_width = 3;  // disagrees with task channels
  CHECK_THROWS_AS(bad.validate(), ConfigurationError);
}
