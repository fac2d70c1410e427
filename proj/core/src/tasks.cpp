#include "lsc/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <boost/math/distributions/normal.hpp>

#include "lsc/errors.hpp"

namespace lsc {

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "rowsum") return TaskKind::Rowsum;
  if (name == "delayed_recall") return TaskKind::DelayedRecall;
  if (name == "spike_latency_images") return TaskKind::SpikeLatencyImages;
  throw ConfigurationError("unknown task '" + name + "'");
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Rowsum: return "rowsum";
    case TaskKind::DelayedRecall: return "delayed_recall";
    case TaskKind::SpikeLatencyImages: return "spike_latency_images";
  }
  return "rowsum";
}

void TaskSpec::validate() const {
  if (classes < 2) throw ConfigurationError("need at least two classes");
  if (time_steps < 2) throw ConfigurationError("need at least two steps");
  if (channels < 1) throw ConfigurationError("need at least one channel");
  if (train_samples < 1 || val_samples < 1 || test_samples < 1) {
    throw ConfigurationError("every split needs at least one sample");
  }
  if (kind == TaskKind::DelayedRecall && channels != classes + 1) {
    throw ConfigurationError("recall task uses one channel per symbol plus a cue channel: " +
                             std::to_string(classes + 1) + " expected");
  }
  if (kind == TaskKind::SpikeLatencyImages) {
    if (images_path.empty() || labels_path.empty()) {
      throw ConfigurationError("image task needs images_path and labels_path");
    }
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigurationError("threshold must sit in (0,1)");
    if (!(tau_eff > 0.0)) throw ConfigurationError("time constant must be positive");
  }
}

std::optional<std::size_t> spike_latency_encode(double x, double theta, double tau_eff,
                                                std::size_t T) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("latency encoding expects x in [0,1]");
  if (T < 1) throw RangeError("need at least one step");
  if (x <= theta) return std::nullopt;
  const double value = tau_eff * std::log(x / (x - theta));
  if (!std::isfinite(value)) return T - 1;
  const double rounded = std::nearbyint(value);
  if (rounded <= 0.0) return 0;
  if (rounded >= double(T - 1)) return T - 1;
  return std::size_t(rounded);
}

namespace {

std::vector<std::size_t> balanced_labels(std::size_t count, std::size_t classes,
                                         RandomSource& rng) {
  std::vector<std::size_t> order = rng.permutation(count);
  std::vector<std::size_t> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[order[i]] = i % classes;
  return labels;
}

Sample finish_sample(std::vector<Vec> frames, std::size_t label, bool repeat) {
  Sample sample;
  sample.label = label;
  if (!repeat) {
    sample.inputs = std::move(frames);
    return sample;
  }
  sample.inputs.reserve(2 * frames.size());
  for (const Vec& row : frames) {
    sample.inputs.push_back(row);
    sample.inputs.push_back(row);
  }
  return sample;
}

std::vector<Sample> rowsum_split(const TaskSpec& spec, std::size_t count, RandomSource& rng) {
  const std::size_t m = spec.time_steps * spec.channels;
  boost::math::normal_distribution<double> unit;
  std::vector<double> thresholds;
  thresholds.reserve(spec.classes - 1);
  for (std::size_t j = 1; j < spec.classes; ++j) {
    const double q = boost::math::quantile(unit, double(j) / double(spec.classes));
    thresholds.push_back(double(m) / 2.0 + q * std::sqrt(double(m) / 12.0));
  }

  std::vector<Sample> split;
  split.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<Vec> frames(spec.time_steps, Vec(spec.channels));
    double sum = 0.0;
    for (auto& row : frames) {
      for (double& v : row) {
        v = rng.uniform01();
        sum += v;
      }
    }
    std::size_t label = 0;
    for (double threshold : thresholds) label += (sum > threshold) ? 1 : 0;
    split.push_back(finish_sample(std::move(frames), label, spec.repeat_inputs));
  }
  return split;
}

std::vector<Sample> recall_split(const TaskSpec& spec, std::size_t count, RandomSource& rng) {
  std::vector<std::size_t> labels = balanced_labels(count, spec.classes, rng);
  std::vector<Sample> split;
  split.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<Vec> frames(spec.time_steps, Vec(spec.channels));
    frames[0][labels[i]] = 1.0;                          // symbol
    frames[spec.time_steps - 1][spec.classes] = 1.0;     // recall cue
    split.push_back(finish_sample(std::move(frames), labels[i], spec.repeat_inputs));
  }
  return split;
}

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw IoError("truncated IDX header in " + path);
  }
  return (std::uint32_t(bytes[0]) << 24) | (std::uint32_t(bytes[1]) << 16) |
         (std::uint32_t(bytes[2]) << 8) | std::uint32_t(bytes[3]);
}

struct IdxImages {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<unsigned char> pixels;
};

IdxImages read_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  if (read_be32(in, path) != 0x00000803u) throw IoError("bad image magic in " + path);
  IdxImages idx;
  idx.count = read_be32(in, path);
  idx.rows = read_be32(in, path);
  idx.cols = read_be32(in, path);
  idx.pixels.resize(idx.count * idx.rows * idx.cols);
  if (!in.read(reinterpret_cast<char*>(idx.pixels.data()),
               std::streamsize(idx.pixels.size()))) {
    throw IoError("truncated image payload in " + path);
  }
  return idx;
}

std::vector<unsigned char> read_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  if (read_be32(in, path) != 0x00000801u) throw IoError("bad label magic in " + path);
  std::vector<unsigned char> labels(read_be32(in, path));
  if (!in.read(reinterpret_cast<char*>(labels.data()), std::streamsize(labels.size()))) {
    throw IoError("truncated label payload in " + path);
  }
  return labels;
}

}  // namespace

Dataset synthetic_generate(const TaskSpec& spec, RandomSource& rng) {
  spec.validate();
  if (spec.kind == TaskKind::SpikeLatencyImages) return image_latency_generate(spec, rng);
  auto make = (spec.kind == TaskKind::Rowsum) ? rowsum_split : recall_split;
  Dataset data;
  data.train = make(spec, spec.train_samples, rng);
  data.val = make(spec, spec.val_samples, rng);
  data.test = make(spec, spec.test_samples, rng);
  return data;
}

Dataset image_latency_generate(const TaskSpec& spec, RandomSource& rng) {
  spec.validate();
  IdxImages images = read_idx_images(spec.images_path);
  std::vector<unsigned char> labels = read_idx_labels(spec.labels_path);
  if (images.count != labels.size()) throw IoError("image/label counts differ");
  const std::size_t need = spec.train_samples + spec.val_samples + spec.test_samples;
  if (images.count < need) {
    throw IoError("need " + std::to_string(need) + " images, file has " +
                  std::to_string(images.count));
  }
  const std::size_t pixels = images.rows * images.cols;

  std::vector<std::size_t> order = rng.permutation(images.count);
  Dataset data;
  auto encode_one = [&](std::size_t index) {
    Sample sample;
    sample.label = labels[order[index]];
    if (sample.label >= spec.classes) {
      throw IoError("label " + std::to_string(sample.label) + " outside the configured " +
                    std::to_string(spec.classes) + " classes");
    }
    std::vector<Vec> frames(spec.time_steps, Vec(pixels));
    const unsigned char* row = images.pixels.data() + order[index] * pixels;
    for (std::size_t p = 0; p < pixels; ++p) {
      auto spike =
          spike_latency_encode(double(row[p]) / 255.0, spec.theta, spec.tau_eff, spec.time_steps);
      if (spike.has_value()) frames[*spike][p] = 1.0;
    }
    return finish_sample(std::move(frames), sample.label, spec.repeat_inputs);
  };
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < spec.train_samples; ++i) data.train.push_back(encode_one(cursor++));
  for (std::size_t i = 0; i < spec.val_samples; ++i) data.val.push_back(encode_one(cursor++));
  for (std::size_t i = 0; i < spec.test_samples; ++i) data.test.push_back(encode_one(cursor++));
  return data;
}

std::size_t mode_prediction(const std::vector<Vec>& per_step_logits, bool run_first) {
  if (per_step_logits.empty()) throw RangeError("need at least one step of outputs");
  const std::size_t classes = per_step_logits.front().size();
  if (classes == 0) throw RangeError("need at least one class");

  std::vector<std::size_t> counts(classes, 0), best_run(classes, 0);
  std::size_t current = classes, run = 0;
  for (const Vec& logits : per_step_logits) {
    if (logits.size() != classes) throw DimensionError("ragged output rows");
    std::size_t arg = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (logits[c] > logits[arg]) arg = c;
    }
    ++counts[arg];
    run = (arg == current) ? run + 1 : 1;
    current = arg;
    best_run[arg] = std::max(best_run[arg], run);
  }

  std::size_t best = 0;
  bool have = false;
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] == 0) continue;
    if (!have) {
      best = c;
      have = true;
      continue;
    }
    const auto key = [&](std::size_t k) {
      return run_first ? std::make_pair(best_run[k], counts[k])
                       : std::make_pair(counts[k], best_run[k]);
    };
    if (key(c) > key(best)) best = c;  // strictly better; ties keep the lower index
  }
  return best;
}

bool mode_accuracy(const std::vector<Vec>& per_step_logits, std::size_t label, bool run_first) {
  return mode_prediction(per_step_logits, run_first) == label;
}

}  // namespace lsc
