#include "lsc/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lsc/errors.hpp"
#include "lsc/grid.hpp"
#include "lsc/io.hpp"
#include "lsc/verify.hpp"

namespace lsc {

CellType cell_type_from_string(const std::string& name) {
  if (name == "pascal") return CellType::PascalRnn;
  if (name == "simple") return CellType::SimpleRnn;
  if (name == "gru") return CellType::Gru;
  if (name == "lstm") return CellType::Lstm;
  if (name == "alif") return CellType::Alif;
  throw ConfigurationError("unknown cell '" + name + "'");
}

std::string to_string(CellType type) {
  switch (type) {
    case CellType::PascalRnn: return "pascal";
    case CellType::SimpleRnn: return "simple";
    case CellType::Gru: return "gru";
    case CellType::Lstm: return "lstm";
    case CellType::Alif: return "alif";
  }
  return "simple";
}

Activation activation_from_string(const std::string& name) {
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "relu") return Activation::Relu;
  if (name == "swish") return Activation::Swish;
  throw ConfigurationError("unknown activation '" + name + "'");
}

namespace {

using ValueMap = std::map<std::string, std::string>;

std::optional<std::string> take(ValueMap& values, const std::string& key) {
  auto it = values.find(key);
  if (it == values.end()) return std::nullopt;
  std::string value = it->second;
  values.erase(it);
  return value;
}

std::size_t to_count(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    long long parsed = std::stoll(text, &used);
    if (used != text.size() || parsed < 0) throw std::invalid_argument(text);
    return std::size_t(parsed);
  } catch (const std::exception&) {
    throw ConfigurationError("'" + key + "' expects a non-negative integer, got '" + text + "'");
  }
}

double to_real(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    double parsed = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigurationError("'" + key + "' expects a number, got '" + text + "'");
  }
}

bool to_flag(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  throw ConfigurationError("'" + key + "' expects a boolean, got '" + text + "'");
}

std::vector<std::uint64_t> to_seed_list(const std::string& key, const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::string cell;
  auto flush = [&] {
    if (cell.empty()) return;
    seeds.push_back(to_count(key, cell));
    cell.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ' ') {
      flush();
    } else {
      cell += c;
    }
  }
  flush();
  return seeds;
}

}  // namespace

TaskSpec task_from_values(ValueMap& values) {
  TaskSpec spec;
  if (auto v = take(values, "task.kind")) spec.kind = task_kind_from_string(*v);
  if (auto v = take(values, "task.time_steps")) spec.time_steps = to_count("task.time_steps", *v);
  if (auto v = take(values, "task.classes")) spec.classes = to_count("task.classes", *v);
  if (auto v = take(values, "task.channels")) {
    spec.channels = to_count("task.channels", *v);
  } else if (spec.kind == TaskKind::DelayedRecall) {
    spec.channels = spec.classes + 1;  // symbols plus the recall cue
  }
  if (auto v = take(values, "task.train_samples")) spec.train_samples = to_count("task.train_samples", *v);
  if (auto v = take(values, "task.val_samples")) spec.val_samples = to_count("task.val_samples", *v);
  if (auto v = take(values, "task.test_samples")) spec.test_samples = to_count("task.test_samples", *v);
  if (auto v = take(values, "task.theta")) spec.theta = to_real("task.theta", *v);
  if (auto v = take(values, "task.tau_eff")) spec.tau_eff = to_real("task.tau_eff", *v);
  if (auto v = take(values, "task.repeat_inputs")) spec.repeat_inputs = to_flag("task.repeat_inputs", *v);
  if (auto v = take(values, "task.images_path")) spec.images_path = *v;
  if (auto v = take(values, "task.labels_path")) spec.labels_path = *v;
  return spec;
}

StackConfig stack_from_values(ValueMap& values, std::size_t channels) {
  CellSpec layer;
  std::size_t depth = 2;
  if (auto v = take(values, "stack.cell")) layer.type = cell_type_from_string(*v);
  if (auto v = take(values, "stack.depth")) depth = to_count("stack.depth", *v);
  if (auto v = take(values, "stack.width")) layer.width = to_count("stack.width", *v);
  if (auto v = take(values, "stack.activation")) layer.activation = activation_from_string(*v);
  if (auto v = take(values, "stack.rho")) layer.rho = to_real("stack.rho", *v);
  if (depth == 0) throw ConfigurationError("'stack.depth' must be at least one");

  StackConfig config;
  config.layers.assign(depth, layer);
  config.layers.front().input_width = channels;
  for (std::size_t l = 1; l < depth; ++l) {
    config.layers[l].input_width = config.layers[l - 1].output_size();
  }
  return config;
}

PretrainConfig pretrain_from_values(ValueMap& values, bool* enabled) {
  PretrainConfig config;
  if (enabled) {
    *enabled = false;
    if (auto v = take(values, "pretrain.enabled")) *enabled = to_flag("pretrain.enabled", *v);
  }
  if (auto v = take(values, "pretrain.rho_target")) config.rho_target = to_real("pretrain.rho_target", *v);
  if (auto v = take(values, "pretrain.weighted")) config.weighted = to_flag("pretrain.weighted", *v);
  if (auto v = take(values, "pretrain.epsilon")) config.epsilon = to_real("pretrain.epsilon", *v);
  if (auto v = take(values, "pretrain.std_threshold")) {
    config.spread_threshold = to_real("pretrain.std_threshold", *v);
  }
  if (auto v = take(values, "pretrain.ema_window")) config.ema_window = to_count("pretrain.ema_window", *v);
  if (auto v = take(values, "pretrain.kappa_low")) config.kappa_low = to_real("pretrain.kappa_low", *v);
  if (auto v = take(values, "pretrain.kappa_high")) config.kappa_high = to_real("pretrain.kappa_high", *v);
  if (auto v = take(values, "pretrain.learning_rate")) config.learning_rate = to_real("pretrain.learning_rate", *v);
  if (auto v = take(values, "pretrain.weight_decay")) config.weight_decay = to_real("pretrain.weight_decay", *v);
  if (auto v = take(values, "pretrain.max_steps")) config.max_steps = to_count("pretrain.max_steps", *v);
  if (auto v = take(values, "pretrain.batch")) config.batch = to_count("pretrain.batch", *v);
  if (auto v = take(values, "pretrain.time_steps")) config.time_steps = to_count("pretrain.time_steps", *v);
  if (auto v = take(values, "pretrain.shuffle")) config.shuffle = to_flag("pretrain.shuffle", *v);
  if (auto v = take(values, "pretrain.grad_mode")) config.grad_mode = grad_mode_from_string(*v);
  if (auto v = take(values, "pretrain.fd_step")) config.fd_step = to_real("pretrain.fd_step", *v);
  return config;
}

RunConfig run_config_from_values(ValueMap values) {
  RunConfig config;
  config.task = task_from_values(values);
  config.stack = stack_from_values(values, config.task.channels);
  if (auto v = take(values, "train.learning_rate")) config.learning_rate = to_real("train.learning_rate", *v);
  if (auto v = take(values, "train.weight_decay")) config.weight_decay = to_real("train.weight_decay", *v);
  if (auto v = take(values, "train.batch_size")) config.batch_size = to_count("train.batch_size", *v);
  if (auto v = take(values, "train.max_epochs")) config.max_epochs = to_count("train.max_epochs", *v);
  if (auto v = take(values, "train.patience")) config.early_stop_patience = to_count("train.patience", *v);
  if (auto v = take(values, "train.seeds")) config.seeds = to_seed_list("train.seeds", *v);
  if (auto v = take(values, "train.output_dir")) config.output_dir = *v;
  if (auto v = take(values, "train.mode_run_first")) config.mode_run_first = to_flag("train.mode_run_first", *v);
  const bool mode_given = values.count("pretrain.grad_mode") > 0;
  config.pretrain = pretrain_from_values(values, &config.pretrain_enabled);
  if (!mode_given) {
    config.pretrain.grad_mode = default_grad_mode(config.stack.layers.front().type,
                                                  config.stack.layers.front().width);
  }
  take(values, "seed");  // handled by the caller's seed resolution
  if (!values.empty()) {
    throw ConfigurationError("unknown configuration key '" + values.begin()->first + "'");
  }
  return config;
}

namespace {

std::optional<std::uint64_t> env_seed() {
  const char* text = std::getenv("LSC_SEED");
  if (!text || !*text) return std::nullopt;
  return to_count("LSC_SEED", text);
}

// Precedence: command-line flag, then LSC_SEED, then the config file.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const ValueMap& values,
                           std::uint64_t fallback) {
  if (flag) return *flag;
  if (auto env = env_seed()) return *env;
  auto it = values.find("seed");
  if (it != values.end()) return to_count("seed", it->second);
  return fallback;
}

int run_verify(const std::string& claim, std::uint64_t seed, std::size_t samples) {
  RandomSource root(seed);
  std::vector<VerificationReport> reports;
  auto append = [&reports](std::vector<VerificationReport> batch) {
    for (auto& r : batch) reports.push_back(std::move(r));
  };
  bool known = false;

  if (claim == "all" || claim == "kostlan") {
    known = true;
    RandomSource moduli_rng = root.child(1);
    append(kostlan_check(8, samples, true, 0.03, moduli_rng));
    RandomSource trend_rng = root.child(2);
    reports.push_back(kostlan_variance_trend({4, 16, 64}, samples, false, trend_rng));
  }
  if (claim == "all" || claim == "init") {
    known = true;
    RandomSource glorot_rng = root.child(3);
    reports.push_back(init_equivalence_check(InitScheme::GlorotNormal, 32, false, samples, 0.10,
                                             glorot_rng));
    RandomSource he_rng = root.child(4);
    reports.push_back(init_equivalence_check(InitScheme::HeNormal, 32, true, samples, 0.10,
                                             he_rng));
    RandomSource orth_rng = root.child(5);
    reports.push_back(init_equivalence_check(InitScheme::Orthogonal, 32, false,
                                             std::min<std::size_t>(samples, 200), 1e-8,
                                             orth_rng));
  }
  if (claim == "all" || claim == "pascal_bound") {
    known = true;
    reports.push_back(pascal_bound_check(10, 100, 1.0));
    reports.push_back(pascal_bound_check(10, 100, 0.5));
    reports.push_back(pascal_bound_check(1, 50, 1.0));
  }
  if (claim == "all" || claim == "psd") {
    known = true;
    RandomSource psd_rng = root.child(6);
    reports.push_back(psd_superadditivity_check(6, samples, psd_rng));
  }
  if (claim == "all" || claim == "halfrho") {
    known = true;
    RandomSource half_rng = root.child(7);
    append(halfrho_linear_bound_check(CellType::PascalRnn, 3, {25, 50, 100, 200}, 128, half_rng));
    RandomSource single_rng = root.child(8);
    append(halfrho_linear_bound_check(CellType::PascalRnn, 1, {25, 50, 100, 200}, 128,
                                      single_rng));
  }
  if (!known) {
    throw ConfigurationError("unknown claim '" + claim +
                             "' (kostlan, init, pascal_bound, psd, halfrho, all)");
  }

  bool all_pass = true;
  for (const VerificationReport& report : reports) {
    std::cout << report_json(report) << "\n";
    all_pass = all_pass && report.pass;
  }
  return all_pass ? 0 : 1;
}

int run_pascal(std::size_t depth, std::size_t time_steps, double rho, const std::string& out,
               std::uint64_t seed) {
  StackConfig config;
  CellSpec layer;
  layer.type = CellType::PascalRnn;
  layer.width = 1;
  layer.input_width = 1;
  layer.rho = rho;
  config.layers.assign(depth, layer);

  RandomSource rng(seed);
  std::vector<CellParams> params = init_stack_params(config, rng);
  std::vector<Vec> inputs(time_steps, Vec{1.0});
  StackRun run = stack_forward(config, params, inputs);
  BoundCurve curve = norm_curve(run, 2);
  write_curve_csv(out, curve, depth);

  nlohmann::json doc = {{"kind", curve.kind},
                        {"c1", curve.c1},
                        {"c1_max_rel_dev", curve.c1_max_rel_dev},
                        {"c2", curve.c2},
                        {"c2_max_rel_dev", curve.c2_max_rel_dev},
                        {"out", out}};
  std::cout << doc.dump() << "\n";
  return 0;
}

int run_pretrain(const StackConfig& stack, const PretrainConfig& config, std::uint64_t seed,
                 const std::string& out) {
  RandomSource root(seed);
  RandomSource init_rng = root.child(0);
  std::vector<CellParams> params = init_stack_params(stack, init_rng);
  RandomSource pre_rng = root.child(3);
  PretrainReport report = pretrain_run(stack, params, config, pre_rng);
  write_trace_csv(out, report);

  nlohmann::json doc = {{"converged", report.converged},
                        {"steps", report.steps_taken},
                        {"mean_rho", report.final_stats.mean},
                        {"std_rho", report.final_stats.spread},
                        {"ema_std", report.final_stats.ema_spread},
                        {"degenerate_radius", report.degenerate_radius},
                        {"degenerate_eigenpair", report.degenerate_eigenpair},
                        {"trace", out}};
  std::cout << doc.dump() << "\n";
  return report.converged ? 0 : 1;
}

int run_train(RunConfig config) {
  TrainSummary summary = train_run(config);
  nlohmann::json seeds = nlohmann::json::array();
  for (const SeedResult& seed : summary.seeds) {
    seeds.push_back({{"seed", seed.seed},
                     {"failed", seed.failed},
                     {"test_accuracy", seed.test_accuracy},
                     {"test_loss", seed.test_loss}});
  }
  nlohmann::json doc = {{"mean_test_accuracy", summary.mean_test_accuracy},
                        {"std_test_accuracy", summary.std_test_accuracy},
                        {"mean_test_loss", summary.mean_test_loss},
                        {"std_test_loss", summary.std_test_loss},
                        {"failed_seeds", summary.failed_seeds},
                        {"seeds", seeds}};
  std::cout << doc.dump() << "\n";
  return summary.failed_seeds == summary.seeds.size() ? 1 : 0;
}

int run_report(const std::string& dir) {
  nlohmann::json aggregate = read_json(dir + "/aggregate.json");

  bool consistent = true;
  std::vector<double> accuracies, losses;
  std::size_t checked = 0;
  for (const auto& entry : aggregate.at("seeds")) {
    if (entry.at("failed").get<bool>()) continue;
    const auto seed = entry.at("seed").get<std::uint64_t>();
    CsvTable table = read_csv(dir + "/seed_" + std::to_string(seed) + "_metrics.csv");
    bool found = false;
    for (const auto& row : table.rows) {
      if (row.size() < 5 || row[1] != "test") continue;
      found = true;
      ++checked;
      const double loss = to_real("loss", row[2]);
      const double accuracy = to_real("accuracy", row[3]);
      accuracies.push_back(accuracy);
      losses.push_back(loss);
      consistent = consistent && loss == entry.at("test_loss").get<double>() &&
                   accuracy == entry.at("test_accuracy").get<double>();
    }
    consistent = consistent && found;
  }

  auto mean_of = [](const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return xs.empty() ? 0.0 : sum / double(xs.size());
  };
  auto std_of = [](const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return std::sqrt(sq / double(xs.size() - 1));
  };
  const double mean_accuracy = mean_of(accuracies);
  const double mean_loss = mean_of(losses);
  consistent = consistent && mean_accuracy == aggregate.at("mean_test_accuracy").get<double>() &&
               std_of(accuracies, mean_accuracy) == aggregate.at("std_test_accuracy").get<double>() &&
               mean_loss == aggregate.at("mean_test_loss").get<double>() &&
               std_of(losses, mean_loss) == aggregate.at("std_test_loss").get<double>();

  nlohmann::json doc = {{"aggregate", aggregate},
                        {"seeds_checked", checked},
                        {"consistent", consistent}};
  std::cout << doc.dump(2) << "\n";
  return consistent ? 0 : 1;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Stability pre-training and verification toolkit for deep recurrent stacks"};
  app.require_subcommand(1);

  auto* verify = app.add_subcommand("verify", "Run the verification suites, one JSON line each");
  std::string claim = "all";
  std::uint64_t verify_seed = 0;
  std::size_t samples = 2000;
  verify->add_option("--claim", claim, "Suite: kostlan, init, pascal_bound, psd, halfrho, all");
  verify->add_option("--seed", verify_seed, "Root seed");
  verify->add_option("--samples", samples, "Monte Carlo sample count");

  auto* pascal = app.add_subcommand("pascal", "Write the geometric-cell derivative curve");
  std::size_t pascal_depth = 10, pascal_time = 100;
  double pascal_rho = 1.0;
  std::string pascal_out = "pascal_curve.csv";
  std::uint64_t pascal_seed = 0;
  pascal->add_option("--depth", pascal_depth, "Layers");
  pascal->add_option("--time", pascal_time, "Steps");
  pascal->add_option("--rho", pascal_rho, "Transition coefficient");
  pascal->add_option("--out", pascal_out, "Curve CSV path");
  pascal->add_option("--seed", pascal_seed, "Root seed");

  auto* pretrain = app.add_subcommand("pretrain", "Drive a stack to the target spectral radius");
  std::string pre_cell = "pascal";
  std::size_t pre_depth = 2, pre_width = 4;
  double pre_target = 1.0;
  bool pre_weighted = false;
  std::string pre_config_path, pre_out = "pretrain_trace.csv";
  std::uint64_t pre_seed = 0;
  std::string pre_mode;
  pretrain->add_option("--cell", pre_cell, "pascal, simple, gru, lstm, alif");
  pretrain->add_option("--depth", pre_depth, "Layers");
  pretrain->add_option("--width", pre_width, "Units per layer");
  pretrain->add_option("--rho-target", pre_target, "Target spectral radius");
  pretrain->add_flag("--weighted", pre_weighted, "Split the target over the two directions");
  pretrain->add_option("--grad-mode", pre_mode,
                       "kappa_only, finite_difference, eigen_adjoint (default: per cell)");
  pretrain->add_option("--config", pre_config_path, "Configuration file");
  pretrain->add_option("--out", pre_out, "Trace CSV path");
  pretrain->add_option("--seed", pre_seed, "Root seed");

  auto* train = app.add_subcommand("train", "Train a stack on a task");
  std::string train_config_path, train_seeds;
  train->add_option("--config", train_config_path, "Configuration file")->required();
  train->add_option("--seeds", train_seeds, "Comma-separated seed list override");

  auto* report = app.add_subcommand("report", "Re-aggregate and cross-check an output directory");
  std::string report_dir;
  report->add_option("dir", report_dir, "Training output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (app.got_subcommand(verify)) {
      std::optional<std::uint64_t> flag;
      if (verify->count("--seed")) flag = verify_seed;
      return run_verify(claim, resolve_seed(flag, {}, 0), samples);
    }
    if (app.got_subcommand(pascal)) {
      std::optional<std::uint64_t> flag;
      if (pascal->count("--seed")) flag = pascal_seed;
      return run_pascal(pascal_depth, pascal_time, pascal_rho, pascal_out,
                        resolve_seed(flag, {}, 0));
    }
    if (app.got_subcommand(pretrain)) {
      ValueMap values;
      if (!pre_config_path.empty()) values = parse_config_file(pre_config_path);
      // Command-line flags override the file.
      if (pretrain->count("--cell")) values["stack.cell"] = pre_cell;
      else values.try_emplace("stack.cell", pre_cell);
      if (pretrain->count("--depth")) values["stack.depth"] = std::to_string(pre_depth);
      else values.try_emplace("stack.depth", std::to_string(pre_depth));
      if (pretrain->count("--width")) values["stack.width"] = std::to_string(pre_width);
      else values.try_emplace("stack.width", std::to_string(pre_width));
      if (pretrain->count("--rho-target")) values["pretrain.rho_target"] = format_double(pre_target);
      if (pretrain->count("--weighted")) values["pretrain.weighted"] = "true";
      if (pretrain->count("--grad-mode")) values["pretrain.grad_mode"] = pre_mode;

      StackConfig stack = stack_from_values(values, 0);
      stack.layers.front().input_width = stack.layers.front().width;
      const bool mode_given = values.count("pretrain.grad_mode") > 0;
      bool enabled = false;
      PretrainConfig config = pretrain_from_values(values, &enabled);
      if (!mode_given) {
        config.grad_mode =
            default_grad_mode(stack.layers.front().type, stack.layers.front().width);
      }
      std::optional<std::uint64_t> flag;
      if (pretrain->count("--seed")) flag = pre_seed;
      const std::uint64_t seed = resolve_seed(flag, values, 0);
      take(values, "seed");
      take(values, "pretrain.enabled");
      return run_pretrain(stack, config, seed, pre_out);
    }
    if (app.got_subcommand(train)) {
      ValueMap values = parse_config_file(train_config_path);
      const std::uint64_t seed = resolve_seed(std::nullopt, values, 0);
      RunConfig config = run_config_from_values(values);
      if (!train_seeds.empty()) {
        config.seeds = to_seed_list("--seeds", train_seeds);
      } else if (auto env = env_seed()) {
        config.seeds = {*env};
      } else if (config.seeds.empty()) {
        config.seeds = {seed};
      }
      return run_train(std::move(config));
    }
    if (app.got_subcommand(report)) {
      return run_report(report_dir);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace lsc
