#include "lsc/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/math/special_functions/binomial.hpp>

#include "lsc/errors.hpp"

namespace lsc {

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace {

std::string join_row(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ",";
    line += cells[i];
  }
  return line;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

std::string trim(const std::string& text) {
  std::size_t begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  std::size_t end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

void flatten_json(const nlohmann::json& node, const std::string& prefix,
                  std::map<std::string, std::string>& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      flatten_json(value, prefix.empty() ? key : prefix + "." + key, out);
    }
    return;
  }
  if (node.is_array()) {
    std::string joined;
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (i) joined += ",";
      joined += node[i].is_string() ? node[i].get<std::string>() : node[i].dump();
    }
    out[prefix] = joined;
    return;
  }
  out[prefix] = node.is_string() ? node.get<std::string>() : node.dump();
}

}  // namespace

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << join_row(table.header) << "\n";
  for (const auto& row : table.rows) out << join_row(row) << "\n";
  if (!out) throw IoError("short write to " + path);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  CsvTable table;
  std::string line;
  if (std::getline(in, line)) table.header = split_row(trim(line));
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    table.rows.push_back(split_row(line));
  }
  return table;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("short write to " + path);
}

nlohmann::json read_json(const std::string& path) {
  nlohmann::json value = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (value.is_discarded()) throw IoError("invalid JSON in " + path);
  return value;
}

void write_json(const std::string& path, const nlohmann::json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> values;
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json parsed = nlohmann::json::parse(body, nullptr, false);
    if (parsed.is_discarded()) throw IoError("invalid JSON configuration");
    flatten_json(parsed, "", values);
    return values;
  }

  std::istringstream in(body);
  std::string line, section;
  while (std::getline(in, line)) {
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw IoError("expected key = value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw IoError("empty key in configuration line '" + line + "'");
    values[section.empty() ? key : section + "." + key] = value;
  }
  return values;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& history) {
  CsvTable table;
  table.header = {"epoch", "split", "loss", "accuracy", "perplexity"};
  for (const EpochMetrics& row : history) {
    table.rows.push_back({std::to_string(row.epoch), row.split, format_double(row.loss),
                          format_double(row.accuracy), format_double(row.perplexity)});
  }
  write_csv(path, table);
}

void write_trace_csv(const std::string& path, const PretrainReport& report) {
  const std::size_t depth = report.params.size();
  CsvTable table;
  table.header = {"step", "mean_rho", "std_rho", "ema_std", "loss"};
  for (std::size_t l = 1; l <= depth; ++l) table.header.push_back("kappa_time_l" + std::to_string(l));
  for (std::size_t l = 1; l <= depth; ++l) table.header.push_back("kappa_depth_l" + std::to_string(l));
  for (const PretrainStep& step : report.trace) {
    std::vector<std::string> row = {std::to_string(step.step), format_double(step.stats.mean),
                                    format_double(step.stats.spread),
                                    format_double(step.stats.ema_spread),
                                    format_double(step.loss)};
    // A converged step applied no multiplier; record the identity factor.
    for (std::size_t l = 0; l < depth; ++l) {
      row.push_back(format_double(l < step.kappa_time.size() ? step.kappa_time[l] : 1.0));
    }
    for (std::size_t l = 0; l < depth; ++l) {
      row.push_back(format_double(l < step.kappa_depth.size() ? step.kappa_depth[l] : 1.0));
    }
    table.rows.push_back(std::move(row));
  }
  write_csv(path, table);
}

void write_curve_csv(const std::string& path, const BoundCurve& curve, std::size_t depth) {
  const std::size_t T = curve.carrier.empty() ? 0 : curve.carrier.size() - 1;
  CsvTable table;
  table.header = {"t", "value", "bound_binomial", "bound_constant"};
  for (std::size_t t = 0; t < curve.carrier.size(); ++t) {
    const double n = double(T - t + 1);
    const double shape =
        (n >= double(depth))
            ? boost::math::binomial_coefficient<double>(unsigned(n), unsigned(depth))
            : 0.0;
    table.rows.push_back({std::to_string(t), format_double(curve.carrier[t]),
                          format_double(curve.c1 * shape), format_double(curve.c2)});
  }
  write_csv(path, table);
}

void write_aggregate_json(const std::string& path, const TrainSummary& summary) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const SeedResult& seed : summary.seeds) {
    seeds.push_back({{"seed", seed.seed},
                     {"failed", seed.failed},
                     {"best_epoch", seed.best_epoch},
                     {"test_loss", seed.test_loss},
                     {"test_accuracy", seed.test_accuracy},
                     {"test_perplexity", seed.test_perplexity}});
  }
  nlohmann::json doc = {{"failed_seeds", summary.failed_seeds},
                        {"mean_test_accuracy", summary.mean_test_accuracy},
                        {"std_test_accuracy", summary.std_test_accuracy},
                        {"mean_test_loss", summary.mean_test_loss},
                        {"std_test_loss", summary.std_test_loss},
                        {"seeds", seeds}};
  write_json(path, doc);
}

}  // namespace lsc
