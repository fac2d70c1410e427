#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsc/grid.hpp"
#include "lsc/pretrain.hpp"
#include "lsc/train.hpp"

namespace lsc {

// Shortest decimal form that round-trips a double exactly.
std::string format_double(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

nlohmann::json read_json(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& value);

// Flat key-value configuration. The INI-ish form uses [section] headers and
// key = value lines ('#' starts a comment); keys come back as section.key.
// A file whose first non-space character is '{' is parsed as JSON instead,
// with nested objects flattened the same way and arrays joined by commas.
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Artifact writers. Schemas:
//   metrics: epoch, split, loss, accuracy, perplexity
//   trace:   step, mean_rho, std_rho, ema_std, loss, kappa_time_l*, kappa_depth_l*
//   curves:  t, value, bound_binomial, bound_constant
void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& history);
void write_trace_csv(const std::string& path, const PretrainReport& report);
void write_curve_csv(const std::string& path, const BoundCurve& curve, std::size_t depth);
void write_aggregate_json(const std::string& path, const TrainSummary& summary);

}  // namespace lsc
