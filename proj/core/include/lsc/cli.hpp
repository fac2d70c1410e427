#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "lsc/train.hpp"

namespace lsc {

CellType cell_type_from_string(const std::string& name);
std::string to_string(CellType type);
Activation activation_from_string(const std::string& name);

// Builders from a flat section.key configuration map (see io::parse_config_file).
// Each consumes the keys it understands; run_config_from_values rejects any
// leftovers so typos fail loudly.
TaskSpec task_from_values(std::map<std::string, std::string>& values);
StackConfig stack_from_values(std::map<std::string, std::string>& values, std::size_t channels);
PretrainConfig pretrain_from_values(std::map<std::string, std::string>& values, bool* enabled);
RunConfig run_config_from_values(std::map<std::string, std::string> values);

// Exit codes: 0 success, 1 a verification/run failed, 2 configuration error.
int cli_main(int argc, char** argv);

}  // namespace lsc
