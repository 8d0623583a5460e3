#pragma once

// Experiment commands driven by a resolved RunConfig. Every artifact written
// to output_dir embeds the version string and the resolved config.

#include <string>

#include "config.hpp"
#include "json.hpp"

namespace wq4ts {

enum class Command { kPretrain, kFinetune, kEvaluate };

Command parse_command(const std::string& name);
const char* command_name(Command c);

// What a run would read and write. Touches no files.
nlohmann::json plan_run(Command command, const RunConfig& cfg);

// Executes the command; returns a summary with the artifact paths and the
// test metrics.
nlohmann::json execute_run(Command command, const RunConfig& cfg);

// Loads one domain: "<name>_TRAIN.tsv" pairs with "<name>_TEST.tsv" (UCR),
// anything else is read as a CSV with a date column. Standardized on train.
DomainDataset load_domain(const std::string& path, const RunConfig& cfg);

}  // namespace wq4ts
