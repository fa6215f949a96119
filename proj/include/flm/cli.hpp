#pragma once

// Command-line front end. Every command resolves a JSON config
//   defaults < --config file < --override key=value < --seed
// and emits one or more CSV tables. Each table starts with a
// "# config: <resolved JSON>" comment and a header row.
//
// Tables go to stdout, or to --out: a file for single-table commands, a
// directory (one <table>.csv each) otherwise. Failures print
//   error,<ErrorCode>,<message>
// to stderr and return nonzero.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "flm/channels.hpp"
#include "flm/states.hpp"

namespace flm::cli {

using Json = nlohmann::json;

struct CsvTable {
    std::string name;
    std::vector<std::string> comments;  // without the leading '#'
    std::string body;                   // header row and data rows
};

// Built-in defaults for "channel-moments", "figure", "criterion", "homodyne-validate".
Json default_config(const std::string& command, const std::string& figure = "fig1");

// Dotted-path assignment, e.g. "state.n"; intermediate objects are created.
void set_path(Json& config, const std::string& key, Json value);
// key=value; value parsed as JSON when possible, otherwise taken as a string.
void apply_override(Json& config, const std::string& assignment);

// ConfigError with the offending key on malformed specs.
StateModel parse_state(const Json& spec);
TransmittanceModel parse_channel(const Json& spec);
JointChannel parse_joint_channel(const Json& spec, std::size_t modes);

std::vector<CsvTable> cmd_channel_moments(const Json& config);
std::vector<CsvTable> cmd_figure(const Json& config);
std::vector<CsvTable> cmd_criterion(const Json& config);
std::vector<CsvTable> cmd_homodyne_validate(const Json& config);

void write_table(std::ostream& out, const CsvTable& t, const Json& config);

// Full command line without the program name. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flm::cli
