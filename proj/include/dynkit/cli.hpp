#pragma once

#include "dynkit/core.hpp"
#include "dynkit/systems.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace dynkit {

struct RunConfig {
    std::string command;
    std::string system;  // empty for commands that take no system
    ParamTable params;
    nlohmann::json options = nlohmann::json::object();  // defaults filled in
    std::string output_path;  // empty: stdout
    std::string format;
    long seed = 0;

    nlohmann::json to_json() const;
};

struct SchemaIssue {
    std::string path;  // JSON pointer
    std::string message;
};

class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<SchemaIssue> issues);
    const std::vector<SchemaIssue>& issues() const { return issues_; }

private:
    std::vector<SchemaIssue> issues_;
};

std::vector<std::string> cli_commands();

// Every problem found, in document order; empty when the config is valid.
std::vector<SchemaIssue> check_config(const nlohmann::json& j);
// Throws ConfigError (SchemaViolation) with the issue list.
RunConfig validate_config(const nlohmann::json& j);
RunConfig validate_config(const std::string& text);

// The artifact text for a validated config.
std::string execute(const RunConfig& cfg);

// JSON text with every double at 17 significant digits, two-space indent.
std::string dump_json(const nlohmann::json& j);

// Full command line: returns the exit code (0 ok, 2 usage, 3 numeric).
// Artifacts without an output path and help text go to `out`; error JSON
// goes to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dynkit
