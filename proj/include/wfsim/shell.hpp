// CLI, configuration parsing, and result emission. Configs are a sectioned
// key = value format; results are emitted as JSON or CSV documents.
#pragma once

#include "wfsim/engine.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace wfsim::shell {

using Json = nlohmann::ordered_json;

// Sections [state], [angles], [coupling], [geometry], [frame], [mode],
// [runs]. Missing keys take documented defaults; unknown keys, duplicate
// keys, and range violations raise ConfigError with line diagnostics.
// Angle values accept "pi" literals ("pi/3", "2pi", "-pi/2") alongside
// plain decimals; alpha/beta accept "re" or "re,im".
engine::ProtocolConfig parse_config(const std::string& text);

// Canonical document for a config; parse_config(print_config(c)) == c.
std::string print_config(const engine::ProtocolConfig& config);

// Shortest decimal that round-trips the double (shared by JSON and CSV).
std::string num_str(double v);

Json config_json(const engine::ProtocolConfig& config);

Json cmd_run(const engine::ProtocolConfig& config, bool exact, bool mc);
Json cmd_compare_frames(const engine::ProtocolConfig& config, const std::vector<double>& betas);
Json cmd_signalling_test(const engine::ProtocolConfig& config);

struct SweepOptions {
    std::size_t thetaGrid = 21;
    bool mc = false;
};
Json cmd_sweep(const engine::ProtocolConfig& config, const SweepOptions& options);

Json cmd_validate_geometry(const engine::ProtocolConfig& config);

std::string to_json_text(const Json& doc);
// Flattened "key,value" rows; numeric cells match the JSON byte for byte.
std::string to_csv(const Json& doc);
std::string sweep_csv(const Json& sweepDoc);
std::string validation_text(const Json& validateDoc);

// WFSIM_WORKERS (0 or unset = auto). Worker count never changes results.
unsigned env_workers();

int run_cli(int argc, char** argv);

} // namespace wfsim::shell
