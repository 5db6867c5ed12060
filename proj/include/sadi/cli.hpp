#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>

#include "sadi/config.hpp"

namespace sadi {

// Parses argv, runs the subcommand and returns the process exit status.
// Errors become one {"error_kind", "detail"} line on err plus an error JSON
// next to the configured output; status is 1 in that case, else 0.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Runs an already-validated configuration. Throws sadi::Error.
void run_subcommand(const RunConfig& config, std::ostream& out, std::ostream& err);

std::string sha256_hex(const std::filesystem::path& file);
std::string sha256_hex_bytes(std::string_view bytes);

// Where the subcommand's provenance / error artifacts go.
std::filesystem::path provenance_path(const RunConfig& config);
std::filesystem::path error_path(const std::string& subcommand, const std::filesystem::path& out);

}  // namespace sadi
