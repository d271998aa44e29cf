#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace s2p2::cli {

/// Parses `key = value` lines; `#` starts a comment, blank lines are ignored.
/// Throws ValidationError with the line number on malformed input.
std::vector<std::pair<std::string, std::string>> read_flat_config(const std::filesystem::path& path);

/// Replaces `--config FILE` (or `--config=FILE`) with `--key value` pairs
/// placed right after the subcommand, so flags given on the command line
/// take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args,
                                       const std::vector<std::string>& subcommands);

/// Comma-separated numbers.
std::vector<double> parse_list(const std::string& text);

/// Bench lengths: "lo..hi" (powers of two) or a comma-separated list.
std::vector<std::size_t> parse_lengths(const std::string& text);

/// Writes `j` to a temporary file in the same directory and renames it.
void write_json_atomic(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace s2p2::cli
