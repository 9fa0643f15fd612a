#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace skfnav::io {

/// Round-trippable decimal: 17 significant digits, "nan" for NaN.
std::string format_double(double value);

std::string join(const std::vector<std::string>& fields, char sep = ',');

/// Splits one CSV line on commas; no quoting support (none of our files need it).
std::vector<std::string> split_csv_line(const std::string& line);

double parse_double(const std::string& field, const std::string& context);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// Throws ConfigError naming the first key of `j` not in `known`.
void check_keys(const nlohmann::json& j, const std::set<std::string>& known,
                const std::string& context);

/// FNV-1a 64-bit digest of a string, hex encoded.
std::string fnv1a_hex(const std::string& text);
std::uint64_t fnv1a(const std::string& text);

/// SplitMix64 mixer used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace skfnav::io
