#pragma once
// Flat `key=value` text: one pair per line, `#` starts a comment, blank lines
// are ignored. Used for CLI config files and checkpoint headers.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace memcom {

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::filesystem::path& path);
void write_key_values(std::ostream& out, const KeyValues& kv);

std::string kv_string(const KeyValues& kv, const std::string& key, const std::string& fallback);
std::string kv_require(const KeyValues& kv, const std::string& key);
std::uint64_t kv_uint(const KeyValues& kv, const std::string& key, std::uint64_t fallback);
double kv_double(const KeyValues& kv, const std::string& key, double fallback);

/// Shortest-round-trip style formatting (%.17g).
std::string format_double(double x);

std::uint64_t parse_uint(const std::string& text, const std::string& what);
double parse_double(const std::string& text, const std::string& what);

}  // namespace memcom
