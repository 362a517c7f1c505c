#pragma once

#include <map>
#include <string>
#include <vector>

#include "drapefit/types.hpp"

namespace drapefit {

// Shared helpers for the line-oriented text formats (OBJ, CSV, flat
// key-value configs).

std::vector<std::string> split_ws(const std::string& line);
std::vector<std::string> split_char(const std::string& line, char sep);
std::string strip_comment(const std::string& line); // drops '#' suffix, trims

// Formats a double with 17 significant digits (exact round-trip).
std::string format_real(Real v);

bool parse_real(const std::string& token, Real& out);
bool parse_int(const std::string& token, long& out);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Flat `key value...` config. Later keys override earlier ones; '#' starts
// a comment. Unknown keys are the caller's concern.
std::map<std::string, std::string> load_flat_config(const std::string& path);

} // namespace drapefit
