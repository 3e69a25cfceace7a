#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace tailgan::cli {

enum ExitCode : int {
  kSuccess = 0,
  kConfigError = 2,
  kIoError = 3,
  kNumericalError = 4,
};

// Parses a JSON document; syntax errors become ConfigError naming
// origin:line:column.
nlohmann::json parse_json_text(const std::string& text, const std::string& origin);
// As above for a file; a missing or unreadable file is an IoError.
nlohmann::json read_json_file(const std::string& path);

// Writes `doc` pretty-printed with a trailing newline.
void write_json_file(const std::string& path, const nlohmann::json& doc);

// Entry point behind the tailgan executable. `args` excludes the program
// name. Logs and warnings go to `log`; help text goes to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log);

}  // namespace tailgan::cli
