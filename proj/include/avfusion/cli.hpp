#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace avf::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kIoError = 4 };

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct FlagDoc {
  std::string command;  // empty for global flags
  std::string name;     // long form, e.g. --seed
  std::string description;
};

// Every registered flag, read back from the same definitions the parser uses.
std::vector<FlagDoc> flag_table();
// --help output for a subcommand, or the top level when `command` is empty.
std::string help_text(const std::string& command = {});

}  // namespace avf::cli
