#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace netoffload::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

struct CommandOutcome {
  int exit_code = kExitOk;
  std::vector<std::filesystem::path> artifacts;  // files written on success
};

// args excludes the program name. Output goes to out, diagnostics to err.
CommandOutcome dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace netoffload::cli
