#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fdcnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

// "start:end:step" (inclusive when step divides the range), a comma list, or
// a single value. ConfigError on malformed input.
std::vector<double> parse_snr_grid(std::string_view text);

std::size_t edit_distance(std::string_view a, std::string_view b);
// Nearest candidate within distance 3, or "" when nothing is close.
std::string closest_match(std::string_view word, const std::vector<std::string>& candidates);

}  // namespace fdcnet::cli
