#pragma once

#include <string>
#include <vector>

namespace s2p2::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point of the s2p2 tool; `args[0]` is the program name.
int run(const std::vector<std::string>& args);

}  // namespace s2p2::cli
