#pragma once

#include <string>
#include <utility>
#include <vector>

namespace robustgp {

inline constexpr const char* kVersion = "0.1.0";

/// (component, version) pairs for the library and its numerical dependencies.
[[nodiscard]] std::vector<std::pair<std::string, std::string>> build_info();

}  // namespace robustgp
