#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>

namespace drape {

inline constexpr std::string_view kVersion = "0.1.0";

// Exit codes: 0 ok, 1 runtime failure, 2 usage error, 3 configuration error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace drape
