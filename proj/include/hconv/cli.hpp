#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hconv {

inline constexpr const char* kVersion = "1.0.0";

/// Runs one command line (without the program name). Returns 0 on success, 1 for usage or
/// validation errors, 2 for file I/O or format errors. Messages go to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hconv
