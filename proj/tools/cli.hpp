#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pbn::cli {

enum ExitCode : int { ok = 0, usage = 1, failure = 2 };

/// Runs one command line (args excludes the program name). Records go to out,
/// diagnostics and usage text to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace pbn::cli
