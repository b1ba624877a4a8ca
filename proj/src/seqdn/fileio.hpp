#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace seqdn {

// Whole-file read; throws InputError naming the path on failure.
std::string read_file(const std::filesystem::path& path);

// Writes to "<path>.tmp" then renames over path.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace seqdn
