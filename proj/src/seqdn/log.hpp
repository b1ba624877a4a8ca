#pragma once

#include <cstddef>
#include <string_view>

namespace seqdn::log {

void warn(std::string_view message);
void info(std::string_view message);

// Silences warn/info process-wide. Benchmarks and tests flip this on.
void set_quiet(bool quiet);
bool quiet();

// Warnings issued so far, counted even when quiet.
std::size_t warning_count();

}  // namespace seqdn::log
