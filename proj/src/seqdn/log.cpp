#include "seqdn/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace seqdn::log {
namespace {

std::atomic<bool>& quiet_flag() {
  static std::atomic<bool> flag{std::getenv("SEQDN_QUIET") != nullptr};
  return flag;
}

std::atomic<std::size_t>& warn_counter() {
  static std::atomic<std::size_t> count{0};
  return count;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

void emit(std::string_view level, std::string_view message) {
  if (quiet_flag().load(std::memory_order_relaxed)) return;
  std::lock_guard lock(sink_mutex());
  std::cerr << "[seqdn " << level << "] " << message << '\n';
}

}  // namespace

void warn(std::string_view message) {
  warn_counter().fetch_add(1, std::memory_order_relaxed);
  emit("warn", message);
}
void info(std::string_view message) { emit("info", message); }
void set_quiet(bool q) { quiet_flag().store(q); }
bool quiet() { return quiet_flag().load(); }
std::size_t warning_count() { return warn_counter().load(); }

}  // namespace seqdn::log
