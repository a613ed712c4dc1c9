#include "taksie/numerics/diagnostics.hpp"

#include <mutex>

namespace taksie {
namespace {

std::mutex& counter_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, long, std::less<>>& counters() {
  static std::map<std::string, long, std::less<>> c;
  return c;
}

}  // namespace

void count_warning(std::string_view name) {
  std::lock_guard lock(counter_mutex());
  auto& c = counters();
  auto it = c.find(name);
  if (it == c.end()) {
    c.emplace(std::string(name), 1);
  } else {
    ++it->second;
  }
}

long warning_count(std::string_view name) {
  std::lock_guard lock(counter_mutex());
  auto it = counters().find(name);
  return it == counters().end() ? 0 : it->second;
}

std::map<std::string, long> warning_counts() {
  std::lock_guard lock(counter_mutex());
  return {counters().begin(), counters().end()};
}

void reset_warnings() {
  std::lock_guard lock(counter_mutex());
  counters().clear();
}

}  // namespace taksie
