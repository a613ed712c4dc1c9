#pragma once

#include <map>
#include <string>
#include <string_view>

namespace taksie {

// Process-wide named warning counters ("counted warnings"). Thread-safe.
void count_warning(std::string_view name);
long warning_count(std::string_view name);
std::map<std::string, long> warning_counts();
void reset_warnings();

}  // namespace taksie
