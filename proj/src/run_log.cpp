#include "kgrobust/run_log.hpp"

#include <fmt/core.h>

namespace kgrobust {

void RunLog::warn(std::string message) {
    std::lock_guard lock(mutex_);
    if (echo_) fmt::print(stderr, "warning: {}\n", message);
    warnings_.push_back(std::move(message));
}

void RunLog::merge(const RunLog& other) {
    for (auto& w : other.warnings()) warn(std::move(w));
}

std::vector<std::string> RunLog::warnings() const {
    std::lock_guard lock(mutex_);
    return warnings_;
}

std::size_t RunLog::size() const {
    std::lock_guard lock(mutex_);
    return warnings_.size();
}

} // namespace kgrobust
