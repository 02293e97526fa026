#pragma once

#include <mutex>
#include <string>
#include <vector>

namespace kgrobust {

// Warning sink for a pipeline run. Messages end up in the run report, so
// stages that run items in parallel should log into a per-item RunLog and
// merge() in item order to keep reports reproducible.
class RunLog {
public:
    explicit RunLog(bool echo_to_stderr = false) : echo_(echo_to_stderr) {}

    RunLog(const RunLog&) = delete;
    RunLog& operator=(const RunLog&) = delete;

    void warn(std::string message);
    void merge(const RunLog& other);

    std::vector<std::string> warnings() const;
    std::size_t size() const;

private:
    bool echo_;
    mutable std::mutex mutex_;
    std::vector<std::string> warnings_;
};

} // namespace kgrobust
