#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgrobust {

// Root of every error the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (empty sentence, bad range, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error("config field '" + field + "': " + message), field_(std::move(field)) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

} // namespace kgrobust
