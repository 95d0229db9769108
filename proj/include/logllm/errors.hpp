#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace logllm {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad flag value, malformed config file, unsupported option.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data problems: unreadable files, missing labels, malformed records.
class DataError : public Error {
public:
    using Error::Error;
};

/// Failures while running a model (shape mismatches, checkpoint problems).
class RuntimeFailure : public Error {
public:
    using Error::Error;
};

// Re-throws errors raised inside `fn` with the pipeline stage name prefixed,
// keeping the original error category.
template <class Fn>
decltype(auto) with_stage(const std::string& stage, Fn&& fn) {
    try {
        return std::forward<Fn>(fn)();
    } catch (const ConfigError& e) {
        throw ConfigError(stage + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(stage + ": " + e.what());
    } catch (const RuntimeFailure& e) {
        throw RuntimeFailure(stage + ": " + e.what());
    }
}

} // namespace logllm
