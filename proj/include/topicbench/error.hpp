#pragma once

#include <stdexcept>
#include <string>

namespace topicbench {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Missing or corrupt input archives.
class IngestError : public Error {
public:
    using Error::Error;
};

// Invalid configuration values (K > documents, workers < 1, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Input data violating an operation's precondition (negative matrix entries,
// groups that are too small, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Statistical input for which the statistic is undefined (all-zero paired
// differences, zero variance).
class DegenerateInputError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// A named pipeline stage failed; `stage()` is the stage name.
class PipelineError : public Error {
public:
    PipelineError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

}  // namespace topicbench
