#pragma once

#include <stdexcept>
#include <string>

namespace tiledrop {

// Invalid dimensions, ranges or malformed configuration. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Bug guard: a generator produced a non-finite value.
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File parsed badly, wrong schema_version, or checksum mismatch.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File parsed but violates a structural invariant (length mismatch etc.).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A metric is undefined for the given inputs (e.g. zero variance).
class MetricError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Non-finite gradient or parameter during training.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tiledrop
