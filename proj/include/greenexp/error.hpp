#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace greenexp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inputs that cannot be combined (coordinate systems, missing files, bad parameters).
struct ConfigError : Error {
    using Error::Error;
};

// Geometry or values outside an operation's domain.
struct DomainError : Error {
    using Error::Error;
};

// Tabular input that references unknown keys. Carries the offending 1-based row numbers.
struct IngestError : Error {
    IngestError(const std::string& what, std::vector<std::size_t> rows)
        : Error(what), rows(std::move(rows)) {}
    std::vector<std::size_t> rows;
};

// Logistic model cannot be fit because the covariates separate the groups.
struct SeparationError : Error {
    using Error::Error;
};

} // namespace greenexp
