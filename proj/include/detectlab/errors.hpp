// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace detectlab {

// Every library failure derives from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// q assigns zero probability where p (or the observed token) needs mass.
class SupportError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ProviderError : public Error {
public:
    ProviderError(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    explicit ProviderError(const std::string& what) : Error(what) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_ = 0;
};

// Every step of a document had zero surprisal variance under the auxiliary model.
class DegenerateDistributionError : public Error {
public:
    using Error::Error;
};

}  // namespace detectlab
