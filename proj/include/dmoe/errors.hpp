// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dmoe {

/// Base class for all numerical and fitting failures raised by the library.
/// Argument validation uses std::invalid_argument instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An E-step row whose every component density underflowed.
class NumericalDegeneracyError : public Error {
public:
    NumericalDegeneracyError(std::size_t row, const std::string& what)
        : Error(what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// A mixture component (EM) or target expert (MM) that received no mass.
class EmptyComponentError : public Error {
public:
    EmptyComponentError(std::size_t component, const std::string& what)
        : Error(what), component_(component) {}
    std::size_t component() const noexcept { return component_; }

private:
    std::size_t component_;
};

class SolverFailureError : public Error {
public:
    using Error::Error;
};

class FitFailureError : public Error {
public:
    using Error::Error;
};

class AggregationFailureError : public Error {
public:
    using Error::Error;
};

/// Malformed model document, dataset file or experiment config.
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace dmoe
