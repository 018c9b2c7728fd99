#pragma once

#include <stdexcept>
#include <string>

namespace osiq {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input data: bad CSV, duplicate ids, empty corpora.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Requested split cannot be built from the given corpus.
class PartitionError : public Error {
public:
    using Error::Error;
};

/// Invalid argument or parameter combination.
class ParamError : public Error {
public:
    using Error::Error;
};

/// Training could not proceed (single class, shape mismatch).
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Vector/matrix dimension mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A model fit failed (degenerate data, non-convergence).
class FitError : public Error {
public:
    using Error::Error;
};

/// A numeric operation hit an invalid regime (non-SPD matrix, domain error).
class NumericError : public Error {
public:
    using Error::Error;
};

/// A metric is undefined for the given input.
class MetricError : public Error {
public:
    using Error::Error;
};

/// Experiment configuration file problems; message carries line/field info.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace osiq
