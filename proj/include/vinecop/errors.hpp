#pragma once

#include <stdexcept>
#include <string>

namespace vinecop {

// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A distribution or copula parameter lies outside its domain.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

// An estimator could not produce a valid parameter set.
class FitFailure : public Error {
public:
    using Error::Error;
};

// A requested dependence level is not attainable by a family/rotation.
class RangeError : public Error {
public:
    using Error::Error;
};

class LengthMismatch : public Error {
public:
    using Error::Error;
};

// Vine trees violate the spanning-tree, proximity or labeling rules.
class StructureError : public Error {
public:
    using Error::Error;
};

// Conditional variates were requested for an edge whose ancestors are not fitted.
class MissingAncestor : public Error {
public:
    using Error::Error;
};

// A data-space operation was requested on a model without parametric margins.
class MarginsAbsent : public Error {
public:
    using Error::Error;
};

class UnknownVariable : public Error {
public:
    using Error::Error;
};

class MalformedDocument : public Error {
public:
    using Error::Error;
};

// A data file could not be read as a numeric table with a header row.
class MalformedInput : public Error {
public:
    using Error::Error;
};

class SchemaVersionError : public Error {
public:
    using Error::Error;
};

}  // namespace vinecop
