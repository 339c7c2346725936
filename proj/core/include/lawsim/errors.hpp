#pragma once

#include <stdexcept>
#include <string>

namespace lawsim {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Country statistics loading / validation.
class SchemaError : public Error {
public:
    using Error::Error;
};
class DistributionError : public Error {
public:
    using Error::Error;
};
class ValueError : public Error {
public:
    using Error::Error;
};
class MissingEducationIncome : public Error {
public:
    using Error::Error;
};

// Profile / prompt rendering.
class UnknownEducationLabel : public Error {
public:
    using Error::Error;
};
class UnknownReligionLabel : public Error {
public:
    using Error::Error;
};
class MissingPunishmentText : public Error {
public:
    using Error::Error;
};

// Decision parsing and backends.
class UnparseableResponse : public Error {
public:
    using Error::Error;
};
class OutOfRangeLetter : public Error {
public:
    using Error::Error;
};
class BackendUnavailable : public Error {
public:
    using Error::Error;
};

// Legal system.
class LegalSystemDisabled : public Error {
public:
    using Error::Error;
};
class InsufficientFunds : public Error {
public:
    using Error::Error;
};
class UnknownBaseQuantity : public Error {
public:
    using Error::Error;
};

// Harness / configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace lawsim
