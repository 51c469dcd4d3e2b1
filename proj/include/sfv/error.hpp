#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sfv {

/// Root of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid election configuration or mismatched parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Config file diagnostics carry the offending line.
class ConfigParseError : public ConfigError {
public:
    ConfigParseError(std::size_t line, const std::string& what)
        : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// The protocol was driven out of order (double vote, busy machine, open session at close).
class ProtocolError : public Error {
public:
    enum class Kind { DoubleVote, SessionConflict, ProtocolViolation, UnknownSession };
    ProtocolError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// No admissible decoy remains for some candidate.
class DecoyStarvation : public Error {
public:
    DecoyStarvation(unsigned candidate, const std::string& what) : Error(what), candidate_(candidate) {}
    unsigned candidate() const noexcept { return candidate_; }

private:
    unsigned candidate_;
};

class MalformedReceipt : public Error {
public:
    using Error::Error;
};

class UnknownKey : public Error {
public:
    using Error::Error;
};

/// A published ledger disagrees with itself (e.g. negative net total).
class LedgerInconsistency : public Error {
public:
    using Error::Error;
};

/// A verification step needs a file that was not supplied.
class IncompleteEvidence : public Error {
public:
    using Error::Error;
};

/// Out-of-domain arguments to the statistical and attack models.
class DomainError : public Error {
public:
    using Error::Error;
};

}  // namespace sfv
