#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hitlist {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedAddress : public Error {
public:
    MalformedAddress(std::string text, std::size_t offset)
        : Error("malformed IPv6 address '" + text + "' at offset " + std::to_string(offset)),
          text_(std::move(text)), offset_(offset) {}

    const std::string& text() const noexcept { return text_; }
    /// byte offset of the first invalid character (text length if the input ended early)
    std::size_t offset() const noexcept { return offset_; }

private:
    std::string text_;
    std::size_t offset_;
};

class MalformedPrefix : public Error {
public:
    using Error::Error;
};

/// Raised by line-oriented loaders; carries the 1-based line number.
class LineError : public Error {
public:
    LineError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class MalformedCidr : public LineError {
public:
    using LineError::LineError;
};

class MalformedRow : public LineError {
public:
    using LineError::LineError;
};

class FatalFormat : public Error {
public:
    using Error::Error;
};

class InvalidThreshold : public Error {
public:
    using Error::Error;
};

class EmptyRoutingTable : public Error {
public:
    using Error::Error;
};

class MissingRoutingTable : public Error {
public:
    using Error::Error;
};

class ResolverUnavailable : public Error {
public:
    using Error::Error;
};

class EmptyIntervals : public Error {
public:
    using Error::Error;
};

class InsufficientPrivilege : public Error {
public:
    using Error::Error;
};

class WindowExceedsMatrix : public Error {
public:
    using Error::Error;
};

class UnknownScanType : public Error {
public:
    using Error::Error;
};

class CorruptArtifact : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace hitlist
