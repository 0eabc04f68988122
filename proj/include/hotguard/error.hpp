#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hotguard {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class StructuralError : public Error { using Error::Error; };
class OverlapError : public Error { using Error::Error; };
class RejectedMoveError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class IntegrityError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class DimensionError : public Error { using Error::Error; };
class TrainingSetupError : public Error { using Error::Error; };
class SelectionError : public Error { using Error::Error; };
class EvaluationError : public Error { using Error::Error; };
class CalibrationError : public Error { using Error::Error; };
class DependencyError : public Error { using Error::Error; };
class InterfaceError : public Error { using Error::Error; };
class EmptyPoiError : public Error { using Error::Error; };

/// Malformed GDSII stream; carries the byte offset of the offending record.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::uint64_t offset)
        : Error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

}  // namespace hotguard
