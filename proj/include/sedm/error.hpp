#pragma once

#include <stdexcept>
#include <string>

namespace sedm {

/// Base class for all toolkit errors. Each concrete error carries a stable
/// numeric code used as the process exit code by the CLI.
class Error : public std::runtime_error {
public:
    Error(std::string msg, int code) : std::runtime_error(std::move(msg)), code_(code) {}
    int code() const noexcept { return code_; }

private:
    int code_;
};

struct NoData : Error {
    explicit NoData(const std::string& msg) : Error(msg, 3) {}
};

struct DecodeError : Error {
    explicit DecodeError(const std::string& msg) : Error(msg, 4) {}
};

struct StratificationError : Error {
    explicit StratificationError(const std::string& msg) : Error(msg, 5) {}
};

struct InvalidTransform : Error {
    explicit InvalidTransform(const std::string& msg) : Error(msg, 6) {}
};

struct ContourError : Error {
    explicit ContourError(const std::string& msg) : Error(msg, 7) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg, 8) {}
};

struct DegenerateShape : Error {
    explicit DegenerateShape(const std::string& msg) : Error(msg, 9) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg, 10) {}
};

struct PreconditionError : Error {
    explicit PreconditionError(const std::string& msg) : Error(msg, 11) {}
};

struct CheckpointError : Error {
    explicit CheckpointError(const std::string& msg) : Error(msg, 12) {}
};

struct TrainingDiverged : Error {
    explicit TrainingDiverged(const std::string& msg) : Error(msg, 13) {}
};

struct LabelError : Error {
    explicit LabelError(const std::string& msg) : Error(msg, 14) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg, 15) {}
};

} // namespace sedm
