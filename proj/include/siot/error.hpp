#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace siot {

enum class ErrorCode {
    MalformedRow,
    DuplicateId,
    OutOfRange,
    InvalidParams,
    UnknownOwner,
    UnknownDevice,
    EmptyGraph,
    NoCandidates,
    NoAvailableCandidates,
    MismatchedRequest,
    InsufficientDevices,
    SchemaMismatch,
    EmptyTraining,
    EmptyGrid,
    ZeroDenominator,
    MissingArtifact,
    Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace siot
