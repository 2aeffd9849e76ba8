#include "siot/error.hpp"

namespace siot {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::InvalidParams: return "InvalidParams";
        case ErrorCode::UnknownOwner: return "UnknownOwner";
        case ErrorCode::UnknownDevice: return "UnknownDevice";
        case ErrorCode::EmptyGraph: return "EmptyGraph";
        case ErrorCode::NoCandidates: return "NoCandidates";
        case ErrorCode::NoAvailableCandidates: return "NoAvailableCandidates";
        case ErrorCode::MismatchedRequest: return "MismatchedRequest";
        case ErrorCode::InsufficientDevices: return "InsufficientDevices";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::EmptyTraining: return "EmptyTraining";
        case ErrorCode::EmptyGrid: return "EmptyGrid";
        case ErrorCode::ZeroDenominator: return "ZeroDenominator";
        case ErrorCode::MissingArtifact: return "MissingArtifact";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace siot
