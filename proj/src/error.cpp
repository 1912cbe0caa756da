#include "vulforge/error.hpp"

namespace vulforge {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidProbVector: return "InvalidProbVector";
        case ErrorCode::NegativeEntry: return "NegativeEntry";
        case ErrorCode::SumOutOfTolerance: return "SumOutOfTolerance";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::UnknownLabel: return "UnknownLabel";
        case ErrorCode::ClassTooSmall: return "ClassTooSmall";
        case ErrorCode::UnknownCwe: return "UnknownCwe";
        case ErrorCode::UnpairedSample: return "UnpairedSample";
        case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
        case ErrorCode::WeightCoverageMismatch: return "WeightCoverageMismatch";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ProtocolOrderError: return "ProtocolOrderError";
        case ErrorCode::AwaitingExternal: return "AwaitingExternal";
        case ErrorCode::MissingSample: return "MissingSample";
        case ErrorCode::MalformedProbVector: return "MalformedProbVector";
        case ErrorCode::UnknownSample: return "UnknownSample";
        case ErrorCode::MemberKMismatch: return "MemberKMismatch";
        case ErrorCode::NoRoundsRetained: return "NoRoundsRetained";
        case ErrorCode::CoverageMismatch: return "CoverageMismatch";
        case ErrorCode::LayoutMismatch: return "LayoutMismatch";
        case ErrorCode::WidthMismatch: return "WidthMismatch";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::TooManySets: return "TooManySets";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::VerifyFailed: return "VerifyFailed";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string &detail) :
    std::runtime_error(std::string(to_string(code)) + ": " + detail),
    code_(code) {}

}  // namespace vulforge
