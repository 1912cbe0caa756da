#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vulforge {

/// Every failure the engine reports carries one of these codes. The CLI maps
/// groups of them onto distinct process exit codes.
enum class ErrorCode {
    // probability vectors
    InvalidProbVector,
    NegativeEntry,
    SumOutOfTolerance,
    // ingest
    MalformedRecord,
    DuplicateId,
    UnknownLabel,
    ClassTooSmall,
    UnknownCwe,
    UnpairedSample,
    // learners / external protocol
    EmptyTrainingSet,
    WeightCoverageMismatch,
    DimensionMismatch,
    ProtocolOrderError,
    AwaitingExternal,
    MissingSample,
    MalformedProbVector,
    UnknownSample,
    // ensembles / meta-models
    MemberKMismatch,
    NoRoundsRetained,
    CoverageMismatch,
    LayoutMismatch,
    WidthMismatch,
    // metrics
    LengthMismatch,
    TooManySets,
    // plumbing
    ConfigError,
    IoError,
    VerifyFailed,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &detail);

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

}  // namespace vulforge
