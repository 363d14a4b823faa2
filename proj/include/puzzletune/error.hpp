#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace puzzletune {

enum class ErrorCode {
    ShapeMismatch,
    NonFinite,
    UnknownPrimitive,
    NotScalar,
    DisconnectedGraph,
    NonDeterministicFunction,
    IndivisiblePatchSize,
    GroupSizeMismatch,
    RecordMismatch,
    UnknownVariant,
    IndivisibleTokenPatch,
    RoleMismatch,
    FileFormatError,
    MalformedHeader,
    TruncatedPayload,
    BadMagic,
    RankOverflow,
    EmptyRelationSet,
    IoError,
    ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries a code so the CLI can emit a
// machine-readable error line.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace puzzletune
