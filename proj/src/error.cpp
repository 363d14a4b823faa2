#include "puzzletune/error.hpp"

namespace puzzletune {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::UnknownPrimitive: return "UnknownPrimitive";
        case ErrorCode::NotScalar: return "NotScalar";
        case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
        case ErrorCode::NonDeterministicFunction: return "NonDeterministicFunction";
        case ErrorCode::IndivisiblePatchSize: return "IndivisiblePatchSize";
        case ErrorCode::GroupSizeMismatch: return "GroupSizeMismatch";
        case ErrorCode::RecordMismatch: return "RecordMismatch";
        case ErrorCode::UnknownVariant: return "UnknownVariant";
        case ErrorCode::IndivisibleTokenPatch: return "IndivisibleTokenPatch";
        case ErrorCode::RoleMismatch: return "RoleMismatch";
        case ErrorCode::FileFormatError: return "FileFormatError";
        case ErrorCode::MalformedHeader: return "MalformedHeader";
        case ErrorCode::TruncatedPayload: return "TruncatedPayload";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::RankOverflow: return "RankOverflow";
        case ErrorCode::EmptyRelationSet: return "EmptyRelationSet";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace puzzletune
