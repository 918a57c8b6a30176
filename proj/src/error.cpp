#include "spcar/error.hpp"

namespace spcar {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Join: return "join";
        case ErrorKind::Contract: return "contract";
        case ErrorKind::Numerical: return "numerical";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

}  // namespace spcar
