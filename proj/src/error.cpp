#include "boxcorner/error.hpp"

namespace boxc {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::BehindCamera: return "behind-camera";
    case ErrorKind::EmptyCloud: return "empty-cloud";
    case ErrorKind::DegenerateBox: return "degenerate-box";
    case ErrorKind::InvalidAxis: return "invalid-axis";
    case ErrorKind::InvalidCrop: return "invalid-crop";
    case ErrorKind::ZeroSize: return "zero-size";
    case ErrorKind::DegenerateConfiguration: return "degenerate-configuration";
    case ErrorKind::InsufficientCorrespondences: return "insufficient-correspondences";
    case ErrorKind::NumericFailure: return "numeric-failure";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Config: return "config";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::InvalidFeature: return "invalid-feature";
    case ErrorKind::Format: return "format";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace boxc
