#pragma once

#include <stdexcept>
#include <string>

namespace elastoscan {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Geometry / mesh
struct InvalidGeometryError : Error { using Error::Error; };
struct EmptyPatchError : Error { using Error::Error; };
struct AlignmentError : Error { using Error::Error; };

// Assembly / solve
struct InvalidMaterialError : Error { using Error::Error; };
struct ResonanceError : Error { using Error::Error; };
struct DimensionError : Error { using Error::Error; };

// Spectral tests
struct InvalidMatrixError : Error { using Error::Error; };
struct NoGapError : Error { using Error::Error; };

// Phantoms
struct ContainmentError : Error { using Error::Error; };
struct OverlapError : Error { using Error::Error; };

// Measurement pipeline
struct TimeAlignmentError : Error { using Error::Error; };
struct InsufficientDataError : Error { using Error::Error; };
struct CoverageError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };

// Configuration / files
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

} // namespace elastoscan
