#pragma once

#include <stdexcept>
#include <string>

namespace sushi {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (wrong channel count, bad range...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Input already has the requested form, e.g. converting a grayscale raster to grayscale.
class AlreadyGrayscale : public InvalidArgument {
public:
    AlreadyGrayscale() : InvalidArgument("raster is already single-channel") {}
};

/// Tensor or patch dimensions do not match what an operation expects.
class ShapeMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Too few points were supplied to a fit.
class TooFewPoints : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// The least-squares conic is not an ellipse (line, parabola, hyperbola).
class DegenerateConic : public Error {
public:
    using Error::Error;
};

/// Reconstruction was asked to refine a prediction without any gathered fragments.
class NoEvidence : public Error {
public:
    NoEvidence() : Error("no evidence gathered for prediction") {}
};

/// File read/write or decode failure.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace sushi
