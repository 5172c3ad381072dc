// Exception hierarchy. Every error class maps to a distinct CLI exit code
// (see tools/pglue.cpp).

#ifndef PGLUE_ERRORS_HPP
#define PGLUE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pglue {

/// Filesystem-level failure (open/read/write).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary array file is malformed (bad magic, dtype, shape, size).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Manifest disagrees with the files on disk (missing entry, count mismatch).
class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Assembled scene violates a structural invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Synthetic-scene or run configuration is inconsistent.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No object survived filtering; there is nothing to work on.
class EmptySceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rotation angle within the branch-cut guard band around pi.
class AngleNearPiError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pose was requested at a frame where none is available.
class MissingPoseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Point configuration too degenerate for alignment (collinear, < 3 pairs).
class DegenerateConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point cloud required for scoring is empty.
class EmptyCloudError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pglue

#endif  // PGLUE_ERRORS_HPP
