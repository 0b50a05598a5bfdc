#pragma once

#include <stdexcept>
#include <string>

namespace tbm {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- tensor core ---------------------------------------------------------

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& what = "shape mismatch") : Error(what) {}
};

class KernelTooLong : public Error {
 public:
  explicit KernelTooLong(const std::string& what = "kernel longer than input") : Error(what) {}
};

class InvalidProbability : public Error {
 public:
  explicit InvalidProbability(const std::string& what = "probability outside [0,1)") : Error(what) {}
};

class NotScalar : public Error {
 public:
  explicit NotScalar(const std::string& what = "tensor is not a scalar") : Error(what) {}
};

class EmptyGradient : public Error {
 public:
  explicit EmptyGradient(const std::string& what = "parameter has no gradient") : Error(what) {}
};

class ConfigInvalid : public Error {
 public:
  explicit ConfigInvalid(const std::string& what = "invalid model configuration") : Error(what) {}
};

// --- preprocessing --------------------------------------------------------

class EmptyCorpus : public Error {
 public:
  explicit EmptyCorpus(const std::string& what = "empty corpus") : Error(what) {}
};

class MissingGeology : public Error {
 public:
  explicit MissingGeology(int ring)
      : Error("no geology record for ring " + std::to_string(ring)), ring_(ring) {}
  int ring() const { return ring_; }

 private:
  int ring_;
};

class AllMissing : public Error {
 public:
  explicit AllMissing(const std::string& what = "series has no known values") : Error(what) {}
};

class WindowTooLarge : public Error {
 public:
  explicit WindowTooLarge(const std::string& what = "window larger than series") : Error(what) {}
};

class ZeroVariance : public Error {
 public:
  explicit ZeroVariance(const std::string& what = "series has zero variance") : Error(what) {}
};

class ZeroRange : public Error {
 public:
  explicit ZeroRange(const std::string& what = "series has zero range") : Error(what) {}
};

class NonPositiveValue : public Error {
 public:
  explicit NonPositiveValue(const std::string& what = "box-cox requires strictly positive values")
      : Error(what) {}
};

class TooFewSamples : public Error {
 public:
  explicit TooFewSamples(const std::string& what = "too few samples to split") : Error(what) {}
};

// --- models ---------------------------------------------------------------

class EmptyDataset : public Error {
 public:
  explicit EmptyDataset(const std::string& what = "empty dataset") : Error(what) {}
};

class DimMismatch : public Error {
 public:
  explicit DimMismatch(const std::string& what = "dimension mismatch") : Error(what) {}
};

class ConstantTarget : public Error {
 public:
  explicit ConstantTarget(const std::string& what = "target series is constant") : Error(what) {}
};

class LengthMismatch : public Error {
 public:
  explicit LengthMismatch(const std::string& what = "length mismatch") : Error(what) {}
};

class RangeViolation : public Error {
 public:
  explicit RangeViolation(const std::string& what = "values outside [0,1]") : Error(what) {}
};

class EmptyScores : public Error {
 public:
  explicit EmptyScores(const std::string& what = "no scores to calibrate on") : Error(what) {}
};

class NoLabels : public Error {
 public:
  explicit NoLabels(const std::string& what = "labeled set is empty") : Error(what) {}
};

// --- synthetic data --------------------------------------------------------

class NoRegimes : public Error {
 public:
  explicit NoRegimes(const std::string& what = "at least one regime required") : Error(what) {}
};

class EmptyGeology : public Error {
 public:
  explicit EmptyGeology(const std::string& what = "geology record list is empty") : Error(what) {}
};

class FaultOutOfBounds : public Error {
 public:
  explicit FaultOutOfBounds(const std::string& what = "fault window outside series bounds")
      : Error(what) {}
};

// --- files / integrity ------------------------------------------------------

class SchemaMismatch : public Error {
 public:
  explicit SchemaMismatch(std::string column)
      : Error("schema mismatch: column '" + column + "'"), column_(std::move(column)) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

class ManifestMismatch : public Error {
 public:
  explicit ManifestMismatch(const std::string& what = "checkpoint/manifest hash mismatch")
      : Error(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace tbm
