#pragma once

#include <stdexcept>
#include <string>

#include "p3ls/types.hpp"

namespace p3ls {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& msg) : Error("dimension mismatch: " + msg) {}
};

class TooFewRows : public Error {
 public:
  explicit TooFewRows(Index rows)
      : Error("too few rows: " + std::to_string(rows)) {}
};

class ZeroVarianceColumn : public Error {
 public:
  explicit ZeroVarianceColumn(Index column)
      : Error("zero variance in column " + std::to_string(column)), column(column) {}
  Index column;
};

class RankDeficient : public Error {
 public:
  explicit RankDeficient(Index component)
      : Error("cross-product matrix numerically zero at component " + std::to_string(component)) {}
};

class SingularRotation : public Error {
 public:
  SingularRotation() : Error("P^T W is numerically singular") {}
};

class InvalidDim : public Error {
 public:
  explicit InvalidDim(const std::string& msg) : Error("invalid dimension: " + msg) {}
};

class MaskGenerationFailed : public Error {
 public:
  explicit MaskGenerationFailed(const std::string& msg) : Error("mask generation failed: " + msg) {}
};

class WrongBlockCount : public Error {
 public:
  explicit WrongBlockCount(const std::string& msg) : Error("wrong block count: " + msg) {}
};

class SingularLocalMask : public Error {
 public:
  SingularLocalMask() : Error("local unmasking matrix is singular") {}
};

class VisibilityViolation : public Error {
 public:
  explicit VisibilityViolation(const std::string& msg) : Error("visibility violation: " + msg) {}
};

class NotTrained : public Error {
 public:
  NotTrained() : Error("federation has not completed training") {}
};

class UnknownDataset : public Error {
 public:
  explicit UnknownDataset(int id) : Error("unknown dataset id " + std::to_string(id)) {}
};

}  // namespace p3ls
