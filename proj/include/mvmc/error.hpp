#pragma once

#include <stdexcept>
#include <string>

namespace mvmc {

/// Base class for all library errors. Subclasses name the failure mode so
/// callers can distinguish recoverable conditions from hard input errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// -- camera geometry ---------------------------------------------------------

class DegenerateDepth : public Error {
 public:
  explicit DegenerateDepth(const std::string& msg) : Error(msg) {}
};

class ZeroBaseline : public Error {
 public:
  explicit ZeroBaseline(const std::string& msg) : Error(msg) {}
};

class DegenerateLine : public Error {
 public:
  explicit DegenerateLine(const std::string& msg) : Error(msg) {}
};

class NoViews : public Error {
 public:
  explicit NoViews(const std::string& msg) : Error(msg) {}
};

// -- triangulation and filtering ---------------------------------------------

class InsufficientViews : public Error {
 public:
  explicit InsufficientViews(const std::string& msg) : Error(msg) {}
};

class DegenerateGeometry : public Error {
 public:
  explicit DegenerateGeometry(const std::string& msg) : Error(msg) {}
};

class BehindCamera : public Error {
 public:
  explicit BehindCamera(const std::string& msg) : Error(msg) {}
};

class TooSparse : public Error {
 public:
  explicit TooSparse(const std::string& msg) : Error(msg) {}
};

// -- kinematic fitting ---------------------------------------------------------

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

class NonFiniteObjective : public Error {
 public:
  explicit NonFiniteObjective(const std::string& msg) : Error(msg) {}
};

// -- dynamics and trajectory optimization -------------------------------------

class DegenerateBone : public Error {
 public:
  explicit DegenerateBone(const std::string& msg) : Error(msg) {}
};

class NonFiniteState : public Error {
 public:
  explicit NonFiniteState(const std::string& msg) : Error(msg) {}
};

class DivergedRollout : public Error {
 public:
  explicit DivergedRollout(const std::string& msg) : Error(msg) {}
};

// -- evaluation ----------------------------------------------------------------

class EmptyLimbSet : public Error {
 public:
  explicit EmptyLimbSet(const std::string& msg) : Error(msg) {}
};

class TooShort : public Error {
 public:
  explicit TooShort(const std::string& msg) : Error(msg) {}
};

class InvalidConfig : public Error {
 public:
  explicit InvalidConfig(const std::string& msg) : Error(msg) {}
};

class MissingInput : public Error {
 public:
  explicit MissingInput(const std::string& msg) : Error(msg) {}
};

}  // namespace mvmc
