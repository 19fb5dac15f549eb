#pragma once

#include <stdexcept>
#include <string>

namespace bvpc {

/// Point lies behind or grazes the image plane (depth <= kProjectionEps).
class DegenerateProjection : public std::runtime_error {
 public:
  explicit DegenerateProjection(const std::string& what) : std::runtime_error(what) {}
};

/// Rotation axis between two antiparallel unit vectors is undefined.
class AntiparallelInput : public std::runtime_error {
 public:
  explicit AntiparallelInput(const std::string& what) : std::runtime_error(what) {}
};

class BadReferenceLength : public std::invalid_argument {
 public:
  explicit BadReferenceLength(const std::string& what) : std::invalid_argument(what) {}
};

class InvalidInitialState : public std::invalid_argument {
 public:
  explicit InvalidInitialState(const std::string& what) : std::invalid_argument(what) {}
};

/// Landmark is not visible from the requested waypoint pose.
class ReferenceInfeasible : public std::runtime_error {
 public:
  explicit ReferenceInfeasible(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent scenario configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bvpc
