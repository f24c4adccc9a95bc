#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskplan {

/// Base class for every error raised by the library. `code()` is a stable,
/// machine-readable tag used in CLI error reports.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error("InvalidArgument", what) {}
};

class MissingPolicyEntry : public Error {
 public:
  explicit MissingPolicyEntry(std::size_t state)
      : Error("MissingPolicyEntry",
              "no policy entry for reachable non-goal state " + std::to_string(state)),
        state_(state) {}
  std::size_t state() const noexcept { return state_; }

 private:
  std::size_t state_;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, std::vector<std::size_t> witness = {})
      : Error("NonConvergence", what), witness_(std::move(witness)) {}
  /// States of the offending cycle, when one was identified.
  const std::vector<std::size_t>& witness() const noexcept { return witness_; }

 private:
  std::vector<std::size_t> witness_;
};

class ImproperPolicy : public Error {
 public:
  explicit ImproperPolicy(const std::string& what) : Error("ImproperPolicy", what) {}
};

class GammaOutOfRange : public Error {
 public:
  explicit GammaOutOfRange(double gamma)
      : Error("GammaOutOfRange", "gamma must lie in (0,1), got " + std::to_string(gamma)) {}
};

class NoProperPolicy : public Error {
 public:
  explicit NoProperPolicy(const std::string& what) : Error("NoProperPolicy", what) {}
};

class UngroundableGoal : public Error {
 public:
  explicit UngroundableGoal(const std::string& target)
      : Error("UngroundableGoal", "inspection target '" + target + "' has no waypoint") {}
};

class SchemaMismatch : public Error {
 public:
  SchemaMismatch(std::string path, const std::string& what)
      : Error("SchemaMismatch", path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class WaypointInOccupiedVoxel : public Error {
 public:
  explicit WaypointInOccupiedVoxel(const std::string& waypoint)
      : Error("WaypointInOccupiedVoxel", "waypoint '" + waypoint + "' lies in an occupied voxel") {}
};

class DisconnectedPlan : public Error {
 public:
  DisconnectedPlan(const std::string& from, const std::string& to)
      : Error("DisconnectedPlan", "no edge between '" + from + "' and '" + to + "'") {}
};

class InsufficientSamples : public Error {
 public:
  explicit InsufficientSamples(std::size_t n)
      : Error("InsufficientSamples", "need at least 2 samples, got " + std::to_string(n)) {}
};

class EmptyReport : public Error {
 public:
  explicit EmptyReport(const std::string& what) : Error("EmptyReport", what) {}
};

}  // namespace riskplan
