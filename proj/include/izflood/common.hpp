#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace izflood {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr double kGravity = 9.81;  // m/s2

/// Bad or inconsistent input data (files, configs, violated preconditions).
/// CLI maps this family to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed text input; message carries line (1-based) and token position.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& msg, std::size_t line, std::size_t column = 0)
      : ValidationError(format(msg, line, column)), line_(line), column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  static std::string format(const std::string& msg, std::size_t line, std::size_t column) {
    std::string s = "line " + std::to_string(line);
    if (column > 0) s += ", token " + std::to_string(column);
    return s + ": " + msg;
  }
  std::size_t line_ = 0;
  std::size_t column_ = 0;
};

/// A volume query beyond the top of a level-volume table. Carries the excess
/// volume so the caller can decide policy (halt, report, redistribute).
class TableOverflow : public std::runtime_error {
 public:
  TableOverflow(double excess_m3, double top_level_m)
      : std::runtime_error("volume exceeds table range by " + std::to_string(excess_m3) +
                           " m3 (table top " + std::to_string(top_level_m) + " m)"),
        excess_m3_(excess_m3),
        top_level_m_(top_level_m) {}

  double excess_m3() const { return excess_m3_; }
  double top_level_m() const { return top_level_m_; }

 private:
  double excess_m3_;
  double top_level_m_;
};

/// Unrecoverable numerical condition mid-run (table overflow in a zone,
/// hydrograph exhausted). CLI maps to exit code 3.
class SimulationHalt : public std::runtime_error {
 public:
  explicit SimulationHalt(const std::string& diagnostic) : std::runtime_error(diagnostic) {}
};

/// Iterative linear solve failed to reach tolerance; keeps the residual
/// trace for diagnostics.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& msg, std::vector<double> residual_history)
      : std::runtime_error(msg), residual_history_(std::move(residual_history)) {}

  const std::vector<double>& residual_history() const { return residual_history_; }

 private:
  std::vector<double> residual_history_;
};

/// Wire/protocol failures: bad frames, version or geometry mismatch,
/// sequence gaps, peer death, timeouts. CLI maps to exit code 4.
class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

class PeerTimeout : public ProtocolError {
 public:
  explicit PeerTimeout(const std::string& msg) : ProtocolError(msg) {}
};

/// Shortest decimal form that round-trips a double exactly.
std::string fmt_double(double v);

}  // namespace izflood
