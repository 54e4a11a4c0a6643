// Shared error types and small utilities used across the library.
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mage {

using index_t = std::int64_t;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Iterate left the Kähler cone: some node's metric lost positive definiteness.
class PositivityLost : public Error {
 public:
  PositivityLost(index_t node, double eigenvalue)
      : Error("positivity lost at node " + std::to_string(node) +
              " (min eigenvalue " + std::to_string(eigenvalue) + ")"),
        node(node),
        eigenvalue(eigenvalue) {}
  index_t node;
  double eigenvalue;
};

class SingularMetric : public Error {
 public:
  explicit SingularMetric(index_t node)
      : Error("singular metric at node " + std::to_string(node)), node(node) {}
  index_t node;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, double best_residual)
      : Error(what + " (best residual " + std::to_string(best_residual) + ")"),
        best_residual(best_residual) {}
  double best_residual;
};

class ZeroMass : public Error {
 public:
  ZeroMass() : Error("measure has zero or negative mass") {}
};

class DegenerateBase : public Error {
 public:
  DegenerateBase() : Error("base block of the background form is singular") {}
};

class EmptyDictionary : public Error {
 public:
  EmptyDictionary() : Error("capacity dictionary is empty") {}
};

class HypothesisViolated : public Error {
 public:
  explicit HypothesisViolated(std::vector<std::pair<double, double>> pairs)
      : Error("De Giorgi hypothesis r F(s+r) <= A F(s)^{1+alpha} violated at " +
              std::to_string(pairs.size()) + " sample pair(s)"),
        violations(std::move(pairs)) {}
  std::vector<std::pair<double, double>> violations;  // (s, r)
};

class NotVanishing : public Error {
 public:
  explicit NotVanishing(double s, double value)
      : Error("F(" + std::to_string(s) + ") = " + std::to_string(value) +
              " but the De Giorgi bound forces 0"),
        s(s),
        value(value) {}
  double s;
  double value;
};

class GridMismatch : public Error {
 public:
  explicit GridMismatch(const std::string& what) : Error(what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

class CorruptCheckpoint : public Error {
 public:
  explicit CorruptCheckpoint(const std::string& what) : Error(what) {}
};

class UnsupportedFormat : public Error {
 public:
  explicit UnsupportedFormat(const std::string& what) : Error(what) {}
};

}  // namespace mage
