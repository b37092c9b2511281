#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stspec {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidModelError : public Error {
 public:
  using Error::Error;
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature ran out of its refinement budget.
class AccuracyError : public Error {
 public:
  AccuracyError(const std::string& what, double residual)
      : Error(what + " (residual estimate " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Monte-Carlo field synthesis does not resolve the model.
class SynthesisError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// No linear regime could be identified in attenuation or slope data.
class NoLinearTrendError : public Error {
 public:
  NoLinearTrendError(const std::string& stage, const std::string& why)
      : Error("no linear trend in " + stage + ": " + why), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

class IllConditionedError : public Error {
 public:
  IllConditionedError(int m, std::vector<int> index_set, double condition)
      : Error(describe(m, index_set, condition)),
        m_(m),
        index_set_(std::move(index_set)),
        condition_(condition) {}

  int harmonic() const noexcept { return m_; }
  const std::vector<int>& index_set() const noexcept { return index_set_; }
  double condition_number() const noexcept { return condition_; }

 private:
  static std::string describe(int m, const std::vector<int>& set, double cond) {
    std::string s = "comb matrix for m=" + std::to_string(m) + " with index set {";
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(set[i]);
    }
    return s + "} is ill-conditioned (condition number " + std::to_string(cond) + ")";
  }

  int m_;
  std::vector<int> index_set_;
  double condition_;
};

class ReconstructionError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration; `key` is the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& why)
      : Error(key + ": " + why), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Missing or malformed stage input files.
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace stspec
