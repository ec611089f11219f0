#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pbrc {

struct BeliefError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
// A weight is negative or non-finite.
struct NegativeMass : BeliefError {
  using BeliefError::BeliefError;
};
// Total mass is zero (nothing to normalize).
struct ZeroMass : BeliefError {
  using BeliefError::BeliefError;
};
// Two beliefs (or a belief and a hypothesis space) disagree on dimension.
struct SpaceMismatch : BeliefError {
  using BeliefError::BeliefError;
};
struct UnknownHypothesis : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Two weights within this distance of the max are both counted as modal.
constexpr double kArgmaxTol = 1e-12;

// Finite set of mutually exclusive hypothesis labels.
class HypothesisSpace {
 public:
  explicit HypothesisSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.size() < 2) throw std::invalid_argument("hypothesis space needs at least two labels");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      for (std::size_t j = i + 1; j < labels_.size(); ++j) {
        if (labels_[i] == labels_[j]) {
          throw std::invalid_argument("duplicate hypothesis label: " + labels_[i]);
        }
      }
    }
  }

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }

  std::size_t index_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] == label) return i;
    }
    throw UnknownHypothesis("unknown hypothesis label: " + label);
  }

  bool operator==(const HypothesisSpace& other) const = default;

 private:
  std::vector<std::string> labels_;
};

// Probability vector over hypotheses. Weights are validated and normalized
// on construction, so any Belief in flight sums to 1 (within float noise).
class Belief {
 public:
  explicit Belief(std::vector<double> weights) : w_(std::move(weights)) {
    if (w_.size() < 2) throw SpaceMismatch("belief needs at least two weights");
    double total = 0.0;
    for (double w : w_) {
      if (!std::isfinite(w) || w < 0.0) throw NegativeMass("belief weight is negative or non-finite");
      total += w;
    }
    if (!(total > 0.0)) throw ZeroMass("belief has zero total mass");
    for (double& w : w_) w /= total;
  }

  static Belief uniform(std::size_t m) {
    return Belief(std::vector<double>(m, 1.0));
  }

  double operator[](std::size_t i) const { return w_.at(i); }
  std::size_t size() const { return w_.size(); }
  const std::vector<double>& weights() const { return w_; }

  bool operator==(const Belief& other) const = default;

 private:
  std::vector<double> w_;
};

inline double conf(const Belief& b) {
  return *std::max_element(b.weights().begin(), b.weights().end());
}

// Indices whose weight is within kArgmaxTol of the max, ascending.
inline std::vector<std::size_t> argmax_set(const Belief& b) {
  const double m = conf(b);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] >= m - kArgmaxTol) out.push_back(i);
  }
  return out;
}

// Total variation distance, 1/2 * L1.
inline double tv(const Belief& a, const Belief& b) {
  if (a.size() != b.size()) throw SpaceMismatch("tv: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

struct InvalidDilution : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Mixing rate toward the uniform distribution, strictly inside (0, 1).
struct DilutionParams {
  double lambda;
  explicit DilutionParams(double l) : lambda(l) {
    if (!(l > 0.0) || !(l < 1.0)) throw InvalidDilution("dilution rate must lie in (0,1)");
  }
};

inline Belief dilute(const Belief& b, const DilutionParams& p) {
  const double u = 1.0 / static_cast<double>(b.size());
  std::vector<double> w(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) w[i] = (1.0 - p.lambda) * b[i] + p.lambda * u;
  return Belief(std::move(w));
}

// t-fold dilution in closed form: (1-lambda)^t * b + (1 - (1-lambda)^t) * uniform.
inline Belief dilute_closed_form(const Belief& b0, const DilutionParams& p, std::uint64_t t) {
  const double a = std::pow(1.0 - p.lambda, static_cast<double>(t));
  const double u = 1.0 / static_cast<double>(b0.size());
  std::vector<double> w(b0.size());
  for (std::size_t i = 0; i < b0.size(); ++i) w[i] = a * b0[i] + (1.0 - a) * u;
  return Belief(std::move(w));
}

struct InvalidLogOdds : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Additive nudge of the target hypothesis on the log-odds scale, magnitude
// clamped to cap. For more than two hypotheses this acts one-vs-rest: the
// target's odds against everything else move by the (clamped) step and the
// remaining mass keeps its internal proportions.
struct LogOddsStep {
  std::size_t target;
  double step;
  double cap;
  LogOddsStep(std::size_t tgt, double stp, double cp) : target(tgt), step(stp), cap(cp) {
    if (!std::isfinite(stp)) throw InvalidLogOdds("log-odds step must be finite");
    if (!(cp > 0.0) || !std::isfinite(cp)) throw InvalidLogOdds("log-odds cap must be positive and finite");
  }
};

inline Belief logodds_update(const Belief& b, const LogOddsStep& s) {
  if (s.target >= b.size()) throw SpaceMismatch("logodds_update: target out of range");
  if (s.step == 0.0) return b;
  const double delta = std::clamp(s.step, -s.cap, s.cap);
  // Clamp the working probability away from 0/1 so the logit stays finite.
  const double p = std::clamp(b[s.target], 1e-12, 1.0 - 1e-12);
  const double logit = std::log(p / (1.0 - p)) + delta;
  const double q = 1.0 / (1.0 + std::exp(-logit));
  const double rest_old = 1.0 - b[s.target];
  std::vector<double> w(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (i == s.target) {
      w[i] = q;
    } else if (rest_old > 0.0) {
      w[i] = b[i] * (1.0 - q) / rest_old;
    } else {
      // Degenerate start: all non-target mass was zero, spread evenly.
      w[i] = (1.0 - q) / static_cast<double>(b.size() - 1);
    }
  }
  return Belief(std::move(w));
}

// Moves a fraction of all mass onto the target hypothesis:
// b' = (1-fraction) * b + fraction * point_mass(target).
inline Belief mass_shift(const Belief& b, std::size_t target, double fraction) {
  if (target >= b.size()) throw SpaceMismatch("mass_shift: target out of range");
  if (!(fraction >= 0.0) || !(fraction <= 1.0)) {
    throw std::invalid_argument("mass_shift: fraction must lie in [0,1]");
  }
  std::vector<double> w(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    w[i] = (1.0 - fraction) * b[i] + (i == target ? fraction : 0.0);
  }
  return Belief(std::move(w));
}

// Temperature-style sharpening: weights raised to gamma, renormalized.
inline Belief power_sharpen(const Belief& b, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("power_sharpen: gamma must be positive");
  std::vector<double> w(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) w[i] = std::pow(b[i], gamma);
  return Belief(std::move(w));
}

}  // namespace pbrc
