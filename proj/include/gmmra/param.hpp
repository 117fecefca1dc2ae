#pragma once

// Unconstrained parameterization theta = [x; logits], rho = softmax(logits).

#include <Eigen/Dense>

#include <cmath>

#include "gmmra/errors.hpp"
#include "gmmra/mra_model.hpp"

namespace gmmra {

inline Vector softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  Vector e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

// Pulls a gradient w.r.t. rho back to the logits.
inline Vector softmax_backward(const Vector& rho, const Vector& grad_rho) {
  return (rho.array() * (grad_rho.array() - rho.dot(grad_rho))).matrix();
}

class ParamVector {
 public:
  explicit ParamVector(Vector packed) : packed_(std::move(packed)) {
    if (packed_.size() < 4 || packed_.size() % 2 != 0) throw ParameterError("packed parameter has bad length");
  }
  ParamVector(const Vector& signal_part, const Vector& dist_logits) : packed_(signal_part.size() * 2) {
    if (signal_part.size() != dist_logits.size()) throw ParameterError("signal and logits lengths differ");
    packed_ << signal_part, dist_logits;
  }

  // Logits are log(rho) centered to zero mean; rho must be strictly positive.
  static ParamVector encode(const Signal& x, const SimplexDistribution& rho) {
    if (x.size() != rho.size()) throw ParameterError("signal and distribution lengths differ");
    if (rho.probs().minCoeff() <= 0.0) throw ParameterError("cannot encode a distribution on the simplex boundary");
    Vector logits = rho.probs().array().log().matrix();
    logits.array() -= logits.mean();
    return ParamVector(x.values(), logits);
  }

  int length() const noexcept { return static_cast<int>(packed_.size() / 2); }
  auto signal_part() const { return packed_.head(length()); }
  auto dist_logits() const { return packed_.tail(length()); }
  const Vector& packed() const noexcept { return packed_; }

  Signal signal() const { return Signal(Vector(signal_part())); }
  SimplexDistribution distribution() const { return SimplexDistribution(softmax(Vector(dist_logits()))); }

 private:
  Vector packed_;
};

}  // namespace gmmra
