#pragma once

// Tabular parameter blocks, indexed by observation.  Both tables are plain
// dense vectors; aggregation over aliased states happens because aliased
// states share an observation index, not because of anything in here.

#include <cmath>
#include <cstddef>
#include <vector>

#include "rvf/errors.hpp"

namespace rvf {

inline double sigmoid(double z) {
  // Split on the sign so neither branch exponentiates a large positive value.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// d/dz sigmoid(z), written via sigmoid so the two stay consistent.
inline double sigmoid_grad(double z) {
  const double s = sigmoid(z);
  return s * (1.0 - s);
}

// Value estimate per observation.
struct ValueTable {
  std::vector<double> v;

  ValueTable() = default;
  explicit ValueTable(int n_obs, double init = 0.0) : v(n_obs, init) {
    if (n_obs <= 0) throw TopologyError("value table needs n_obs > 0");
  }

  int size() const { return static_cast<int>(v.size()); }
  double operator()(int obs) const { return v[obs]; }
  double& operator()(int obs) { return v[obs]; }
};

// Emphasis logits per observation; beta(obs) = sigmoid(omega[obs]).
//
// Parameterizing through the logit keeps beta inside (0, 1) without any
// clipping, and the learning rules below only ever touch omega.
struct EmphasisTable {
  std::vector<double> omega;

  EmphasisTable() = default;
  explicit EmphasisTable(int n_obs, double init_logit = 0.0)
      : omega(n_obs, init_logit) {
    if (n_obs <= 0) throw TopologyError("emphasis table needs n_obs > 0");
  }

  int size() const { return static_cast<int>(omega.size()); }
  double logit(int obs) const { return omega[obs]; }
  double beta(int obs) const { return sigmoid(omega[obs]); }
  double beta_grad(int obs) const { return sigmoid_grad(omega[obs]); }
};

}  // namespace rvf
