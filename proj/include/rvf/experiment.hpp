#pragma once

// Multi-seed experiment orchestration on the aliased Y-chain: spec files,
// per-seed runs on a worker pool, checkpointed metrics, and CSV/aggregate
// emission. Everything is a pure function of the spec, so reruns are
// byte-identical.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rvf/mrp.hpp"
#include "rvf/rvf_core.hpp"

namespace rvf {

// One learner entry in a spec file ([method.<id>] section).
struct MethodSpec {
  std::string id;
  std::string kind;      // td0 | tdlambda | rtd0 | ortd
  double lr = 0.5;       // value-table learning rate
  double lr_beta = 1.0;  // emphasis learning rate (rtd0 only)
  double lambda = 0.9;   // trace decay / return mixing, kind-dependent
};

struct ExperimentSpec {
  int schema = 1;
  std::string experiment = "ychain-aliasing";
  std::string env = "ychain";
  int branch_len = 3;
  int stem_len = 1;
  double gamma = 0.9;
  int n_seeds = 20;
  int episodes = 5000;
  int checkpoint_every = 10;
  double confidence = 0.68;
  std::uint64_t master_seed = 1;
  std::string out_dir = "out";
  std::vector<MethodSpec> methods;

  void validate() const;
};

// The four standard learners with their usual rates (value lr 0.5,
// emphasis lr 1.0, lambda 0.9).
ExperimentSpec default_ychain_spec();

// Strict key-value spec format: `key = value` lines, [method.<id>]
// sections, full-line # comments, schema = 1 required. Unknown keys are
// errors so a typo cannot silently fall back to a default.
ExperimentSpec parse_experiment(std::istream& in);
ExperimentSpec parse_experiment_file(const std::string& path);

struct Curve {
  std::string method;
  std::vector<int> episodes;   // checkpoint axis
  std::vector<double> mean;
  std::vector<double> se;
  std::vector<double> lo;      // mean -/+ z * se at the configured level
  std::vector<double> hi;
  std::vector<int> n_seeds;    // seeds contributing at each checkpoint
  bool partial = false;        // a seed diverged before the budget ran out
};

struct AggregateResult {
  std::string experiment;
  std::string x_label = "episode";
  std::string y_label = "aliased-state absolute error";
  double confidence = 0.68;
  std::vector<Curve> curves;

  bool any_partial() const {
    for (const auto& c : curves)
      if (c.partial) return true;
    return false;
  }
};

// Run every (method, seed) pair on a bounded worker pool, aggregate across
// seeds, and write <out_dir>/raw.csv plus <out_dir>/aggregate.csv. A
// diverging run keeps its checkpoints up to the failure and marks the
// method partial; it never aborts the experiment.
AggregateResult run_experiment(const ExperimentSpec& spec, int n_jobs = 0);

// Mean absolute distance of the two aliased states' predictions from their
// true values (+gamma on the rewarding branch, -gamma on the penalizing
// one). The table variant reads the shared entry both states map to; the
// recurrent variant evaluates the estimate along each branch's prefix, so
// the two states can carry different predictions.
double aliased_error_from_table(const Ychain& chain, const ValueTable& theta);
double aliased_error_recurrent(const Ychain& chain, const ValueTable& theta,
                               const BetaView& beta);

}  // namespace rvf
