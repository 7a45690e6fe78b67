#include "rvf/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "rvf/baselines.hpp"
#include "rvf/errors.hpp"
#include "rvf/parallel.hpp"
#include "rvf/stats.hpp"

namespace rvf {

namespace {

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_line(int lineno, const std::string& what) {
  throw ConfigError("spec line " + std::to_string(lineno) + ": " + what);
}

long long as_int(int lineno, const std::string& key, const std::string& raw) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(raw, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != raw.size())
    bad_line(lineno, "value for '" + key + "' is not an integer: " + raw);
  return v;
}

std::uint64_t as_u64(int lineno, const std::string& key,
                     const std::string& raw) {
  std::size_t pos = 0;
  std::uint64_t v = 0;
  bool ok = !raw.empty() && raw[0] != '-';
  if (ok) {
    try {
      v = std::stoull(raw, &pos);
    } catch (const std::exception&) {
      ok = false;
    }
  }
  if (!ok || pos != raw.size())
    bad_line(lineno,
             "value for '" + key + "' is not an unsigned integer: " + raw);
  return v;
}

double as_double(int lineno, const std::string& key, const std::string& raw) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(raw, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != raw.size())
    bad_line(lineno, "value for '" + key + "' is not a number: " + raw);
  return v;
}

std::string as_string(int lineno, const std::string& key,
                      const std::string& raw) {
  std::string v = raw;
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
    v = v.substr(1, v.size() - 2);
  if (v.empty()) bad_line(lineno, "value for '" + key + "' is empty");
  return v;
}

enum class Kind { Td0, TdLambda, Rtd0, Ortd };

Kind kind_of(const MethodSpec& m) {
  if (m.kind == "td0") return Kind::Td0;
  if (m.kind == "tdlambda") return Kind::TdLambda;
  if (m.kind == "rtd0") return Kind::Rtd0;
  if (m.kind == "ortd") return Kind::Ortd;
  throw ConfigError("method '" + m.id + "' has unknown kind '" + m.kind +
                    "' (expected td0, tdlambda, rtd0 or ortd)");
}

// Checkpoint axis: episode 1 plus every multiple of checkpoint_every.
std::vector<int> checkpoint_axis(const ExperimentSpec& spec) {
  std::vector<int> eps;
  eps.push_back(1);
  for (int e = spec.checkpoint_every; e <= spec.episodes;
       e += spec.checkpoint_every)
    if (e != 1) eps.push_back(e);
  return eps;
}

// Observation prefix from the episode start down to one branch's aliased
// state: the stem through the junction, the branch entry, then the branch
// interior up to (and including) the aliased state.
std::vector<int> aliased_prefix(const Ychain& chain, bool top) {
  const YchainLayout& lay = chain.layout;
  std::vector<int> seq;
  for (int s = 0; s <= lay.junction; ++s) seq.push_back(chain.obs(s));
  int entry = top ? lay.top_entry : lay.bottom_entry;
  int aliased = top ? lay.top_aliased : lay.bottom_aliased;
  for (int s = entry; s <= aliased; ++s) seq.push_back(chain.obs(s));
  return seq;
}

// The fixed emphasis assignment for the oracle learner: keep the table
// (beta = 1) on the stem and at each branch entry, where the observation
// pins down the branch; freeze the carried context (beta = 0) from there
// on, so the aliased state inherits its own branch entry's value instead
// of a shared table entry.
std::vector<double> oracle_beta(const Ychain& chain) {
  std::vector<double> beta(chain.obs.n_obs, 0.0);
  for (int s = 0; s <= chain.layout.junction; ++s) beta[chain.obs(s)] = 1.0;
  beta[chain.obs(chain.layout.top_entry)] = 1.0;
  beta[chain.obs(chain.layout.bottom_entry)] = 1.0;
  return beta;
}

struct RunRecord {
  std::vector<double> metric;  // one entry per checkpoint reached
  bool diverged = false;
  int diverged_at = -1;
};

RunRecord run_one(const ExperimentSpec& spec, const Ychain& chain,
                  const MethodSpec& m, int method_idx, int seed) {
  Rng rng(derive_seed(spec.master_seed, static_cast<std::uint64_t>(method_idx),
                      static_cast<std::uint64_t>(seed)));
  const Kind kind = kind_of(m);
  const int n_obs = chain.obs.n_obs;
  const int max_steps = 4 * (spec.stem_len + spec.branch_len + 4);

  ValueTable theta(n_obs);
  EmphasisTable emphasis(n_obs);
  RtdConfig cfg;
  std::vector<double> fixed;
  if (kind == Kind::Rtd0 || kind == Kind::Ortd) {
    cfg.target.kind = TargetKind::LambdaReturn;
    cfg.target.lambda = m.lambda;
    cfg.lr_theta = m.lr;
    cfg.lr_omega = m.lr_beta;
    cfg.omega_rule = OmegaRule::Recursive;
    cfg.max_steps = max_steps;
    if (kind == Kind::Ortd) {
      fixed = oracle_beta(chain);
      cfg.fixed_beta = fixed;
    }
    cfg.validate(n_obs);
  }

  const std::vector<int> ckpts = checkpoint_axis(spec);
  const std::vector<int> prefix_top = aliased_prefix(chain, true);
  const std::vector<int> prefix_bottom = aliased_prefix(chain, false);

  RunRecord rec;
  std::size_t next_ckpt = 0;
  for (int ep = 1; ep <= spec.episodes; ++ep) {
    try {
      switch (kind) {
        case Kind::Td0:
          td0_episode(chain.mrp, chain.obs, theta, m.lr, rng, max_steps);
          break;
        case Kind::TdLambda:
          td_lambda_online_episode(chain.mrp, chain.obs, theta, m.lr, m.lambda,
                                   rng, max_steps);
          break;
        case Kind::Rtd0:
        case Kind::Ortd:
          run_rtd_episode(chain.mrp, chain.obs, theta, emphasis, cfg, rng);
          break;
      }
    } catch (const DivergenceError&) {
      rec.diverged = true;
      rec.diverged_at = ep;
      break;
    }
    if (next_ckpt < ckpts.size() && ep == ckpts[next_ckpt]) {
      double err;
      if (kind == Kind::Td0 || kind == Kind::TdLambda) {
        err = aliased_error_from_table(chain, theta);
      } else {
        BetaView view = (kind == Kind::Ortd) ? BetaView(fixed)
                                             : BetaView(emphasis);
        err = aliased_error_recurrent(chain, theta, view);
      }
      rec.metric.push_back(err);
      ++next_ckpt;
    }
  }
  return rec;
}

void write_raw_csv(const std::string& path, const ExperimentSpec& spec,
                   const std::vector<int>& ckpts,
                   const std::vector<std::vector<RunRecord>>& records) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "method,seed,episode,metric\n";
  for (std::size_t mi = 0; mi < spec.methods.size(); ++mi)
    for (int s = 0; s < spec.n_seeds; ++s) {
      const RunRecord& rec = records[mi][s];
      for (std::size_t k = 0; k < rec.metric.size(); ++k)
        out << spec.methods[mi].id << ',' << s << ',' << ckpts[k] << ','
            << fmt17(rec.metric[k]) << '\n';
    }
}

void write_aggregate_csv(const std::string& path,
                         const AggregateResult& agg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "method,episode,mean,se,lo,hi,n_seeds\n";
  for (const Curve& c : agg.curves)
    for (std::size_t k = 0; k < c.episodes.size(); ++k)
      out << c.method << ',' << c.episodes[k] << ',' << fmt17(c.mean[k]) << ','
          << fmt17(c.se[k]) << ',' << fmt17(c.lo[k]) << ',' << fmt17(c.hi[k])
          << ',' << c.n_seeds[k] << '\n';
}

}  // namespace

void ExperimentSpec::validate() const {
  if (schema != 1)
    throw SchemaError("unsupported spec schema " + std::to_string(schema) +
                      " (this reader understands schema 1)");
  if (env != "ychain")
    throw ConfigError("unknown env '" + env + "' (only 'ychain' is built in)");
  if (experiment.empty()) throw ConfigError("experiment name is empty");
  if (out_dir.empty()) throw ConfigError("out_dir is empty");
  if (branch_len < 2) throw ConfigError("branch_len must be >= 2");
  if (stem_len < 1) throw ConfigError("stem_len must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw ConfigError("gamma must lie in [0, 1)");
  if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw ConfigError("confidence must lie in (0, 1)");
  if (methods.empty()) throw ConfigError("spec declares no methods");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const MethodSpec& m = methods[i];
    if (m.id.empty()) throw ConfigError("method with empty id");
    kind_of(m);  // throws on unknown kinds
    if (!(m.lr > 0.0))
      throw ConfigError("method '" + m.id + "' needs lr > 0");
    if (!(m.lr_beta >= 0.0))
      throw ConfigError("method '" + m.id + "' needs lr_beta >= 0");
    if (!(m.lambda >= 0.0 && m.lambda <= 1.0))
      throw ConfigError("method '" + m.id + "' needs lambda in [0, 1]");
    for (std::size_t j = 0; j < i; ++j)
      if (methods[j].id == m.id)
        throw ConfigError("duplicate method id '" + m.id + "'");
  }
}

ExperimentSpec default_ychain_spec() {
  ExperimentSpec spec;
  spec.methods = {
      {"td0", "td0", 0.5, 1.0, 0.9},
      {"tdlambda", "tdlambda", 0.5, 1.0, 0.9},
      {"rtd0", "rtd0", 0.5, 1.0, 0.9},
      {"ortd", "ortd", 0.5, 1.0, 0.9},
  };
  return spec;
}

ExperimentSpec parse_experiment(std::istream& in) {
  ExperimentSpec spec;
  spec.methods.clear();
  MethodSpec* cur = nullptr;
  bool schema_seen = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']') bad_line(lineno, "unterminated section header");
      std::string inner = trim(s.substr(1, s.size() - 2));
      const std::string prefix = "method.";
      if (inner.rfind(prefix, 0) != 0)
        bad_line(lineno, "unknown section [" + inner +
                             "] (only [method.<id>] sections exist)");
      std::string id = inner.substr(prefix.size());
      if (id.empty()) bad_line(lineno, "method section with empty id");
      for (const MethodSpec& m : spec.methods)
        if (m.id == id) bad_line(lineno, "duplicate method id '" + id + "'");
      spec.methods.push_back(MethodSpec{});
      cur = &spec.methods.back();
      cur->id = id;
      continue;
    }
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      bad_line(lineno, "expected 'key = value', got: " + s);
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    if (key.empty()) bad_line(lineno, "empty key");
    if (val.empty()) bad_line(lineno, "empty value for '" + key + "'");
    if (cur != nullptr) {
      if (key == "kind")
        cur->kind = as_string(lineno, key, val);
      else if (key == "lr")
        cur->lr = as_double(lineno, key, val);
      else if (key == "lr_beta")
        cur->lr_beta = as_double(lineno, key, val);
      else if (key == "lambda")
        cur->lambda = as_double(lineno, key, val);
      else
        bad_line(lineno, "unknown key '" + key + "' in [method." + cur->id +
                             "]");
      continue;
    }
    if (key == "schema") {
      spec.schema = static_cast<int>(as_int(lineno, key, val));
      schema_seen = true;
    } else if (key == "experiment")
      spec.experiment = as_string(lineno, key, val);
    else if (key == "env")
      spec.env = as_string(lineno, key, val);
    else if (key == "branch_len")
      spec.branch_len = static_cast<int>(as_int(lineno, key, val));
    else if (key == "stem_len")
      spec.stem_len = static_cast<int>(as_int(lineno, key, val));
    else if (key == "gamma")
      spec.gamma = as_double(lineno, key, val);
    else if (key == "n_seeds")
      spec.n_seeds = static_cast<int>(as_int(lineno, key, val));
    else if (key == "episodes")
      spec.episodes = static_cast<int>(as_int(lineno, key, val));
    else if (key == "checkpoint_every")
      spec.checkpoint_every = static_cast<int>(as_int(lineno, key, val));
    else if (key == "confidence")
      spec.confidence = as_double(lineno, key, val);
    else if (key == "master_seed")
      spec.master_seed = as_u64(lineno, key, val);
    else if (key == "out_dir")
      spec.out_dir = as_string(lineno, key, val);
    else
      bad_line(lineno, "unknown key '" + key + "'");
  }
  if (!schema_seen)
    throw SchemaError("spec file does not declare 'schema'");
  spec.validate();
  return spec;
}

ExperimentSpec parse_experiment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec file " + path);
  return parse_experiment(in);
}

double aliased_error_from_table(const Ychain& chain, const ValueTable& theta) {
  const double g = chain.mrp.gamma;
  const double v = theta(chain.layout.aliased_obs);
  return 0.5 * (std::fabs(v - g) + std::fabs(v + g));
}

double aliased_error_recurrent(const Ychain& chain, const ValueTable& theta,
                               const BetaView& beta) {
  const double g = chain.mrp.gamma;
  double pred[2];
  for (int top = 0; top < 2; ++top) {
    std::vector<int> seq = aliased_prefix(chain, top == 0);
    std::vector<double> zeros(seq.size(), 0.0);
    pred[top] = vbeta_sequence(seq, zeros, theta, beta).back();
  }
  return 0.5 * (std::fabs(pred[0] - g) + std::fabs(pred[1] + g));
}

AggregateResult run_experiment(const ExperimentSpec& spec, int n_jobs) {
  spec.validate();
  const Ychain chain =
      build_ychain(spec.branch_len, spec.gamma, spec.stem_len);
  const std::vector<int> ckpts = checkpoint_axis(spec);
  const int n_methods = static_cast<int>(spec.methods.size());
  const int n_tasks = n_methods * spec.n_seeds;

  std::vector<std::vector<RunRecord>> records(
      n_methods, std::vector<RunRecord>(spec.n_seeds));
  parallel_for(n_tasks, resolve_jobs(n_jobs, n_tasks), [&](int task) {
    const int mi = task / spec.n_seeds;
    const int seed = task % spec.n_seeds;
    records[mi][seed] = run_one(spec, chain, spec.methods[mi], mi, seed);
  });

  AggregateResult agg;
  agg.experiment = spec.experiment;
  agg.confidence = spec.confidence;
  const double z = normal_quantile(0.5 + spec.confidence / 2.0);
  for (int mi = 0; mi < n_methods; ++mi) {
    Curve c;
    c.method = spec.methods[mi].id;
    for (const RunRecord& rec : records[mi])
      if (rec.diverged) c.partial = true;
    for (std::size_t k = 0; k < ckpts.size(); ++k) {
      RunningStat stat;
      for (const RunRecord& rec : records[mi])
        if (k < rec.metric.size()) stat.push(rec.metric[k]);
      if (stat.n == 0) break;  // every seed was gone by this point
      c.episodes.push_back(ckpts[k]);
      c.mean.push_back(stat.mean);
      c.se.push_back(stat.se());
      c.lo.push_back(stat.mean - z * stat.se());
      c.hi.push_back(stat.mean + z * stat.se());
      c.n_seeds.push_back(static_cast<int>(stat.n));
    }
    agg.curves.push_back(std::move(c));
  }

  std::filesystem::create_directories(spec.out_dir);
  write_raw_csv(spec.out_dir + "/raw.csv", spec, ckpts, records);
  write_aggregate_csv(spec.out_dir + "/aggregate.csv", agg);
  return agg;
}

}  // namespace rvf
