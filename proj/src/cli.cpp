#include "rvf/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rvf/errors.hpp"
#include "rvf/experiment.hpp"
#include "rvf/linear.hpp"
#include "rvf/stats.hpp"
#include "rvf/svg_plot.hpp"
#include "rvf/theory.hpp"

namespace rvf {

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kConfig = 2;
constexpr int kPartial = 3;

std::string g6(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string g12(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<double> parse_double_list(const std::string& key,
                                      const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != item.size())
      throw ConfigError("--" + key + ": '" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--" + key + " is empty");
  return out;
}

struct GlobalOpts {
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::string out_dir;
  std::string format = "csv";
  int jobs = 0;
};

// Shared tail of `ychain` and `run <spec>`: execute, print a per-method
// summary, optionally render the plot, and map partial results to exit 3.
int execute_experiment(ExperimentSpec spec, const GlobalOpts& g,
                       std::ostream& out, std::ostream& err) {
  if (g.seed_set) spec.master_seed = g.seed;
  if (!g.out_dir.empty()) spec.out_dir = g.out_dir;
  const AggregateResult agg = run_experiment(spec, g.jobs);

  out << "aliased-state absolute error, final checkpoint ("
      << g6(100.0 * spec.confidence) << "% band over seeds):\n";
  for (const Curve& c : agg.curves) {
    if (c.episodes.empty()) {
      out << "  " << c.method << "  no data (every seed diverged before the "
          << "first checkpoint)\n";
      continue;
    }
    const std::size_t k = c.episodes.size() - 1;
    out << "  " << c.method << "  episode " << c.episodes[k] << ": "
        << g6(c.mean[k]) << " +/- " << g6(c.se[k]) << "  (n=" << c.n_seeds[k]
        << (c.partial ? ", partial" : "") << ")\n";
  }
  out << "wrote " << spec.out_dir << "/raw.csv and " << spec.out_dir
      << "/aggregate.csv\n";
  if (g.format == "svg") {
    AggregateResult plottable = agg;
    plottable.curves.clear();
    for (const Curve& c : agg.curves)
      if (!c.episodes.empty()) plottable.curves.push_back(c);
    if (plottable.curves.empty()) {
      err << "warning: nothing to plot, skipping the SVG\n";
    } else {
      const std::string path = spec.out_dir + "/plot.svg";
      std::ofstream f(path);
      if (!f) throw ConfigError("cannot write " + path);
      f << emit_plot(plottable);
      out << "wrote " << path << "\n";
    }
  }
  if (agg.any_partial()) {
    err << "warning: at least one run diverged; its later checkpoints are "
           "missing\n";
    return kPartial;
  }
  return kOk;
}

struct PolicyEvalOpts {
  int n_states = 20;
  int k = 8;
  double noise = 0.25;
  double gamma = 0.9;
  int replicates = 40;
  double confidence = 0.68;
  LinearConfig cfg;
};

int run_policy_eval(const PolicyEvalOpts& o, const GlobalOpts& g,
                    std::ostream& out) {
  o.cfg.validate();
  const std::uint64_t seed = g.seed_set ? g.seed : 7;
  auto [mrp, features] =
      build_feature_mrp(o.n_states, o.k, seed, o.noise, o.gamma);
  const LinearComparison cmp = run_linear_comparison(
      mrp, features, o.cfg, o.replicates, seed, g.jobs);

  const double z = normal_quantile(0.5 + o.confidence / 2.0);
  AggregateResult agg;
  agg.experiment = "linear-policy-eval";
  agg.x_label = "transitions";
  agg.y_label = "RMSVE";
  agg.confidence = o.confidence;
  const std::vector<std::pair<std::string,
                              const std::vector<std::vector<double>>*>>
      methods = {{"td0", &cmp.td0},
                 {"tdlambda", &cmp.tdlambda},
                 {"rvf", &cmp.rvf}};
  for (const auto& [name, rows] : methods) {
    Curve c;
    c.method = name;
    for (std::size_t k = 0; k < cmp.transitions.size(); ++k) {
      RunningStat st;
      for (const auto& row : *rows) st.push(row[k]);
      c.episodes.push_back(cmp.transitions[k]);
      c.mean.push_back(st.mean);
      c.se.push_back(st.se());
      c.lo.push_back(st.mean - z * st.se());
      c.hi.push_back(st.mean + z * st.se());
      c.n_seeds.push_back(static_cast<int>(st.n));
    }
    agg.curves.push_back(std::move(c));
  }

  const std::string dir = g.out_dir.empty() ? "out" : g.out_dir;
  std::filesystem::create_directories(dir);
  {
    const std::string path = dir + "/linear_raw.csv";
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << "method,replicate,transitions,rmsve\n";
    for (const auto& [name, rows] : methods)
      for (std::size_t r = 0; r < rows->size(); ++r)
        for (std::size_t k = 0; k < cmp.transitions.size(); ++k)
          f << name << ',' << r << ',' << cmp.transitions[k] << ','
            << fmt17((*rows)[r][k]) << '\n';
  }
  {
    const std::string path = dir + "/linear_aggregate.csv";
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << "method,transitions,mean,se,lo,hi,n\n";
    for (const Curve& c : agg.curves)
      for (std::size_t k = 0; k < c.episodes.size(); ++k)
        f << c.method << ',' << c.episodes[k] << ',' << fmt17(c.mean[k])
          << ',' << fmt17(c.se[k]) << ',' << fmt17(c.lo[k]) << ','
          << fmt17(c.hi[k]) << ',' << c.n_seeds[k] << '\n';
  }
  if (g.format == "svg") {
    const std::string path = dir + "/linear_plot.svg";
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << emit_plot(agg);
    out << "wrote " << path << "\n";
  }

  out << "final RMSVE over " << o.replicates << " replicates:\n";
  std::vector<double> final_td0, final_tdl, final_rvf;
  const std::size_t last = cmp.transitions.size() - 1;
  for (const auto& row : cmp.td0) final_td0.push_back(row[last]);
  for (const auto& row : cmp.tdlambda) final_tdl.push_back(row[last]);
  for (const auto& row : cmp.rvf) final_rvf.push_back(row[last]);
  for (const Curve& c : agg.curves)
    out << "  " << c.method << "  " << g6(c.mean[last]) << " +/- "
        << g6(c.se[last]) << "\n";
  const PairedTestResult t = paired_one_sided_less(final_rvf, final_td0);
  out << "paired one-sided test (rvf < td0): t = " << g6(t.t_stat)
      << ", threshold = " << g6(t.threshold)
      << ", significant = " << (t.significant ? "yes" : "no") << "\n";
  RunningStat st_tdl, st_rvf;
  for (double v : final_tdl) st_tdl.push(v);
  for (double v : final_rvf) st_rvf.push(v);
  out << "mean ratio rvf / tdlambda = " << g6(st_rvf.mean / st_tdl.mean)
      << "\n";
  out << "wrote " << dir << "/linear_raw.csv and " << dir
      << "/linear_aggregate.csv\n";
  return kOk;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Recurrent value functions on aliased chains: learners, "
               "contraction checks and experiment harness"};
  app.require_subcommand(1);

  GlobalOpts g;
  auto* seed_opt =
      app.add_option("--seed", g.seed, "Master seed for all derived streams")
          ->capture_default_str();
  app.add_option("--out", g.out_dir, "Output directory (default: out)");
  app.add_option("--format", g.format, "Output format for plots")
      ->check(CLI::IsMember({"csv", "svg"}))
      ->capture_default_str();
  app.add_option("--jobs", g.jobs,
                 "Worker threads (0 = number of hardware threads)")
      ->capture_default_str();

  int rc = kOk;
  // Subcommand callbacks fire while parse() is still on the stack, so the
  // global options have to be finalized there, not after parse returns.
  auto finish_globals = [&]() { g.seed_set = seed_opt->count() > 0; };

  // --- ychain -----------------------------------------------------------
  auto* ychain = app.add_subcommand(
      "ychain", "Multi-seed learning-curve comparison on the aliased Y-chain");
  ExperimentSpec yspec = default_ychain_spec();
  double y_lr = 0.5, y_lr_beta = 1.0, y_lambda = 0.9;
  std::vector<std::string> y_only;
  ychain->add_option("--branch-len", yspec.branch_len, "States per branch")
      ->capture_default_str();
  ychain->add_option("--stem-len", yspec.stem_len, "States before the fork")
      ->capture_default_str();
  ychain->add_option("--gamma", yspec.gamma, "Discount")
      ->capture_default_str();
  ychain->add_option("--seeds", yspec.n_seeds, "Independent seeds per method")
      ->capture_default_str();
  ychain->add_option("--episodes", yspec.episodes, "Episodes per seed")
      ->capture_default_str();
  ychain
      ->add_option("--checkpoint-every", yspec.checkpoint_every,
                   "Record the metric every this many episodes")
      ->capture_default_str();
  ychain
      ->add_option("--confidence", yspec.confidence,
                   "Confidence level of the aggregate bands")
      ->capture_default_str();
  ychain->add_option("--lr", y_lr, "Value-table learning rate (all methods)")
      ->capture_default_str();
  ychain
      ->add_option("--lr-beta", y_lr_beta,
                   "Emphasis learning rate (learned-emphasis method)")
      ->capture_default_str();
  ychain
      ->add_option("--lambda", y_lambda,
                   "Trace decay / return mixing (where applicable)")
      ->capture_default_str();
  ychain
      ->add_option("--only", y_only,
                   "Run only these method ids (td0 tdlambda rtd0 ortd)")
      ->delimiter(',');
  ychain->callback([&]() {
    finish_globals();
    for (MethodSpec& m : yspec.methods) {
      m.lr = y_lr;
      m.lr_beta = y_lr_beta;
      m.lambda = y_lambda;
    }
    if (!y_only.empty()) {
      std::vector<MethodSpec> kept;
      for (const MethodSpec& m : yspec.methods)
        if (std::find(y_only.begin(), y_only.end(), m.id) != y_only.end())
          kept.push_back(m);
      if (kept.size() != y_only.size())
        throw ConfigError("--only names a method that does not exist");
      yspec.methods = kept;
    }
    rc = execute_experiment(yspec, g, out, err);
  });

  // --- run <spec-file> ---------------------------------------------------
  auto* run = app.add_subcommand("run", "Execute an experiment spec file");
  std::string spec_path;
  run->add_option("spec", spec_path, "Path to the spec file")->required();
  run->callback([&]() {
    finish_globals();
    rc = execute_experiment(parse_experiment_file(spec_path), g, out, err);
  });

  // --- policy-eval --------------------------------------------------------
  auto* pe = app.add_subcommand(
      "policy-eval",
      "Linear policy evaluation on a synthetic featurized chain");
  PolicyEvalOpts po;
  pe->add_option("--states", po.n_states, "Number of states")
      ->capture_default_str();
  pe->add_option("--features", po.k, "Informative feature columns")
      ->capture_default_str();
  pe->add_option("--noise", po.noise, "Distractor feature scale")
      ->capture_default_str();
  pe->add_option("--gamma", po.gamma, "Discount")->capture_default_str();
  pe->add_option("--transitions", po.cfg.n_transitions,
                 "Stream length per replicate")
      ->capture_default_str();
  pe->add_option("--eval-every", po.cfg.eval_every, "Checkpoint spacing")
      ->capture_default_str();
  pe->add_option("--replicates", po.replicates, "Independent streams")
      ->capture_default_str();
  pe->add_option("--confidence", po.confidence,
                 "Confidence level of the aggregate bands")
      ->capture_default_str();
  pe->add_option("--lr", po.cfg.lr, "TD(0) / recurrent value learning rate")
      ->capture_default_str();
  pe->add_option("--lr-trace", po.cfg.lr_trace, "TD(lambda) learning rate")
      ->capture_default_str();
  pe->add_option("--lr-beta", po.cfg.lr_beta, "Emphasis learning rate")
      ->capture_default_str();
  pe->add_option("--lambda", po.cfg.lambda, "Trace decay")
      ->capture_default_str();
  pe->callback([&]() {
    finish_globals();
    rc = run_policy_eval(po, g, out);
  });

  // --- theory -------------------------------------------------------------
  auto* th = app.add_subcommand(
      "theory", "Value bounds and gating thresholds for given constants");
  ContractionConfig tcfg;
  bool c_given = false;
  th->add_option("--gamma", tcfg.gamma, "Discount")->capture_default_str();
  th->add_option("--d", tcfg.d, "Emphasis floor")->capture_default_str();
  th->add_option("--r-min", tcfg.r_min, "Smallest reward")
      ->capture_default_str();
  th->add_option("--r-max", tcfg.r_max_tilde, "Largest adjusted reward")
      ->capture_default_str();
  auto* copt = th->add_option("--c", tcfg.c, "Gating threshold to evaluate")
                   ->capture_default_str();
  th->callback([&]() {
    c_given = copt->count() > 0;
    const double c_min = min_gating_threshold(tcfg.gamma, tcfg.d);
    // Bounds only need the reward/discount constants; evaluate them at the
    // admissible threshold so cfg.validate() inside does not reject c.
    ContractionConfig bc = tcfg;
    bc.c = std::max(tcfg.c, c_min);
    const ValueBounds vb = value_bounds(bc);
    out << "gamma = " << g12(tcfg.gamma) << "   d = " << g12(tcfg.d)
        << "   r_min = " << g12(tcfg.r_min)
        << "   r_max = " << g12(tcfg.r_max_tilde) << "\n";
    out << "contraction modulus gamma + (1 - d) = "
        << g12(tcfg.gamma + (1.0 - tcfg.d)) << "\n";
    out << "v_min = " << g12(vb.v_min) << "\n";
    out << "v_max = " << g12(vb.v_max) << "\n";
    out << "c_min (smallest admissible gating threshold) = " << g12(c_min)
        << "\n";
    const double span = vb.v_max - vb.v_min;
    const double c_self =
        std::max(0.0, 1.0 - (1.0 - tcfg.d) * vb.v_min / span);
    out << "c needed for self-mapping of [v_min, v_max] = " << g12(c_self)
        << "\n";
    if (c_given) {
      out << "at c = " << g12(tcfg.c)
          << ": admissibility lhs = "
          << g12(gating_inequality_lhs(tcfg.gamma, tcfg.d, tcfg.c))
          << " (needs <= 1), self-mapping margin = "
          << g12(self_mapping_margin(bc)) << "\n";
    }
  });

  // --- decompose ------------------------------------------------------------
  auto* dc = app.add_subcommand(
      "decompose",
      "Split one smoothed estimate into the examined state's share and the "
      "rest");
  std::string dc_betas = "0.9,0.1,0.1";
  std::string dc_values = "0,1,2";
  int dc_i = 2;
  dc->add_option("--betas", dc_betas,
                 "Blend weights at positions 1..t (the first is consumed by "
                 "initialization)")
      ->capture_default_str();
  dc->add_option("--values", dc_values, "Table values at positions 1..t")
      ->capture_default_str();
  dc->add_option("--i", dc_i, "Position under examination (1-based)")
      ->capture_default_str();
  dc->callback([&]() {
    const std::vector<double> betas = parse_double_list("betas", dc_betas);
    const std::vector<double> values = parse_double_list("values", dc_values);
    const DecompositionReport rep = decompose_update(betas, values, dc_i);
    out << "c_t      = " << g12(rep.c_t) << "\n";
    out << "v_tilde  = " << g12(rep.v_tilde) << "\n";
    out << "delta    = " << g12(rep.delta) << "\n";
    out << "v_beta   = " << g12(rep.v_beta) << "\n";
  });

  // --- certify ---------------------------------------------------------------
  auto* ce = app.add_subcommand(
      "certify",
      "Empirically certify the contraction modulus on random chains");
  ContractionConfig ccfg;
  int ce_chains = 20, ce_min = 5, ce_max = 8, ce_pairs = 12, ce_samples = 400;
  ce->add_option("--chains", ce_chains, "Random chains to test")
      ->capture_default_str();
  ce->add_option("--states-min", ce_min, "Smallest chain size")
      ->capture_default_str();
  ce->add_option("--states-max", ce_max, "Largest chain size")
      ->capture_default_str();
  ce->add_option("--pairs", ce_pairs, "Value-vector pairs per chain")
      ->capture_default_str();
  ce->add_option("--samples", ce_samples, "Rollouts per start state")
      ->capture_default_str();
  ce->add_option("--gamma", ccfg.gamma, "Discount")->capture_default_str();
  ce->add_option("--d", ccfg.d, "Emphasis floor")->capture_default_str();
  ce->add_option("--c", ccfg.c, "Gating threshold")->capture_default_str();
  ce->add_option("--r-min", ccfg.r_min, "Smallest reward")
      ->capture_default_str();
  ce->add_option("--r-max", ccfg.r_max_tilde, "Largest adjusted reward")
      ->capture_default_str();
  ce->callback([&]() {
    finish_globals();
    ccfg.validate();
    if (ce_min < 2 || ce_max < ce_min)
      throw ConfigError("need 2 <= states-min <= states-max");
    const std::uint64_t seed = g.seed_set ? g.seed : 11;
    bool all_pass = true;
    for (int i = 0; i < ce_chains; ++i) {
      Rng rng(derive_seed(seed, 0x6ce2, static_cast<std::uint64_t>(i)));
      const int n =
          ce_min + static_cast<int>(rng.below(
                       static_cast<std::uint64_t>(ce_max - ce_min + 1)));
      const MarkovRewardProcess mrp =
          build_random_mrp(n, derive_seed(seed, 0xc4a1, i), ccfg.r_min,
                           ccfg.r_max_tilde, ccfg.gamma, ccfg.d);
      const CertificationReport rep =
          certify_contraction(mrp, ccfg, ce_pairs, rng, ce_samples);
      out << "chain " << i << " (" << n << " states): max ratio "
          << g6(rep.max_ratio) << " vs bound " << g6(rep.bound) << " + 3*"
          << g6(rep.se_at_max) << (rep.pass ? "  PASS" : "  FAIL") << "\n";
      all_pass = all_pass && rep.pass;
    }
    out << (all_pass ? "all chains certified\n"
                     : "certification failed on at least one chain\n");
    if (!all_pass) rc = kPartial;
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    // CLI11 consumes the vector back to front.
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return kUsage;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kPartial;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  }
  return rc;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_run(args, std::cout, std::cerr);
}

}  // namespace rvf
