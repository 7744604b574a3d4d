#include "tsvd/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "tsvd/expansions.hpp"
#include "tsvd/harness.hpp"
#include "tsvd/matrix_io.hpp"

namespace tsvd {

namespace {

using nlohmann::json;

json matrix_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json vector_json(const std::vector<double>& v) {
  return json(v);
}

json assertions_json(const std::vector<Assertion>& as) {
  json out = json::array();
  for (const auto& a : as) {
    out.push_back(json{{"name", a.name},
                       {"lhs", a.lhs},
                       {"rhs", a.rhs},
                       {"margin", a.margin},
                       {"pass", a.pass}});
  }
  return out;
}

void flatten_csv(std::ostream& os, const std::string& prefix, const json& j) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      flatten_csv(os, prefix.empty() ? key : prefix + "." + key, value);
    }
  } else if (j.is_array()) {
    for (size_t i = 0; i < j.size(); ++i) {
      flatten_csv(os, prefix + "[" + std::to_string(i) + "]", j[i]);
    }
  } else {
    os << prefix << "," << j.dump() << "\n";
  }
}

struct Emitter {
  std::string out_path;  // empty -> stdout
  std::string format = "json";

  void write(const std::string& text) const {
    if (out_path.empty()) {
      std::cout << text;
      return;
    }
    std::ofstream f(out_path);
    if (!f) throw IoError("cannot open output file '" + out_path + "'");
    f << text;
    if (!f) throw IoError("write failed for '" + out_path + "'");
  }

  // Reports serialize as JSON, or as flat key,value CSV rows.
  void report(const json& j) const {
    if (format == "csv") {
      std::ostringstream os;
      flatten_csv(os, "", j);
      write(os.str());
    } else {
      write(j.dump(2) + "\n");
    }
  }

  // Matrix-producing commands emit the raw matrix in CSV mode.
  void matrix_or_report(const Matrix& M, const json& j) const {
    if (format == "csv") {
      write(format_matrix_csv(M));
    } else {
      write(j.dump(2) + "\n");
    }
  }
};

std::pair<double, double> parse_range(const std::string& text, const char* flag) {
  std::istringstream in(text);
  double lo = 0.0, hi = 0.0;
  char sep = 0;
  if (!(in >> lo >> sep >> hi) || sep != ':' || !in.eof()) {
    throw UsageError(std::string(flag) + ": expected LO:HI, got '" + text + "'");
  }
  return {lo, hi};
}

struct LadderSpec {
  double from = 1e-2;
  double to = 1e-5;
  int steps = 8;
};

LadderSpec parse_ladder(const std::string& text) {
  std::istringstream in(text);
  LadderSpec spec;
  char s1 = 0, s2 = 0;
  if (!(in >> spec.from >> s1 >> spec.to >> s2 >> spec.steps) || s1 != ':' ||
      s2 != ':' || !in.eof()) {
    throw UsageError("--eps: expected LO:HI:STEPS, got '" + text + "'");
  }
  return spec;
}

std::vector<double> parse_spectrum(const std::string& text) {
  std::vector<double> values;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw UsageError("--spectrum: bad value '" + cell + "'");
    }
  }
  if (values.empty()) throw UsageError("--spectrum: empty list");
  return values;
}

DeltaStructure parse_structure(const std::string& text) {
  if (text == "dense") return DeltaStructure::Dense;
  if (text == "rank1") return DeltaStructure::Rank1;
  if (text == "rank2") return DeltaStructure::Rank2;
  throw UsageError("--structure: expected dense|rank1|rank2");
}

BoundCriterion parse_bound(const std::string& text) {
  if (text == "trivial") return BoundCriterion::Trivial;
  if (text == "quadratic") return BoundCriterion::Quadratic;
  if (text == "combined") return BoundCriterion::Combined;
  if (text == "asymptotic") return BoundCriterion::Asymptotic;
  throw UsageError("--bound: expected trivial|quadratic|combined|asymptotic");
}

// Default study instance: spectrum (r, r-1, ..., 1, 0, ...) on an
// (r+3) x (r+2) shape, so the matrix has exact rank r.
Matrix default_instance(int r, std::uint64_t seed) {
  SpectrumSpec spec;
  spec.rows = r + 3;
  spec.cols = r + 2;
  const int k = std::min(spec.rows, spec.cols);
  for (int i = 0; i < k; ++i) {
    spec.values.push_back(i < r ? static_cast<double>(r - i) : 0.0);
  }
  return gen_rank_structured(spec, seed);
}

json golden_json(const GoldenReport& rep, const std::string& command) {
  json scalars = json::object();
  for (const auto& [key, value] : rep.scalars) scalars[key] = value;
  return json{{"command", command},
              {"inputs", json::object()},
              {"outputs", scalars},
              {"assertions", assertions_json(rep.assertions)},
              {"exit_hint", rep.all_pass ? 0 : 1}};
}

struct CommonOpts {
  std::string matrix_path;
  std::string delta_path;
  int rank = 0;
  int order = 1;
  bool force = false;
  std::string eps = "1e-2:1e-5:8";
  int trials = 1000;
  std::string norm_range;
  std::uint64_t seed = 1;
  std::string structure = "dense";
  std::string bound = "quadratic";
  std::string spectrum;
  int rows = 0;
  int cols = 0;
  double target_norm = -1.0;
  Emitter emit;
};

int run_tsvd(const CommonOpts& o) {
  const Matrix X = read_matrix(o.matrix_path);
  const SubspaceDecomposition dec = subspace_decompose(X, o.rank);
  const Matrix T = dec.truncation();
  json rep{{"command", "tsvd"},
           {"inputs", {{"matrix", o.matrix_path}, {"rank", o.rank}}},
           {"outputs",
            {{"truncation", matrix_json(T)},
             {"sigma1", vector_json(dec.sigma1)},
             {"sigma2", vector_json(dec.sigma2)},
             {"nonunique", dec.tie}}},
           {"assertions", json::array()},
           {"exit_hint", 0}};
  o.emit.matrix_or_report(T, rep);
  return 0;
}

int run_expand(const CommonOpts& o) {
  const Matrix X = read_matrix(o.matrix_path);
  const Matrix D = read_matrix(o.delta_path);
  const SubspaceDecomposition dec = subspace_decompose(X, o.rank);
  ExpansionResult res;
  if (o.order == 2) {
    res = tsvd_second_order_rank_r(dec, D, o.force);
  } else if (dec.rank_r()) {
    res = tsvd_first_order_rank_r(dec, D, o.force);
  } else {
    res = tsvd_first_order(dec, D, o.force);
  }
  json outputs{{"approx", matrix_json(res.approx)},
               {"order", res.order},
               {"delta_term_norm", res.delta_term.norm()},
               {"double_sum_norm", res.double_sum.norm()},
               {"gap_satisfied", res.gap_satisfied}};
  if (res.second_order) {
    outputs["second_order_norm"] = res.second_order->sum().norm();
  }
  json rep{{"command", "expand"},
           {"inputs",
            {{"matrix", o.matrix_path},
             {"delta", o.delta_path},
             {"rank", o.rank},
             {"order", o.order},
             {"force", o.force}}},
           {"outputs", outputs},
           {"assertions", json::array()},
           {"exit_hint", 0}};
  o.emit.matrix_or_report(res.approx, rep);
  return 0;
}

int run_residual(const CommonOpts& o) {
  const Matrix X = read_matrix(o.matrix_path);
  const Matrix D = read_matrix(o.delta_path);
  const ResidualReport res = residual(X, o.rank, D);
  std::vector<Assertion> as{
      {"trivial_bound", res.residual_norm, res.bound_trivial + 1e-9,
       res.bound_trivial + 1e-9 - res.residual_norm,
       res.residual_norm <= res.bound_trivial + 1e-9},
      {"quadratic_bound", res.residual_norm, res.bound_quadratic + 1e-9,
       res.bound_quadratic + 1e-9 - res.residual_norm,
       res.residual_norm <= res.bound_quadratic + 1e-9},
      {"combined_bound", res.residual_norm, res.bound_combined + 1e-9,
       res.bound_combined + 1e-9 - res.residual_norm,
       res.residual_norm <= res.bound_combined + 1e-9}};
  const bool pass = as[0].pass && as[1].pass && as[2].pass;
  json rep{{"command", "residual"},
           {"inputs",
            {{"matrix", o.matrix_path}, {"delta", o.delta_path}, {"rank", o.rank}}},
           {"outputs",
            {{"residual_norm", res.residual_norm},
             {"bound_trivial", res.bound_trivial},
             {"bound_quadratic", res.bound_quadratic},
             {"bound_combined", res.bound_combined},
             {"ratio", res.ratio},
             {"ratio_defined", res.ratio_defined},
             {"nonunique_truncation", res.nonunique_truncation},
             {"sigma_r", res.sigma_r},
             {"delta_norm", res.delta_norm}}},
           {"assertions", assertions_json(as)},
           {"exit_hint", pass ? 0 : 1}};
  o.emit.report(rep);
  return pass ? 0 : 1;
}

int run_bounds(const CommonOpts& o) {
  const Matrix X = read_matrix(o.matrix_path);
  const Matrix D = read_matrix(o.delta_path);
  const BoundSuiteReport suite = bound_suite(X, o.rank, D);
  std::vector<Assertion> as{
      {"trivial_bound", suite.res.residual_norm, suite.res.bound_trivial + suite.slack,
       suite.res.bound_trivial + suite.slack - suite.res.residual_norm, suite.trivial_ok},
      {"quadratic_bound", suite.res.residual_norm, suite.res.bound_quadratic + suite.slack,
       suite.res.bound_quadratic + suite.slack - suite.res.residual_norm, suite.quadratic_ok},
      {"combined_bound", suite.res.residual_norm, suite.res.bound_combined + suite.slack,
       suite.res.bound_combined + suite.slack - suite.res.residual_norm, suite.combined_ok},
      {"weyl", suite.wm.weyl_lhs, suite.wm.weyl_rhs + 1e-10,
       suite.wm.weyl_margin() + 1e-10, suite.weyl_ok},
      {"mirsky", suite.wm.mirsky_lhs, suite.wm.mirsky_rhs + 1e-10,
       suite.wm.mirsky_margin() + 1e-10, suite.mirsky_ok}};
  json rep{{"command", "bounds"},
           {"inputs",
            {{"matrix", o.matrix_path}, {"delta", o.delta_path}, {"rank", o.rank}}},
           {"outputs",
            {{"residual_norm", suite.res.residual_norm},
             {"ratio", suite.res.ratio},
             {"nonunique_truncation", suite.res.nonunique_truncation},
             {"weyl_margin", suite.wm.weyl_margin()},
             {"mirsky_margin", suite.wm.mirsky_margin()}}},
           {"assertions", assertions_json(as)},
           {"exit_hint", suite.all_ok ? 0 : 1}};
  o.emit.report(rep);
  return suite.all_ok ? 0 : 1;
}

int run_converge(const CommonOpts& o) {
  const Matrix X = o.matrix_path.empty() ? default_instance(o.rank, o.seed)
                                         : read_matrix(o.matrix_path);
  const Matrix dir =
      o.delta_path.empty()
          ? gen_delta(static_cast<int>(X.rows()), static_cast<int>(X.cols()),
                      1.0, o.seed + 1)
          : read_matrix(o.delta_path);
  const LadderSpec spec = parse_ladder(o.eps);
  const std::vector<double> ladder =
      geometric_ladder(spec.from, spec.to, spec.steps);
  const ConvergenceReport rep =
      convergence_study(X, o.rank, dir, ladder, o.order);
  json out{{"command", "converge"},
           {"inputs",
            {{"matrix", o.matrix_path.empty() ? "<generated>" : o.matrix_path},
             {"rank", o.rank},
             {"order", o.order},
             {"eps", o.eps},
             {"seed", o.seed}}},
           {"outputs",
            {{"eps_ladder", vector_json(rep.eps_ladder)},
             {"residual_norms", vector_json(rep.residual_norms)},
             {"slope", rep.slope},
             {"intercept", rep.intercept},
             {"order_tested", rep.order_tested},
             {"used_points", rep.used_points}}},
           {"assertions", json::array()},
           {"exit_hint", 0}};
  o.emit.report(out);
  return 0;
}

int run_search(const CommonOpts& o) {
  const Matrix X = o.matrix_path.empty() ? default_instance(o.rank, o.seed)
                                         : read_matrix(o.matrix_path);
  double lo = 0.0, hi = 0.0;
  if (o.norm_range.empty()) {
    const double sr = subspace_decompose(X, o.rank).sigma_r();
    lo = 1e-6 * sr;
    hi = 10.0 * sr;
  } else {
    std::tie(lo, hi) = parse_range(o.norm_range, "--norm-range");
  }
  const BoundCriterion crit = parse_bound(o.bound);
  const SearchReport rep =
      bound_search(X, o.rank, o.trials, lo, hi, o.seed, crit);
  const bool pass = rep.violations == 0;
  std::vector<Assertion> as{{"no_violations", static_cast<double>(rep.violations),
                             0.0, -static_cast<double>(rep.violations), pass}};
  json out{{"command", "search"},
           {"inputs",
            {{"matrix", o.matrix_path.empty() ? "<generated>" : o.matrix_path},
             {"rank", o.rank},
             {"trials", o.trials},
             {"norm_lo", lo},
             {"norm_hi", hi},
             {"seed", o.seed},
             {"bound", o.bound}}},
           {"outputs",
            {{"max_ratio", rep.max_ratio},
             {"argmax_norm", rep.argmax_norm},
             {"argmax_seed", rep.argmax_seed},
             {"bound_constant", rep.bound_constant},
             {"violations", rep.violations}}},
           {"assertions", assertions_json(as)},
           {"exit_hint", pass ? 0 : 1}};
  o.emit.report(out);
  return pass ? 0 : 1;
}

int run_example(const CommonOpts& o, int which) {
  const GoldenReport rep = which == 1 ? reproduce_example1() : reproduce_example2();
  o.emit.report(golden_json(rep, which == 1 ? "example1" : "example2"));
  return rep.all_pass ? 0 : 1;
}

int run_gen(const CommonOpts& o) {
  if (o.rows < 1 || o.cols < 1) {
    throw UsageError("gen: --rows and --cols are required");
  }
  Matrix M;
  json inputs{{"rows", o.rows}, {"cols", o.cols}, {"seed", o.seed}};
  if (o.target_norm >= 0.0) {
    M = gen_delta(o.rows, o.cols, o.target_norm, o.seed,
                  parse_structure(o.structure));
    inputs["target_norm"] = o.target_norm;
    inputs["structure"] = o.structure;
  } else if (!o.spectrum.empty()) {
    SpectrumSpec spec{parse_spectrum(o.spectrum), o.rows, o.cols};
    M = gen_rank_structured(spec, o.seed);
    inputs["spectrum"] = o.spectrum;
  } else {
    throw UsageError("gen: need --spectrum (matrix) or --target-norm (delta)");
  }
  json rep{{"command", "gen"},
           {"inputs", inputs},
           {"outputs", {{"matrix", matrix_json(M)}, {"fro_norm", M.norm()}}},
           {"assertions", json::array()},
           {"exit_hint", 0}};
  // gen defaults to raw CSV; a JSON report must be requested explicitly.
  if (o.emit.format == "json") {
    o.emit.report(rep);
  } else {
    o.emit.write(format_matrix_csv(M));
  }
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"Truncated SVD perturbation expansions and error bounds"};
  app.require_subcommand(1);
  CommonOpts o;

  auto add_common = [&o](CLI::App* sub, bool matrix, bool delta, bool rank) {
    if (matrix) sub->add_option("--matrix", o.matrix_path, "matrix CSV file");
    if (delta) sub->add_option("--delta", o.delta_path, "perturbation CSV file");
    if (rank) sub->add_option("--rank", o.rank, "truncation order r")->required();
    sub->add_option("--out", o.emit.out_path, "output file (default stdout)");
    sub->add_option("--format", o.emit.format, "json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
  };

  CLI::App* c_tsvd = app.add_subcommand("tsvd", "rank-r truncation of a matrix");
  add_common(c_tsvd, true, false, true);
  c_tsvd->get_option("--matrix")->required();

  CLI::App* c_expand =
      app.add_subcommand("expand", "perturbation expansion of the truncation");
  add_common(c_expand, true, true, true);
  c_expand->get_option("--matrix")->required();
  c_expand->get_option("--delta")->required();
  c_expand->add_option("--order", o.order, "expansion order")
      ->check(CLI::IsMember({1, 2}));
  c_expand->add_flag("--force", o.force, "evaluate outside the gap condition");

  CLI::App* c_residual =
      app.add_subcommand("residual", "first-order model residual and bounds");
  add_common(c_residual, true, true, true);
  c_residual->get_option("--matrix")->required();
  c_residual->get_option("--delta")->required();

  CLI::App* c_bounds =
      app.add_subcommand("bounds", "full bound suite on one instance");
  add_common(c_bounds, true, true, true);
  c_bounds->get_option("--matrix")->required();
  c_bounds->get_option("--delta")->required();

  CLI::App* c_converge =
      app.add_subcommand("converge", "expansion convergence-order study");
  add_common(c_converge, true, true, true);
  c_converge->add_option("--order", o.order, "expansion order")
      ->check(CLI::IsMember({1, 2}));
  c_converge->add_option("--eps", o.eps, "ladder LO:HI:STEPS");
  c_converge->add_option("--seed", o.seed, "generator seed");

  CLI::App* c_search =
      app.add_subcommand("search", "randomized residual-bound search");
  add_common(c_search, true, false, true);
  c_search->add_option("--trials", o.trials, "number of trials");
  c_search->add_option("--norm-range", o.norm_range, "LO:HI perturbation norms");
  c_search->add_option("--seed", o.seed, "generator seed");
  c_search->add_option("--bound", o.bound,
                       "trivial|quadratic|combined|asymptotic");

  CLI::App* c_ex1 = app.add_subcommand("example1", "worked example 1 goldens");
  add_common(c_ex1, false, false, false);
  CLI::App* c_ex2 = app.add_subcommand("example2", "worked example 2 goldens");
  add_common(c_ex2, false, false, false);

  CLI::App* c_gen = app.add_subcommand("gen", "generate a matrix or perturbation");
  add_common(c_gen, false, false, false);
  c_gen->add_option("--rows", o.rows, "row count");
  c_gen->add_option("--cols", o.cols, "column count");
  c_gen->add_option("--spectrum", o.spectrum, "comma-separated singular values");
  c_gen->add_option("--target-norm", o.target_norm,
                    "Frobenius norm of a generated perturbation");
  c_gen->add_option("--structure", o.structure, "dense|rank1|rank2");
  c_gen->add_option("--seed", o.seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  // gen emits a raw CSV matrix unless a JSON report is asked for.
  if (c_gen->parsed() && c_gen->get_option("--format")->count() == 0) {
    o.emit.format = "csv";
  }

  try {
    if (c_tsvd->parsed()) return run_tsvd(o);
    if (c_expand->parsed()) return run_expand(o);
    if (c_residual->parsed()) return run_residual(o);
    if (c_bounds->parsed()) return run_bounds(o);
    if (c_converge->parsed()) return run_converge(o);
    if (c_search->parsed()) return run_search(o);
    if (c_ex1->parsed()) return run_example(o, 1);
    if (c_ex2->parsed()) return run_example(o, 2);
    if (c_gen->parsed()) return run_gen(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int cli_dispatch(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("tsvd_cli");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace tsvd
