#include "hdbf/cli.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <CLI11.hpp>

#include "hdbf/csv.hpp"
#include "hdbf/simulation.hpp"
#include "hdbf/types.hpp"

namespace hdbf {

namespace {

constexpr const char* kMethodHelp =
    "NEW, CQ, EB, WB, CHI2_TCQ, CHI2_NORM";

struct InputFlags {
  bool has_header = false;
  std::string delimiter = ",";
  bool transpose = false;
};

void add_input_flags(CLI::App* sub, InputFlags& f) {
  sub->add_flag("--has-header", f.has_header,
                "Skip one header row in each input file");
  sub->add_option("--delimiter", f.delimiter,
                  "Cell delimiter, a single character")
      ->capture_default_str();
  sub->add_flag("--transpose", f.transpose,
                "Input files are variables-by-observations; transpose after "
                "loading");
}

CsvSpec make_csv_spec(const std::string& path, const InputFlags& f) {
  if (f.delimiter.size() != 1) {
    throw CLI::ValidationError("--delimiter", "must be a single character");
  }
  CsvSpec spec;
  spec.path = path;
  spec.has_header = f.has_header;
  spec.delimiter = f.delimiter[0];
  spec.transpose = f.transpose;
  return spec;
}

void check_open_unit(double v, const char* flag) {
  if (!(v > 0.0 && v < 1.0)) {
    throw CLI::ValidationError(flag, "must lie strictly in (0, 1)");
  }
}

Method parse_method(const std::string& text, const char* flag) {
  const auto m = method_from_name(text);
  if (!m) {
    throw CLI::ValidationError(flag, "unknown method '" + text + "' (valid: " +
                                         std::string(kMethodHelp) + ")");
  }
  return *m;
}

std::vector<Method> parse_method_list(const std::string& text) {
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto begin = item.find_first_not_of(" \t");
    const auto end = item.find_last_not_of(" \t");
    if (begin == std::string::npos) continue;
    out.push_back(parse_method(item.substr(begin, end - begin + 1),
                               "--methods"));
  }
  if (out.empty()) {
    throw CLI::ValidationError("--methods", "no methods given");
  }
  return out;
}

double parse_flag_double(const std::string& text, const char* flag) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end || begin == end) {
    throw CLI::ValidationError(flag, "cannot parse '" + text + "' as a number");
  }
  return value;
}

// Model names: I, II, III, IV, or gamma:G with G in [0, 1].
ModelSpec parse_model(const std::string& text, const char* flag) {
  ModelSpec spec;
  if (text == "I") {
    spec.model = Model::kI;
  } else if (text == "II") {
    spec.model = Model::kII;
  } else if (text == "III") {
    spec.model = Model::kIII;
  } else if (text == "IV") {
    spec.model = Model::kIV;
  } else if (text.rfind("gamma:", 0) == 0) {
    spec.model = Model::kGamma;
    spec.gamma = parse_flag_double(text.substr(6), flag);
    if (!(spec.gamma >= 0.0 && spec.gamma <= 1.0)) {
      throw CLI::ValidationError(flag, "gamma must lie in [0, 1]");
    }
  } else {
    throw CLI::ValidationError(flag,
                               "expected I, II, III, IV, or gamma:G");
  }
  return spec;
}

std::vector<double> parse_grid(const std::string& text) {
  if (text.empty()) {
    std::vector<double> grid;
    for (int i = 1; i <= 99; ++i) grid.push_back(static_cast<double>(i) / 100.0);
    return grid;
  }
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const double a = parse_flag_double(item, "--grid");
    check_open_unit(a, "--grid");
    grid.push_back(a);
  }
  if (grid.empty()) {
    throw CLI::ValidationError("--grid", "no levels given");
  }
  return grid;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  return out;
}

std::string report_summary(const ExperimentReport& rep) {
  std::ostringstream line;
  line << "model=" << rep.model << " n1=" << rep.n1 << " n2=" << rep.n2
       << " p=" << rep.p << " beta=" << format_double(rep.beta)
       << " reps=" << rep.reps << " b=" << rep.b
       << " alpha=" << format_double(rep.alpha) << " seed=" << rep.seed;
  for (std::size_t i = 0; i < rep.tallies.size(); ++i) {
    line << ' ' << method_name(rep.tallies[i].method) << '='
         << format_double(rep.rate(i));
  }
  return line.str();
}

struct TestArgs {
  std::string group1;
  std::string group2;
  std::string method = "NEW";
  std::int64_t b = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::string out;
  InputFlags in;
};

int run_test_cmd(const TestArgs& a) {
  const Method method = parse_method(a.method, "--method");
  check_open_unit(a.alpha, "--alpha");
  const DataMatrix x1 = load_group(make_csv_spec(a.group1, a.in));
  const DataMatrix x2 = load_group(make_csv_spec(a.group2, a.in));
  const TestResult res =
      run_single_test(method, x1, x2, a.b, a.alpha, RngSeed{a.seed, 0});
  std::cout << "method=" << method_name(res.method)
            << " statistic=" << format_double(res.statistic)
            << " p=" << format_double(res.p_value)
            << " reject=" << (res.reject ? 1 : 0) << '\n';
  if (!a.out.empty()) {
    std::ofstream out = open_out(a.out);
    write_result_csv(out, res);
  }
  return 0;
}

struct SimulateArgs {
  std::string model;
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
  std::int64_t p = 0;
  double beta = 0.0;
  std::int64_t reps = 1000;
  std::int64_t b = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::string methods = "NEW";
  std::string out;
};

int run_simulate_cmd(const SimulateArgs& a) {
  ModelSpec spec = parse_model(a.model, "--model");
  spec.n1 = a.n1;
  spec.n2 = a.n2;
  spec.p = a.p;
  check_open_unit(a.alpha, "--alpha");
  const std::vector<Method> methods = parse_method_list(a.methods);
  const ExperimentReport rep = run_power_experiment(
      spec, a.beta, methods, a.reps, a.b, a.alpha, RngSeed{a.seed, 0});
  std::cout << report_summary(rep) << '\n';
  std::ofstream out = open_out(a.out);
  write_report_csv(out, rep);
  return 0;
}

struct QqArgs {
  std::string model;
  std::string mode = "qf";
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
  std::int64_t p = 0;
  std::int64_t reps = 10000;
  std::int64_t n_ref = 100000;
  std::uint64_t seed = 0;
  std::string out;
};

int run_qq_cmd(const QqArgs& a) {
  ModelSpec spec;
  QqReference reference;
  if (a.mode == "qf") {
    if (a.model.empty()) {
      throw CLI::ValidationError("--model", "required when --mode is qf");
    }
    spec = parse_model(a.model, "--model");
    reference = QqReference::kQuadraticForm;
  } else if (a.mode.rfind("gamma:", 0) == 0) {
    if (!a.model.empty()) {
      throw CLI::ValidationError(
          "--mode", "gamma mode fixes the model; drop --model");
    }
    spec = parse_model(a.mode, "--mode");
    reference = QqReference::kGammaMixture;
  } else {
    throw CLI::ValidationError("--mode", "expected qf or gamma:G");
  }
  spec.n1 = a.n1;
  spec.n2 = a.n2;
  spec.p = a.p;
  const auto pairs =
      qq_pairs(spec, a.reps, RngSeed{a.seed, 0}, a.n_ref, reference);
  std::cout << "model=" << model_label(spec) << " mode=" << a.mode
            << " n1=" << a.n1 << " n2=" << a.n2 << " p=" << a.p
            << " reps=" << a.reps << " n_ref=" << a.n_ref
            << " seed=" << a.seed << '\n';
  std::ofstream out = open_out(a.out);
  write_pairs_csv(out, "empirical_quantile", "reference_quantile", pairs);
  return 0;
}

struct RocArgs {
  std::string model;
  double beta = 1.0;
  std::string method = "NEW";
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
  std::int64_t p = 0;
  std::int64_t reps = 1000;
  std::int64_t b = 1000;
  std::uint64_t seed = 0;
  std::string grid;
  std::string out;
};

int run_roc_cmd(const RocArgs& a) {
  ModelSpec spec = parse_model(a.model, "--model");
  spec.n1 = a.n1;
  spec.n2 = a.n2;
  spec.p = a.p;
  const Method method = parse_method(a.method, "--method");
  const std::vector<double> grid = parse_grid(a.grid);
  const auto curve =
      roc_curve(spec, a.beta, method, a.reps, a.b, RngSeed{a.seed, 0}, grid);
  std::cout << "model=" << model_label(spec) << " beta=" << format_double(a.beta)
            << " method=" << method_name(method) << " n1=" << a.n1
            << " n2=" << a.n2 << " p=" << a.p << " reps=" << a.reps
            << " b=" << a.b << " seed=" << a.seed
            << " points=" << curve.size() << '\n';
  std::ofstream out = open_out(a.out);
  write_pairs_csv(out, "alpha", "power", curve);
  return 0;
}

struct ResampleArgs {
  std::string group1;
  std::string group2;
  std::string methods = "NEW";
  std::int64_t reps = 1000;
  std::int64_t b = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::string out;
  InputFlags in;
};

int run_resample_cmd(const ResampleArgs& a) {
  const std::vector<Method> methods = parse_method_list(a.methods);
  check_open_unit(a.alpha, "--alpha");
  const DataMatrix x1 = load_group(make_csv_spec(a.group1, a.in));
  const DataMatrix x2 = load_group(make_csv_spec(a.group2, a.in));
  const ExperimentReport rep = resampled_null_sizes(
      x1, x2, methods, a.reps, a.b, a.alpha, RngSeed{a.seed, 0});
  std::cout << report_summary(rep) << '\n';
  std::ofstream out = open_out(a.out);
  write_report_csv(out, rep);
  return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{
      "Two-sample mean tests for high-dimensional data: sign-randomization "
      "test, reference tests, and simulation experiments"};
  app.name("hdbf");
  app.require_subcommand(1);

  TestArgs t;
  CLI::App* test = app.add_subcommand(
      "test", "Run one two-sample test on a pair of CSV files");
  test->add_option("--group1", t.group1, "Group-1 CSV, observations as rows")
      ->required();
  test->add_option("--group2", t.group2, "Group-2 CSV, observations as rows")
      ->required();
  test->add_option("--method", t.method,
                   std::string("Method: ") + kMethodHelp)
      ->capture_default_str();
  test->add_option("--b", t.b, "Resample count for resampling methods")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  test->add_option("--alpha", t.alpha, "Test level")->capture_default_str();
  test->add_option("--seed", t.seed, "RNG seed")->capture_default_str();
  test->add_option("--out", t.out, "Optional result CSV path");
  add_input_flags(test, t.in);

  SimulateArgs s;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Size or power experiment on a generation model");
  simulate->add_option("--model", s.model, "Model: I, II, III, IV, or gamma:G")
      ->required();
  simulate->add_option("--n1", s.n1, "Group-1 sample size")
      ->required()
      ->check(CLI::PositiveNumber);
  simulate->add_option("--n2", s.n2, "Group-2 sample size")
      ->required()
      ->check(CLI::PositiveNumber);
  simulate->add_option("--p", s.p, "Dimension")
      ->required()
      ->check(CLI::PositiveNumber);
  simulate->add_option("--beta", s.beta,
                       "Signal strength; 0 runs the size experiment")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  simulate->add_option("--reps", s.reps, "Replication count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--b", s.b, "Resample count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--alpha", s.alpha, "Test level")->capture_default_str();
  simulate->add_option("--seed", s.seed, "RNG seed")->capture_default_str();
  simulate
      ->add_option("--methods", s.methods,
                   std::string("Comma-separated methods: ") + kMethodHelp)
      ->capture_default_str();
  simulate->add_option("--out", s.out, "Report CSV path")->required();

  QqArgs q;
  CLI::App* qq = app.add_subcommand(
      "qq", "Null quantiles of the standardized statistic against a "
            "reference law");
  qq->add_option("--model", q.model,
                 "Model: I, II, III, IV, or gamma:G (qf mode only)");
  qq->add_option("--mode", q.mode,
                 "Reference: qf (quadratic form for the model) or gamma:G "
                 "(asymptotic mixture; fixes the model)")
      ->capture_default_str();
  qq->add_option("--n1", q.n1, "Group-1 sample size")
      ->required()
      ->check(CLI::PositiveNumber);
  qq->add_option("--n2", q.n2, "Group-2 sample size")
      ->required()
      ->check(CLI::PositiveNumber);
  qq->add_option("--p", q.p, "Dimension")
      ->required()
      ->check(CLI::PositiveNumber);
  qq->add_option("--reps", q.reps, "Empirical draws")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  qq->add_option("--n-ref", q.n_ref, "Reference-law draws")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  qq->add_option("--seed", q.seed, "RNG seed")->capture_default_str();
  qq->add_option("--out", q.out, "Quantile-pair CSV path")->required();

  RocArgs r;
  CLI::App* roc = app.add_subcommand(
      "roc", "Rejection rate of one method across a grid of levels");
  roc->add_option("--model", r.model, "Model: I, II, III, IV, or gamma:G")
      ->required();
  roc->add_option("--beta", r.beta, "Signal strength")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  roc->add_option("--method", r.method, std::string("Method: ") + kMethodHelp)
      ->capture_default_str();
  roc->add_option("--n1", r.n1, "Group-1 sample size")
      ->required()
      ->check(CLI::PositiveNumber);
  roc->add_option("--n2", r.n2, "Group-2 sample size")
      ->required()
      ->check(CLI::PositiveNumber);
  roc->add_option("--p", r.p, "Dimension")
      ->required()
      ->check(CLI::PositiveNumber);
  roc->add_option("--reps", r.reps, "Replication count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  roc->add_option("--b", r.b, "Resample count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  roc->add_option("--seed", r.seed, "RNG seed")->capture_default_str();
  roc->add_option("--grid", r.grid,
                  "Comma-separated levels in (0, 1); default 0.01..0.99");
  roc->add_option("--out", r.out, "Curve CSV path")->required();

  ResampleArgs rs;
  CLI::App* resample = app.add_subcommand(
      "resample-size", "Null rejection rates on centered resamples of real "
                       "data");
  resample->add_option("--group1", rs.group1, "Group-1 CSV")->required();
  resample->add_option("--group2", rs.group2, "Group-2 CSV")->required();
  resample
      ->add_option("--methods", rs.methods,
                   std::string("Comma-separated methods: ") + kMethodHelp)
      ->capture_default_str();
  resample->add_option("--reps", rs.reps, "Resampled replication count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  resample->add_option("--b", rs.b, "Resample count inside each test")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  resample->add_option("--alpha", rs.alpha, "Test level")
      ->capture_default_str();
  resample->add_option("--seed", rs.seed, "RNG seed")->capture_default_str();
  resample->add_option("--out", rs.out, "Report CSV path")->required();
  add_input_flags(resample, rs.in);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (test->parsed()) return run_test_cmd(t);
    if (simulate->parsed()) return run_simulate_cmd(s);
    if (qq->parsed()) return run_qq_cmd(q);
    if (roc->parsed()) return run_roc_cmd(r);
    if (resample->parsed()) return run_resample_cmd(rs);
    throw CLI::CallForHelp();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace hdbf
