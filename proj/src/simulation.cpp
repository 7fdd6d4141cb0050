#include "hdbf/simulation.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <system_error>
#include <utility>
#include <vector>

#include "hdbf/competitors.hpp"
#include "hdbf/core_stats.hpp"
#include "hdbf/parallel.hpp"
#include "hdbf/randomization.hpp"

namespace hdbf {

namespace {

void validate_spec(const ModelSpec& spec, const char* where) {
  if (spec.n1 < 1 || spec.n2 < 1) {
    throw std::invalid_argument(std::string(where) +
                                ": group sizes must be positive");
  }
  if (spec.p < 1) {
    throw std::invalid_argument(std::string(where) +
                                ": dimension must be positive");
  }
  if (spec.model == Model::kII && spec.p % 4 != 0) {
    throw std::invalid_argument(std::string(where) +
                                ": the two-spike model needs p divisible by 4");
  }
  if (spec.model == Model::kGamma &&
      !(spec.gamma >= 0.0 && spec.gamma <= 1.0)) {
    throw std::invalid_argument(std::string(where) +
                                ": gamma must lie in [0, 1]");
  }
  if (spec.shift.size() != 0 && spec.shift.size() != spec.p) {
    throw std::invalid_argument(std::string(where) +
                                ": shift length must match the dimension");
  }
}

void validate_run(std::int64_t reps, std::int64_t b, double alpha,
                  const std::vector<Method>& methods, const char* where) {
  if (reps < 1) {
    throw std::invalid_argument(std::string(where) +
                                ": replication count must be positive");
  }
  if (b < 1) {
    throw std::invalid_argument(std::string(where) +
                                ": resample count must be positive");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument(std::string(where) +
                                ": alpha must lie strictly in (0, 1)");
  }
  if (methods.empty()) {
    throw std::invalid_argument(std::string(where) + ": no methods given");
  }
}

bool shift_is_zero(const Eigen::VectorXd& shift) {
  return shift.size() == 0 || (shift.array() == 0.0).all();
}

std::string short_double(double value) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  if (res.ec != std::errc()) throw std::logic_error("double format failed");
  return std::string(buf, res.ptr);
}

// The two spike directions per group: four sign blocks of length p/4.
Eigen::VectorXd quarter_pattern(Eigen::Index p, int s1, int s2, int s3, int s4) {
  const Eigen::Index q = p / 4;
  Eigen::VectorXd v(p);
  v.segment(0 * q, q).setConstant(s1);
  v.segment(1 * q, q).setConstant(s2);
  v.segment(2 * q, q).setConstant(s3);
  v.segment(3 * q, q).setConstant(s4);
  return v;
}

Eigen::MatrixXd spike_columns(Eigen::Index p, int group) {
  Eigen::MatrixXd vecs(p, 2);
  if (group == 1) {
    vecs.col(0) = quarter_pattern(p, 1, 1, 1, 1);
    vecs.col(1) = quarter_pattern(p, 1, -1, 1, -1);
  } else {
    vecs.col(0) = quarter_pattern(p, 1, 1, -1, -1);
    vecs.col(1) = quarter_pattern(p, 1, -1, -1, 1);
  }
  return vecs;
}

// Moving-average coefficients 1.01^t, one per latent coordinate.
Eigen::VectorXd ma_coefficients(Eigen::Index p) {
  Eigen::VectorXd coef(p + 5);
  double c = 1.0;
  for (Eigen::Index t = 0; t < p + 5; ++t) {
    coef[t] = c;
    c *= 1.01;
  }
  return coef;
}

// First ceil(n/2) observations get the ascending scale diagonal.
bool ascending_scales(Eigen::Index i, std::int64_t n) {
  return i < (n + 1) / 2;
}

DataMatrix generate_group(const ModelSpec& spec, int group, Rng& rng) {
  const Eigen::Index n = group == 1 ? spec.n1 : spec.n2;
  const Eigen::Index p = spec.p;
  DataMatrix y(n, p);
  switch (spec.model) {
    case Model::kI: {
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) y(i, j) = rng.next_normal();
      }
      break;
    }
    case Model::kII: {
      const Eigen::MatrixXd vecs = spike_columns(p, group);
      const double w2 = std::sqrt(0.5);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double z0 = rng.next_normal();
        const double z1 = rng.next_normal();
        for (Eigen::Index j = 0; j < p; ++j) {
          y(i, j) = z0 * vecs(j, 0) + w2 * z1 * vecs(j, 1) + rng.next_normal();
        }
      }
      break;
    }
    case Model::kIII: {
      const double scale = static_cast<double>(group);
      for (Eigen::Index i = 0; i < n; ++i) {
        const bool asc = ascending_scales(i, n);
        for (Eigen::Index j = 0; j < p; ++j) {
          const double var = scale * static_cast<double>(asc ? j + 1 : p - j);
          y(i, j) = std::sqrt(var) * rng.next_std_chi2_1();
        }
      }
      break;
    }
    case Model::kIV: {
      const Eigen::VectorXd coef = ma_coefficients(p);
      Eigen::VectorXd z(p + 5);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index t = 0; t < p + 5; ++t) z[t] = rng.next_std_chi2_1();
        for (Eigen::Index j = 0; j < p; ++j) {
          double acc = 0.0;
          for (Eigen::Index l = 0; l <= 5; ++l) acc += coef[j + l] * z[j + l];
          y(i, j) = acc;
        }
      }
      break;
    }
    case Model::kGamma: {
      const double common = std::sqrt(spec.gamma);
      const double noise = std::sqrt(1.0 - spec.gamma);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double z0 = rng.next_normal();
        for (Eigen::Index j = 0; j < p; ++j) {
          y(i, j) = common * z0 + noise * rng.next_normal();
        }
      }
      break;
    }
  }
  if (group == 2 && spec.shift.size() != 0) {
    y.rowwise() += spec.shift.transpose();
  }
  return y;
}

}  // namespace

std::string model_label(const ModelSpec& spec) {
  switch (spec.model) {
    case Model::kI:
      return "I";
    case Model::kII:
      return "II";
    case Model::kIII:
      return "III";
    case Model::kIV:
      return "IV";
    case Model::kGamma:
      return "gamma:" + short_double(spec.gamma);
  }
  throw std::logic_error("model_label: unknown model");
}

std::pair<DataMatrix, DataMatrix> generate(const ModelSpec& spec, Rng& rng) {
  validate_spec(spec, "generate");
  DataMatrix x1 = generate_group(spec, 1, rng);
  DataMatrix x2 = generate_group(spec, 2, rng);
  return {std::move(x1), std::move(x2)};
}

std::pair<DataMatrix, DataMatrix> generate(const ModelSpec& spec, RngSeed seed) {
  Rng rng(seed);
  return generate(spec, rng);
}

PsiSpec model_psi_spec(const ModelSpec& spec) {
  validate_spec(spec, "model_psi_spec");
  const Eigen::Index p = spec.p;
  PsiSpec out;
  out.n1 = spec.n1;
  out.n2 = spec.n2;
  switch (spec.model) {
    case Model::kI: {
      out.sigma1 = CovModel::scaled_identity(p, 1.0);
      out.sigma2 = out.sigma1;
      break;
    }
    case Model::kII: {
      Eigen::VectorXd weights(2);
      weights << 1.0, 0.5;
      out.sigma1 = CovModel::spiked(p, 1.0, spike_columns(p, 1), weights);
      out.sigma2 = CovModel::spiked(p, 1.0, spike_columns(p, 2), weights);
      break;
    }
    case Model::kIII: {
      const Eigen::VectorXd up =
          Eigen::VectorXd::LinSpaced(p, 1.0, static_cast<double>(p));
      const Eigen::VectorXd down = up.reverse();
      const auto group_cov = [&](std::int64_t nk, double scale,
                                 std::vector<CovModel>& per_obs) {
        Eigen::VectorXd mean_diag = Eigen::VectorXd::Zero(p);
        per_obs.reserve(static_cast<std::size_t>(nk));
        for (Eigen::Index i = 0; i < nk; ++i) {
          const Eigen::VectorXd d =
              scale * (ascending_scales(i, nk) ? up : down);
          mean_diag += d;
          per_obs.push_back(CovModel::diagonal(d));
        }
        mean_diag /= static_cast<double>(nk);
        return CovModel::diagonal(mean_diag);
      };
      out.sigma1 = group_cov(spec.n1, 1.0, out.per_obs1);
      out.sigma2 = group_cov(spec.n2, 2.0, out.per_obs2);
      break;
    }
    case Model::kIV: {
      const Eigen::VectorXd coef = ma_coefficients(p);
      Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(p, p);
      for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index k = j; k < std::min(p, j + 6); ++k) {
          double acc = 0.0;
          for (Eigen::Index t = k; t <= j + 5; ++t) acc += coef[t] * coef[t];
          sigma(j, k) = acc;
          sigma(k, j) = acc;
        }
      }
      out.sigma1 = CovModel::dense(sigma);
      out.sigma2 = out.sigma1;
      break;
    }
    case Model::kGamma: {
      out.sigma1 = CovModel::spiked(p, 1.0 - spec.gamma,
                                    Eigen::MatrixXd::Ones(p, 1),
                                    Eigen::VectorXd::Constant(1, spec.gamma));
      out.sigma2 = out.sigma1;
      break;
    }
  }
  return out;
}

double calibrate_shift(const ModelSpec& spec, double beta) {
  if (!(beta >= 0.0)) {
    throw std::invalid_argument(
        "calibrate_shift: signal strength must be nonnegative");
  }
  const double tr2 = psi_trace_sq(model_psi_spec(spec));
  return std::sqrt(beta * std::sqrt(2.0 * tr2) / static_cast<double>(spec.p));
}

std::vector<double> gamma_mixture_kappas(double gamma, std::int64_t p) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma_mixture_kappas: gamma must lie in [0, 1]");
  }
  if (p < 1) {
    throw std::invalid_argument(
        "gamma_mixture_kappas: dimension must be positive");
  }
  if (gamma == 0.0) return {};
  if (std::abs(gamma * std::sqrt(static_cast<double>(p)) - 1.0) < 1e-9) {
    return {std::sqrt(0.5)};
  }
  return {1.0};
}

double ExperimentReport::rate(std::size_t i) const {
  const auto& t = tallies.at(i);
  const double denom = static_cast<double>(reps - t.errors);
  if (denom <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(t.rejections) / denom;
}

double ExperimentReport::se(std::size_t i) const {
  const auto& t = tallies.at(i);
  const double denom = static_cast<double>(reps - t.errors);
  if (denom <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double r = rate(i);
  return std::sqrt(r * (1.0 - r) / denom);
}

TestResult run_single_test(Method method, const DataMatrix& x1,
                           const DataMatrix& x2, std::int64_t b, double alpha,
                           RngSeed seed) {
  switch (method) {
    case Method::kNew:
      return randomization_test(x1, x2, b, alpha, seed);
    case Method::kCq:
      return cq_test(x1, x2, alpha);
    case Method::kEmpiricalBootstrap:
      return empirical_bootstrap_test(x1, x2, b, alpha, seed);
    case Method::kWildBootstrap:
      return wild_bootstrap_test(x1, x2, b, alpha, seed);
    case Method::kChi2Tcq:
      return chi2_test(x1, x2, alpha, Chi2Variant::kTcq);
    case Method::kChi2Norm:
      return chi2_test(x1, x2, alpha, Chi2Variant::kNorm);
  }
  throw std::logic_error("run_single_test: unknown method");
}

namespace {

// One RNG stream per replication keyed on the replication index, one
// sub-stream per method keyed on the method itself, so results do not depend
// on thread count or on which other methods run alongside.
RngSeed method_seed(const Rng& rep, Method method) {
  return RngSeed{rep.key(), 1000 + static_cast<std::uint64_t>(method)};
}

ExperimentReport replicated_experiment(const ModelSpec& spec, double beta,
                                       const std::vector<Method>& methods,
                                       std::int64_t reps, std::int64_t b,
                                       double alpha, RngSeed seed,
                                       const char* where) {
  validate_spec(spec, where);
  validate_run(reps, b, alpha, methods, where);
  if (!shift_is_zero(spec.shift)) {
    throw std::invalid_argument(std::string(where) +
                                ": the experiment sets the shift itself; "
                                "pass a spec with no shift");
  }
  ModelSpec run_spec = spec;
  if (beta > 0.0) {
    run_spec.shift = Eigen::VectorXd::Constant(spec.p,
                                               calibrate_shift(spec, beta));
  }

  const auto start = std::chrono::steady_clock::now();
  const std::size_t n_methods = methods.size();
  std::vector<std::uint8_t> reject(static_cast<std::size_t>(reps) * n_methods,
                                   0);
  const Rng base(seed);
  parallel_for(reps, [&](std::int64_t r) {
    const Rng rep = base.child(static_cast<std::uint64_t>(r));
    Rng gen = rep.child(0);
    const auto [x1, x2] = generate(run_spec, gen);
    for (std::size_t j = 0; j < n_methods; ++j) {
      const TestResult res =
          run_single_test(methods[j], x1, x2, b, alpha,
                          method_seed(rep, methods[j]));
      reject[static_cast<std::size_t>(r) * n_methods + j] = res.reject ? 1 : 0;
    }
  });

  ExperimentReport report;
  report.model = model_label(spec);
  report.n1 = spec.n1;
  report.n2 = spec.n2;
  report.p = spec.p;
  report.beta = beta;
  report.reps = reps;
  report.b = b;
  report.alpha = alpha;
  report.seed = seed.seed;
  report.tallies.resize(n_methods);
  for (std::size_t j = 0; j < n_methods; ++j) {
    report.tallies[j].method = methods[j];
    std::int64_t count = 0;
    for (std::int64_t r = 0; r < reps; ++r) {
      count += reject[static_cast<std::size_t>(r) * n_methods + j];
    }
    report.tallies[j].rejections = count;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

}  // namespace

ExperimentReport run_size_experiment(const ModelSpec& spec,
                                     const std::vector<Method>& methods,
                                     std::int64_t reps, std::int64_t b,
                                     double alpha, RngSeed seed) {
  return replicated_experiment(spec, 0.0, methods, reps, b, alpha, seed,
                               "run_size_experiment");
}

ExperimentReport run_power_experiment(const ModelSpec& spec, double beta,
                                      const std::vector<Method>& methods,
                                      std::int64_t reps, std::int64_t b,
                                      double alpha, RngSeed seed) {
  if (!(beta >= 0.0)) {
    throw std::invalid_argument(
        "run_power_experiment: signal strength must be nonnegative");
  }
  return replicated_experiment(spec, beta, methods, reps, b, alpha, seed,
                               "run_power_experiment");
}

std::vector<std::pair<double, double>> roc_curve(
    const ModelSpec& spec, double beta, Method method, std::int64_t reps,
    std::int64_t b, RngSeed seed, const std::vector<double>& grid) {
  validate_spec(spec, "roc_curve");
  validate_run(reps, b, 0.05, {method}, "roc_curve");
  if (!(beta >= 0.0)) {
    throw std::invalid_argument(
        "roc_curve: signal strength must be nonnegative");
  }
  if (!shift_is_zero(spec.shift)) {
    throw std::invalid_argument(
        "roc_curve: the experiment sets the shift itself; pass a spec with no "
        "shift");
  }
  if (grid.empty()) {
    throw std::invalid_argument("roc_curve: empty alpha grid");
  }
  for (double a : grid) {
    if (!(a > 0.0 && a < 1.0)) {
      throw std::invalid_argument(
          "roc_curve: grid levels must lie strictly in (0, 1)");
    }
  }
  ModelSpec run_spec = spec;
  if (beta > 0.0) {
    run_spec.shift = Eigen::VectorXd::Constant(spec.p,
                                               calibrate_shift(spec, beta));
  }

  std::vector<double> p_values(static_cast<std::size_t>(reps));
  const Rng base(seed);
  parallel_for(reps, [&](std::int64_t r) {
    const Rng rep = base.child(static_cast<std::uint64_t>(r));
    Rng gen = rep.child(0);
    const auto [x1, x2] = generate(run_spec, gen);
    const TestResult res =
        run_single_test(method, x1, x2, b, 0.05, method_seed(rep, method));
    p_values[static_cast<std::size_t>(r)] = res.p_value;
  });

  std::vector<std::pair<double, double>> curve;
  curve.reserve(grid.size());
  for (double a : grid) {
    std::int64_t count = 0;
    for (double p : p_values) count += (p <= a) ? 1 : 0;
    curve.emplace_back(a,
                       static_cast<double>(count) / static_cast<double>(reps));
  }
  return curve;
}

std::vector<double> null_statistic_draws(const ModelSpec& spec,
                                         std::int64_t reps, RngSeed seed) {
  validate_spec(spec, "null_statistic_draws");
  if (reps < 1) {
    throw std::invalid_argument(
        "null_statistic_draws: replication count must be positive");
  }
  if (!shift_is_zero(spec.shift)) {
    throw std::invalid_argument(
        "null_statistic_draws: spec must have no shift");
  }
  std::vector<double> out(static_cast<std::size_t>(reps));
  const Rng base(seed);
  parallel_for(reps, [&](std::int64_t r) {
    Rng gen = base.child(static_cast<std::uint64_t>(r)).child(0);
    const auto [x1, x2] = generate(spec, gen);
    out[static_cast<std::size_t>(r)] = t_cq_statistic(x1, x2);
  });
  return out;
}

std::vector<std::pair<double, double>> qq_pairs(const ModelSpec& spec,
                                                std::int64_t reps, RngSeed seed,
                                                std::int64_t n_ref,
                                                QqReference reference) {
  validate_spec(spec, "qq_pairs");
  if (reps < 1 || n_ref < 1) {
    throw std::invalid_argument("qq_pairs: draw counts must be positive");
  }
  if (reference == QqReference::kGammaMixture && spec.model != Model::kGamma) {
    throw std::invalid_argument(
        "qq_pairs: the mixture reference applies to the gamma model only");
  }

  const PsiSpec psi = model_psi_spec(spec);
  const double sigma = sigma_oracle(psi);

  const Rng root(seed);
  const RngSeed empirical_seed{root.child(1).key(), 0};
  const RngSeed reference_seed{root.child(2).key(), 0};

  std::vector<double> stats = null_statistic_draws(spec, reps, empirical_seed);
  for (double& t : stats) t /= sigma;
  std::sort(stats.begin(), stats.end());

  std::vector<double> ref;
  if (reference == QqReference::kQuadraticForm) {
    ref = reference_qf_sample(psi_eigenvalues(psi), n_ref, reference_seed);
  } else {
    MixtureWeights w;
    w.kappas = gamma_mixture_kappas(spec.gamma, spec.p);
    ref = mixture_limit_sample(w, n_ref, reference_seed);
  }
  std::sort(ref.begin(), ref.end());

  // Midpoint plotting positions against min-attainment reference quantiles.
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(reps);
    auto rank = static_cast<std::int64_t>(
        std::ceil(q * static_cast<double>(n_ref)));
    rank = std::clamp<std::int64_t>(rank, 1, n_ref);
    pairs.emplace_back(stats[i], ref[static_cast<std::size_t>(rank - 1)]);
  }
  return pairs;
}

ExperimentReport resampled_null_sizes(const DataMatrix& x1,
                                      const DataMatrix& x2,
                                      const std::vector<Method>& methods,
                                      std::int64_t reps, std::int64_t b,
                                      double alpha, RngSeed seed) {
  if (x1.rows() < 1 || x2.rows() < 1 || x1.cols() != x2.cols() ||
      x1.cols() < 1) {
    throw std::invalid_argument(
        "resampled_null_sizes: groups need rows and a common positive "
        "dimension");
  }
  validate_run(reps, b, alpha, methods, "resampled_null_sizes");

  const DataMatrix c1 = x1.rowwise() - x1.colwise().mean();
  const DataMatrix c2 = x2.rowwise() - x2.colwise().mean();
  const auto n1 = static_cast<std::uint64_t>(c1.rows());
  const auto n2 = static_cast<std::uint64_t>(c2.rows());

  const auto start = std::chrono::steady_clock::now();
  const std::size_t n_methods = methods.size();
  std::vector<std::uint8_t> reject(static_cast<std::size_t>(reps) * n_methods,
                                   0);
  std::vector<std::uint8_t> failed(static_cast<std::size_t>(reps) * n_methods,
                                   0);
  const Rng base(seed);
  parallel_for(reps, [&](std::int64_t r) {
    const Rng rep = base.child(static_cast<std::uint64_t>(r));
    Rng gen = rep.child(0);
    DataMatrix y1(c1.rows(), c1.cols());
    for (Eigen::Index i = 0; i < y1.rows(); ++i) {
      y1.row(i) = c1.row(static_cast<Eigen::Index>(gen.next_index(n1)));
    }
    DataMatrix y2(c2.rows(), c2.cols());
    for (Eigen::Index i = 0; i < y2.rows(); ++i) {
      y2.row(i) = c2.row(static_cast<Eigen::Index>(gen.next_index(n2)));
    }
    for (std::size_t j = 0; j < n_methods; ++j) {
      const std::size_t slot = static_cast<std::size_t>(r) * n_methods + j;
      try {
        const TestResult res =
            run_single_test(methods[j], y1, y2, b, alpha,
                            method_seed(rep, methods[j]));
        reject[slot] = res.reject ? 1 : 0;
      } catch (const std::exception&) {
        // Degenerate resamples (all rows identical, zero variance) can sink
        // individual methods; count and move on.
        failed[slot] = 1;
      }
    }
  });

  ExperimentReport report;
  report.model = "resampled";
  report.n1 = x1.rows();
  report.n2 = x2.rows();
  report.p = x1.cols();
  report.beta = 0.0;
  report.reps = reps;
  report.b = b;
  report.alpha = alpha;
  report.seed = seed.seed;
  report.tallies.resize(n_methods);
  for (std::size_t j = 0; j < n_methods; ++j) {
    report.tallies[j].method = methods[j];
    std::int64_t count = 0;
    std::int64_t errs = 0;
    for (std::int64_t r = 0; r < reps; ++r) {
      const std::size_t slot = static_cast<std::size_t>(r) * n_methods + j;
      count += reject[slot];
      errs += failed[slot];
    }
    report.tallies[j].rejections = count;
    report.tallies[j].errors = errs;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

}  // namespace hdbf
