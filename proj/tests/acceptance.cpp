#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hdbf/competitors.hpp"
#include "hdbf/core_stats.hpp"
#include "hdbf/csv.hpp"
#include "hdbf/randomization.hpp"
#include "hdbf/rng.hpp"
#include "hdbf/simulation.hpp"
#include "hdbf/theory.hpp"
#include "testutil.hpp"

// Each case prints one summary line with the measured quantities so a log of
// the acceptance run reads as a checklist. Tolerances are fixed constants.

namespace {

using hdbf::DataMatrix;
using hdbf::Method;
using hdbf::Model;
using hdbf::ModelSpec;
using hdbf::Rng;
using hdbf::RngSeed;
namespace tu = hdbf::testutil;

ModelSpec make_spec(Model model, std::int64_t n1, std::int64_t n2,
                    std::int64_t p, double gamma = 0.0) {
  ModelSpec spec;
  spec.model = model;
  spec.gamma = gamma;
  spec.n1 = n1;
  spec.n2 = n2;
  spec.p = p;
  return spec;
}

hdbf::SignVector signs_from_bits(Eigen::Index m1, Eigen::Index m2,
                                 unsigned bits) {
  hdbf::SignVector e;
  e.e1.resize(m1);
  e.e2.resize(m2);
  for (Eigen::Index k = 0; k < m1; ++k) {
    e.e1[k] = (bits >> k) & 1u ? 1.0 : -1.0;
  }
  for (Eigen::Index k = 0; k < m2; ++k) {
    e.e2[k] = (bits >> (m1 + k)) & 1u ? 1.0 : -1.0;
  }
  return e;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

// Draws of the raw statistic standardized by the population oracle.
std::vector<double> standardized_null_draws(const ModelSpec& spec,
                                            std::int64_t reps, RngSeed seed) {
  const double sigma = hdbf::sigma_oracle(hdbf::model_psi_spec(spec));
  std::vector<double> draws = hdbf::null_statistic_draws(spec, reps, seed);
  for (double& t : draws) t /= sigma;
  return draws;
}

// The level experiments reuse one seed so criterion 6 can quote criterion 5's
// simulated power exactly.
constexpr std::uint64_t kTableSeed = 11;

}  // namespace

TEST_CASE("criterion 01 exhaustive sign enumeration matches the conditional moments") {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(9001);
  hdbf::DifferencedSample d1{tu::gaussian_matrix(3, 5, rng)};
  hdbf::DifferencedSample d2{tu::gaussian_matrix(3, 5, rng)};
  const hdbf::GramCache gram = hdbf::build_gram(d1, d2);

  double sum = 0.0;
  double sum_sq = 0.0;
  for (unsigned bits = 0; bits < 64u; ++bits) {
    const double t = hdbf::randomized_statistic(gram, signs_from_bits(3, 3, bits));
    sum += t;
    sum_sq += t * t;
  }
  const double mean = sum / 64.0;
  const double var = sum_sq / 64.0 - mean * mean;
  const double sd = hdbf::conditional_sd(gram);
  const double elapsed = seconds_since(start);

  const double mean_rel = std::abs(mean) / sd;
  const double var_rel = std::abs(var - sd * sd) / (sd * sd);
  const bool pass = mean_rel <= 1e-10 && var_rel <= 1e-10 && elapsed < 1.0;
  std::printf("criterion 01 %s: |mean|/sd=%.2e var_rel_err=%.2e runtime=%.3fs\n",
              pass ? "PASS" : "FAIL", mean_rel, var_rel, elapsed);
  CHECK(mean_rel <= 1e-10);
  CHECK(var_rel <= 1e-10);
  CHECK(elapsed < 1.0);
}

TEST_CASE("criterion 02 sampling variance of the statistic matches the oracle") {
  const auto start = std::chrono::steady_clock::now();
  const ModelSpec spec = make_spec(Model::kIII, 16, 24, 50);
  const std::vector<double> draws =
      hdbf::null_statistic_draws(spec, 20000, RngSeed{9002, 0});
  const double var = tu::sample_var(draws);
  const double sigma = hdbf::sigma_oracle(hdbf::model_psi_spec(spec));
  const double rel = std::abs(var / (sigma * sigma) - 1.0);
  const double elapsed = seconds_since(start);

  const bool pass = rel <= 0.05 && elapsed < 60.0;
  std::printf(
      "criterion 02 %s: empirical_var=%.5f oracle_var=%.5f rel_err=%.3f "
      "runtime=%.1fs\n",
      pass ? "PASS" : "FAIL", var, sigma * sigma, rel, elapsed);
  CHECK(rel <= 0.05);
  CHECK(elapsed < 60.0);
}

TEST_CASE("criterion 03 null level of the sign-flip test at table scale") {
  const std::vector<Method> methods{Method::kNew};
  const hdbf::ExperimentReport one = hdbf::run_size_experiment(
      make_spec(Model::kI, 32, 48, 300), methods, 2000, 300, 0.05,
      RngSeed{kTableSeed, 0});
  const hdbf::ExperimentReport three = hdbf::run_size_experiment(
      make_spec(Model::kIII, 32, 48, 300), methods, 2000, 300, 0.05,
      RngSeed{kTableSeed, 0});

  const double size_i = one.rate(0);
  const double size_iii = three.rate(0);
  const bool pass = size_i >= 0.035 && size_i <= 0.065 && size_iii >= 0.041 &&
                    size_iii <= 0.071;
  std::printf(
      "criterion 03 %s: model_I=%.4f (band 0.035..0.065) model_III=%.4f "
      "(band 0.041..0.071)\n",
      pass ? "PASS" : "FAIL", size_i, size_iii);
  CHECK(size_i >= 0.035);
  CHECK(size_i <= 0.065);
  CHECK(size_iii >= 0.041);
  CHECK(size_iii <= 0.071);
}

TEST_CASE("criterion 04 size ordering across methods") {
  const hdbf::ExperimentReport small = hdbf::run_size_experiment(
      make_spec(Model::kI, 16, 24, 300),
      {Method::kNew, Method::kEmpiricalBootstrap, Method::kWildBootstrap}, 1000,
      300, 0.05, RngSeed{9004, 0});
  const double new_small = small.rate(0);
  const double eb = small.rate(1);
  const double wb = small.rate(2);

  const hdbf::ExperimentReport spiked = hdbf::run_size_experiment(
      make_spec(Model::kII, 32, 48, 300), {Method::kNew, Method::kCq}, 1000,
      300, 0.05, RngSeed{9004, 1});
  const double new_spiked = spiked.rate(0);
  const double cq = spiked.rate(1);

  const bool pass = eb < 0.005 && wb < new_small && cq > new_spiked;
  std::printf(
      "criterion 04 %s: EB=%.4f (<0.005) WB=%.4f < NEW=%.4f; CQ=%.4f > "
      "NEW=%.4f\n",
      pass ? "PASS" : "FAIL", eb, wb, new_small, cq, new_spiked);
  CHECK(eb < 0.005);
  CHECK(wb < new_small);
  CHECK(cq > new_spiked);
}

TEST_CASE("criterion 05 power of the sign-flip test at table scale") {
  const ModelSpec spec = make_spec(Model::kI, 32, 48, 300);
  const hdbf::ExperimentReport beta1 = hdbf::run_power_experiment(
      spec, 1.0, {Method::kNew}, 2000, 300, 0.05, RngSeed{kTableSeed, 0});
  const hdbf::ExperimentReport beta2 = hdbf::run_power_experiment(
      spec, 2.0, {Method::kNew}, 2000, 300, 0.05, RngSeed{kTableSeed, 0});

  const double p1 = beta1.rate(0);
  const double p2 = beta2.rate(0);
  const bool pass =
      p1 >= 0.218 && p1 <= 0.288 && p2 >= 0.550 && p2 <= 0.620;
  std::printf(
      "criterion 05 %s: beta1=%.4f (band 0.218..0.288) beta2=%.4f "
      "(band 0.550..0.620)\n",
      pass ? "PASS" : "FAIL", p1, p2);
  CHECK(p1 >= 0.218);
  CHECK(p1 <= 0.288);
  CHECK(p2 >= 0.550);
  CHECK(p2 <= 0.620);
}

TEST_CASE("criterion 06 local power prediction tracks the simulated power") {
  const ModelSpec spec = make_spec(Model::kI, 32, 48, 300);
  const hdbf::ExperimentReport beta1 = hdbf::run_power_experiment(
      spec, 1.0, {Method::kNew}, 2000, 300, 0.05, RngSeed{kTableSeed, 0});
  const double simulated = beta1.rate(0);

  const hdbf::PsiSpec psi = hdbf::model_psi_spec(spec);
  const double shift_norm_sq = 1.0 * std::sqrt(2.0 * hdbf::psi_trace_sq(psi));
  const double predicted = hdbf::local_power_predict(
      hdbf::psi_eigenvalues(psi), 0.05, shift_norm_sq,
      hdbf::kDefaultPowerPredictDraws, RngSeed{9006, 0});
  const double normal_limit = 0.2595;

  const bool pass = std::abs(predicted - simulated) <= 0.03 &&
                    std::abs(normal_limit - simulated) <= 0.03;
  std::printf(
      "criterion 06 %s: predicted=%.4f simulated=%.4f normal_limit=%.4f "
      "(agreement 0.03)\n",
      pass ? "PASS" : "FAIL", predicted, simulated, normal_limit);
  CHECK(std::abs(predicted - simulated) <= 0.03);
  CHECK(std::abs(normal_limit - simulated) <= 0.03);
}

TEST_CASE("criterion 07 standardized statistic matches the quadratic-form law") {
  const ModelSpec spec = make_spec(Model::kI, 16, 24, 300);
  const std::vector<double> stats =
      standardized_null_draws(spec, 5000, RngSeed{9007, 0});
  const std::vector<double> ref = hdbf::reference_qf_sample(
      hdbf::psi_eigenvalues(hdbf::model_psi_spec(spec)), 5000, RngSeed{9007, 1});
  const double ks = tu::ks_two_sample(stats, ref);

  const bool pass = ks <= 0.04;
  std::printf("criterion 07 %s: ks=%.4f (threshold 0.04)\n",
              pass ? "PASS" : "FAIL", ks);
  CHECK(ks <= 0.04);
}

TEST_CASE("criterion 08 gamma-model statistics against the asymptotic mixtures") {
  const std::int64_t p = 300;
  const double gammas[] = {0.0, 1.0 / std::sqrt(300.0), 0.5, 1.0};
  double ks[4] = {0, 0, 0, 0};
  for (int i = 0; i < 4; ++i) {
    const ModelSpec spec = make_spec(Model::kGamma, 16, 24, p, gammas[i]);
    const std::vector<double> stats = standardized_null_draws(
        spec, 5000, RngSeed{9008, static_cast<std::uint64_t>(i)});
    hdbf::MixtureWeights w;
    w.kappas = hdbf::gamma_mixture_kappas(gammas[i], p);
    const std::vector<double> mix = hdbf::mixture_limit_sample(
        w, 5000, RngSeed{9008, static_cast<std::uint64_t>(100 + i)});
    ks[i] = tu::ks_two_sample(stats, mix);
  }

  const bool pass =
      ks[0] <= 0.05 && ks[1] <= 0.05 && ks[2] <= 0.05 && ks[3] <= 0.05;
  std::printf(
      "criterion 08 %s: ks(gamma=0)=%.4f ks(gamma=1/sqrt(p))=%.4f "
      "ks(gamma=0.5)=%.4f ks(gamma=1)=%.4f (threshold 0.05 each)\n",
      pass ? "PASS" : "FAIL", ks[0], ks[1], ks[2], ks[3]);
  // The two fixed-gamma cases compare a finite-sample law against its n -> inf
  // limit; at n1=16, n2=24 the distance sits near 0.14 regardless of seeds
  // (see the decision ledger), so these checks state the target honestly and
  // are expected to fail until the group sizes grow.
  CHECK(ks[0] <= 0.05);
  CHECK(ks[1] <= 0.05);
  CHECK(ks[2] <= 0.05);
  CHECK(ks[3] <= 0.05);
}

TEST_CASE("criterion 09 mixture sampler moments at kappa one") {
  hdbf::MixtureWeights w;
  w.kappas = {1.0};
  const std::vector<double> draws =
      hdbf::mixture_limit_sample(w, 1000000, RngSeed{9009, 0});
  const double mean = tu::sample_mean(draws);
  const double var = tu::sample_var(draws);
  const double skew = tu::sample_skew(draws);
  const double target_skew = 2.0 * std::sqrt(2.0);

  const bool pass = std::abs(mean) < 0.01 && std::abs(var - 1.0) <= 0.01 &&
                    std::abs(skew - target_skew) <= 0.05 * target_skew;
  std::printf(
      "criterion 09 %s: mean=%.5f var=%.5f skew=%.4f (targets 0, 1, 2.828)\n",
      pass ? "PASS" : "FAIL", mean, var, skew);
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) <= 0.01);
  CHECK(std::abs(skew - target_skew) <= 0.05 * target_skew);
}

TEST_CASE("criterion 10 sign-flip calibration of the differenced statistic is superuniform") {
  // Group sizes and dimension are free here; 16/24 at p=100 keeps the run
  // inside a second while preserving the high-dimensional regime.
  const ModelSpec spec = make_spec(Model::kI, 16, 24, 100);
  const std::int64_t reps = 2000;
  const std::int64_t b = 300;
  const Rng base(9010);

  std::int64_t hits = 0;
  for (std::int64_t r = 0; r < reps; ++r) {
    const Rng rep = base.child(static_cast<std::uint64_t>(r));
    Rng gen = rep.child(0);
    const auto [x1, x2] = hdbf::generate(spec, gen);
    const hdbf::GramCache gram = hdbf::build_gram(
        hdbf::difference_transform(x1), hdbf::difference_transform(x2));
    const double quantile =
        hdbf::randomization_quantile(gram, b, 0.95, RngSeed{rep.key(), 1});
    hits += (hdbf::t_cq_differenced(gram) > quantile) ? 1 : 0;
  }
  const double rate = static_cast<double>(hits) / static_cast<double>(reps);
  const double bound = 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / 2000.0);

  const bool pass = rate <= bound;
  std::printf("criterion 10 %s: rate=%.4f bound=%.4f\n", pass ? "PASS" : "FAIL",
              rate, bound);
  CHECK(rate <= bound);
}

namespace {

// Runs every resampling entry point once and serializes all outputs.
std::string resampling_snapshot() {
  std::ostringstream s;
  Rng rng(9011);
  const DataMatrix x1 = tu::gaussian_matrix(10, 15, rng);
  const DataMatrix x2 = tu::gaussian_matrix(12, 15, rng);
  const hdbf::GramCache gram = hdbf::build_gram(
      hdbf::difference_transform(x1), hdbf::difference_transform(x2));

  const auto result = [&s](const hdbf::TestResult& r) {
    s << hdbf::method_name(r.method) << ' ' << hdbf::format_double(r.statistic)
      << ' ' << hdbf::format_double(r.p_value) << ' ' << r.reject << '\n';
  };
  result(hdbf::randomization_test(x1, x2, 257, 0.05, RngSeed{21, 1}));
  result(hdbf::empirical_bootstrap_test(x1, x2, 257, 0.05, RngSeed{21, 2}));
  result(hdbf::wild_bootstrap_test(x1, x2, 257, 0.05, RngSeed{21, 3}));
  s << hdbf::format_double(
           hdbf::randomization_quantile(gram, 129, 0.9, RngSeed{21, 4}))
    << '\n';

  const ModelSpec het = make_spec(Model::kIII, 10, 12, 20);
  hdbf::write_report_csv(
      s, hdbf::run_size_experiment(
             het,
             {Method::kNew, Method::kWildBootstrap, Method::kEmpiricalBootstrap},
             40, 64, 0.05, RngSeed{21, 5}));
  hdbf::write_report_csv(
      s, hdbf::run_power_experiment(het, 0.8, {Method::kNew}, 30, 64, 0.05,
                                    RngSeed{21, 6}));

  hdbf::write_pairs_csv(
      s, "alpha", "power",
      hdbf::roc_curve(make_spec(Model::kI, 8, 10, 12), 0.5, Method::kNew, 30,
                      63, RngSeed{21, 7}, {0.2, 0.5, 0.8}));
  for (const double t : hdbf::null_statistic_draws(make_spec(Model::kIV, 8, 8, 10),
                                                   20, RngSeed{21, 8})) {
    s << hdbf::format_double(t) << '\n';
  }
  hdbf::write_pairs_csv(
      s, "empirical_quantile", "reference_quantile",
      hdbf::qq_pairs(make_spec(Model::kI, 8, 8, 10), 30, RngSeed{21, 9}, 500,
                     hdbf::QqReference::kQuadraticForm));
  hdbf::write_pairs_csv(
      s, "empirical_quantile", "reference_quantile",
      hdbf::qq_pairs(make_spec(Model::kGamma, 8, 8, 10, 0.5), 30,
                     RngSeed{21, 15}, 500, hdbf::QqReference::kGammaMixture));
  hdbf::write_report_csv(
      s, hdbf::resampled_null_sizes(x1, x2, {Method::kNew, Method::kCq}, 25, 64,
                                    0.05, RngSeed{21, 10}));

  Eigen::VectorXd eigs(3);
  eigs << 2.0, 1.0, 1.0;
  for (const double t :
       hdbf::reference_qf_sample(eigs, 400, RngSeed{21, 11})) {
    s << hdbf::format_double(t) << '\n';
  }
  hdbf::MixtureWeights w;
  w.kappas = {0.5};
  for (const double t : hdbf::mixture_limit_sample(w, 400, RngSeed{21, 12})) {
    s << hdbf::format_double(t) << '\n';
  }
  s << hdbf::format_double(hdbf::gn_cdf(eigs, 0.3, 2000, RngSeed{21, 13}))
    << '\n';
  s << hdbf::format_double(
           hdbf::local_power_predict(eigs, 0.05, 2.0, 2000, RngSeed{21, 14}))
    << '\n';
  return s.str();
}

}  // namespace

TEST_CASE("criterion 11 resampling outputs are byte-identical across runs and thread counts") {
  setenv("HDBF_THREADS", "1", 1);
  const std::string serial_a = resampling_snapshot();
  const std::string serial_b = resampling_snapshot();
  setenv("HDBF_THREADS", "4", 1);
  const std::string threaded = resampling_snapshot();
  unsetenv("HDBF_THREADS");

  const bool rerun_equal = serial_a == serial_b;
  const bool thread_equal = serial_a == threaded;
  const bool pass = rerun_equal && thread_equal;
  std::printf(
      "criterion 11 %s: snapshot=%zu bytes rerun_identical=%d "
      "threads_identical=%d\n",
      pass ? "PASS" : "FAIL", serial_a.size(), rerun_equal ? 1 : 0,
      thread_equal ? 1 : 0);
  CHECK(rerun_equal);
  CHECK(thread_equal);
}
