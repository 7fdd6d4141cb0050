#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hdbf/rng.hpp"
#include "hdbf/theory.hpp"
#include "hdbf/types.hpp"

namespace hdbf {

enum class Model { kI, kII, kIII, kIV, kGamma };

struct ModelSpec {
  Model model = Model::kI;
  double gamma = 0.0;  // kGamma only, in [0, 1]
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
  std::int64_t p = 0;
  Eigen::VectorXd shift;  // mu2 - mu1; empty means zero
};

std::string model_label(const ModelSpec& spec);

// Draws one dataset: group-1 rows, group-2 rows (+ shift on group 2).
std::pair<DataMatrix, DataMatrix> generate(const ModelSpec& spec, RngSeed seed);
std::pair<DataMatrix, DataMatrix> generate(const ModelSpec& spec, Rng& rng);

// Population covariance description of the model, for the oracles.
PsiSpec model_psi_spec(const ModelSpec& spec);

// Scalar c such that shift = c * 1_p attains signal-to-noise
// beta = ||shift||^2 / sqrt(2 tr(Psi^2)).
double calibrate_shift(const ModelSpec& spec, double beta);

// Limit mixture weights for the one-spike covariance g*11' + (1-g) I as p
// grows: g = 0 -> none (standard normal), g ~ 1/sqrt(p) -> (1/sqrt(2)),
// any fixed g > 0 -> (1).
std::vector<double> gamma_mixture_kappas(double gamma, std::int64_t p);

struct MethodTally {
  Method method = Method::kNew;
  std::int64_t rejections = 0;
  std::int64_t errors = 0;
};

struct ExperimentReport {
  std::string model;
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
  std::int64_t p = 0;
  double beta = 0.0;
  std::int64_t reps = 0;
  std::int64_t b = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;  // never serialized; outputs stay seed-determined
  std::vector<MethodTally> tallies;

  double rate(std::size_t i) const;  // rejections / (reps - errors)
  double se(std::size_t i) const;    // sqrt(rate (1-rate) / (reps - errors))
};

// One method on one dataset; resampling methods consume the seed.
TestResult run_single_test(Method method, const DataMatrix& x1,
                           const DataMatrix& x2, std::int64_t b, double alpha,
                           RngSeed seed);

// R replications under the null (shift must be zero / empty).
ExperimentReport run_size_experiment(const ModelSpec& spec,
                                     const std::vector<Method>& methods,
                                     std::int64_t reps, std::int64_t b,
                                     double alpha, RngSeed seed);

// Same with shift = calibrate_shift(spec, beta) * 1_p; beta = 0 reduces to
// the size experiment.
ExperimentReport run_power_experiment(const ModelSpec& spec, double beta,
                                      const std::vector<Method>& methods,
                                      std::int64_t reps, std::int64_t b,
                                      double alpha, RngSeed seed);

// Stores one p-value per replication; power at each alpha in the grid is the
// fraction of p <= alpha. One pass serves the whole grid.
std::vector<std::pair<double, double>> roc_curve(const ModelSpec& spec,
                                                 double beta, Method method,
                                                 std::int64_t reps,
                                                 std::int64_t b, RngSeed seed,
                                                 const std::vector<double>& grid);

// R null draws of the raw cross-product statistic (no standardization).
std::vector<double> null_statistic_draws(const ModelSpec& spec,
                                         std::int64_t reps, RngSeed seed);

enum class QqReference {
  kQuadraticForm,  // Gaussian quadratic form with the model's Psi eigenvalues
  kGammaMixture,   // asymptotic mixture for the gamma model's four cases
};

// Sorted draws of T/sigma_oracle paired with equal-rank reference quantiles.
std::vector<std::pair<double, double>> qq_pairs(const ModelSpec& spec,
                                                std::int64_t reps, RngSeed seed,
                                                std::int64_t n_ref,
                                                QqReference reference);

// Null-mimicking procedure for real data: per replication, resample rows with
// replacement from the mean-centered groups and run each method. Method
// failures (degenerate resamples) are caught and counted per method.
ExperimentReport resampled_null_sizes(const DataMatrix& x1, const DataMatrix& x2,
                                      const std::vector<Method>& methods,
                                      std::int64_t reps, std::int64_t b,
                                      double alpha, RngSeed seed);

}  // namespace hdbf
