#pragma once

#include <cstdint>

#include "hdbf/types.hpp"

namespace hdbf {

// Welch-Satterthwaite parameters matching the first two moments of a
// quadratic form: mean target = beta_scale * dof, variance target =
// 2 * beta_scale^2 * dof.
struct Chi2Params {
  double beta_scale = 0.0;
  double dof = 0.0;
};

enum class Chi2Variant {
  kTcq,   // calibrate T_CQ itself (centered chi-square critical value)
  kNorm,  // calibrate ||mean1 - mean2||^2 (uncentered chi-square)
};

// Normal-approximation test: reject iff T_CQ / sd > z_{1-alpha}, where sd is
// the conditional-variance plug-in from the differenced Gram (consistent for
// the sampling standard deviation of T_CQ). statistic = T_CQ / sd.
TestResult cq_test(const DataMatrix& x1, const DataMatrix& x2, double alpha);

// Center each group at its mean, resample rows iid uniform with replacement
// within group, recompute the cross-product statistic per resample.
TestResult empirical_bootstrap_test(const DataMatrix& x1, const DataMatrix& x2,
                                    std::int64_t b, double alpha, RngSeed seed);

// Rademacher multipliers on centered rows instead of index resampling.
TestResult wild_bootstrap_test(const DataMatrix& x1, const DataMatrix& x2,
                               std::int64_t b, double alpha, RngSeed seed);

// Moment matching from plug-in estimates: trace target from the differenced
// self inner products, variance target from conditional_sd^2.
Chi2Params chi2_params_from_psi_hat(const GramCache& gram);

// Same map from explicit moment targets; exposed for direct checking.
Chi2Params chi2_params_from_moments(double trace_hat, double variance_hat);

// Critical values for the two variants at level alpha.
double chi2_critical(const Chi2Params& params, double alpha, Chi2Variant variant);

TestResult chi2_test(const DataMatrix& x1, const DataMatrix& x2, double alpha,
                     Chi2Variant variant);

}  // namespace hdbf
