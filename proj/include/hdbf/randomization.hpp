#pragma once

#include <cstdint>

#include "hdbf/rng.hpp"
#include "hdbf/types.hpp"

namespace hdbf {

// Independent Rademacher signs, one per differenced row of each group.
struct SignVector {
  Eigen::VectorXd e1;
  Eigen::VectorXd e2;
};

SignVector draw_signs(Eigen::Index m1, Eigen::Index m2, Rng& rng);

// Sign-randomized cross-product statistic over the cached inner products:
//   sum_k 2 sum_{i<j} e_{k,i} e_{k,j} g_kk[i][j] / (m_k (m_k-1))
//     - 2 sum_{i,j} e_{1,i} e_{2,j} g12[i][j] / (m_1 m_2)
// Cost O((m1+m2)^2); no data pass.
double randomized_statistic(const GramCache& gram, const SignVector& e);

// Exact standard deviation of randomized_statistic over uniform sign vectors
// conditional on the data:
//   sqrt( sum_k 4 sum_{i<j} g_kk[i][j]^2 / (m_k^2 (m_k-1)^2)
//         + 4 sum_{i,j} g12[i][j]^2 / (m_1^2 m_2^2) )
double conditional_sd(const GramCache& gram);

// The proposed test: observed statistic on the raw data, B sign-randomized
// draws on the differenced Gram, p = (1 + #{T_i >= T_obs}) / (B + 1),
// reject iff p <= alpha. Ties count via >=. Deterministic given seed and
// independent of thread count (one stream per draw).
TestResult randomization_test(const DataMatrix& x1, const DataMatrix& x2,
                              std::int64_t b, double alpha, RngSeed seed);

// Empirical q-quantile of B randomized draws under the min-attainment
// convention F^{-1}(q) = min{x : F(x) >= q}.
double randomization_quantile(const GramCache& gram, std::int64_t b, double q,
                              RngSeed seed);

}  // namespace hdbf
