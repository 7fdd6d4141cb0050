#include "hdbf/randomization.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hdbf/core_stats.hpp"
#include "hdbf/parallel.hpp"

namespace hdbf {

namespace {

void check_alpha(double alpha, const char* where) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument(std::string(where) +
                                ": alpha must lie strictly in (0, 1)");
  }
}

void check_b(std::int64_t b, const char* where) {
  if (b < 1) {
    throw std::invalid_argument(std::string(where) +
                                ": resample count b must be at least 1");
  }
}

std::vector<double> draw_randomized(const GramCache& gram, std::int64_t b,
                                    RngSeed seed) {
  const Rng base(seed);
  std::vector<double> draws(static_cast<std::size_t>(b));
  parallel_for(b, [&](std::int64_t i) {
    Rng r = base.child(static_cast<std::uint64_t>(i));
    const SignVector e = draw_signs(gram.m1(), gram.m2(), r);
    draws[static_cast<std::size_t>(i)] = randomized_statistic(gram, e);
  });
  return draws;
}

}  // namespace

SignVector draw_signs(Eigen::Index m1, Eigen::Index m2, Rng& rng) {
  if (m1 < 1 || m2 < 1) {
    throw std::invalid_argument("draw_signs: sign vectors must be nonempty");
  }
  SignVector e;
  e.e1.resize(m1);
  e.e2.resize(m2);
  for (Eigen::Index i = 0; i < m1; ++i) e.e1[i] = rng.next_sign();
  for (Eigen::Index i = 0; i < m2; ++i) e.e2[i] = rng.next_sign();
  return e;
}

double randomized_statistic(const GramCache& gram, const SignVector& e) {
  if (e.e1.size() != gram.m1() || e.e2.size() != gram.m2()) {
    throw std::invalid_argument(
        "randomized_statistic: sign vector length does not match the Gram cache");
  }
  const double m1 = static_cast<double>(gram.m1());
  const double m2 = static_cast<double>(gram.m2());
  // With e_i^2 = 1, e'Ge = 2 sum_{i<j} e_i e_j g_ij + tr(G); the subtraction
  // removes the self products exactly.
  const double within1 = e.e1.dot(gram.g11 * e.e1) - gram.g11.trace();
  const double within2 = e.e2.dot(gram.g22 * e.e2) - gram.g22.trace();
  const double cross = e.e1.dot(gram.g12 * e.e2);
  return within1 / (m1 * (m1 - 1.0)) + within2 / (m2 * (m2 - 1.0)) -
         2.0 * cross / (m1 * m2);
}

double conditional_sd(const GramCache& gram) {
  if (gram.m1() < 2 || gram.m2() < 2) {
    throw std::invalid_argument("conditional_sd: needs m1, m2 >= 2");
  }
  const double m1 = static_cast<double>(gram.m1());
  const double m2 = static_cast<double>(gram.m2());
  // sum_{i<j} g_ij^2 = (||G||_F^2 - ||diag||^2) / 2 for symmetric G.
  const auto off_diag_sq = [](const Eigen::MatrixXd& g) {
    return 0.5 * (g.squaredNorm() - g.diagonal().squaredNorm());
  };
  const double var =
      4.0 * off_diag_sq(gram.g11) / (m1 * m1 * (m1 - 1.0) * (m1 - 1.0)) +
      4.0 * off_diag_sq(gram.g22) / (m2 * m2 * (m2 - 1.0) * (m2 - 1.0)) +
      4.0 * gram.g12.squaredNorm() / (m1 * m1 * m2 * m2);
  return std::sqrt(var);
}

TestResult randomization_test(const DataMatrix& x1, const DataMatrix& x2,
                              std::int64_t b, double alpha, RngSeed seed) {
  if (x1.rows() < 4 || x2.rows() < 4) {
    throw std::invalid_argument(
        "randomization_test: each group needs at least 4 observations "
        "(two differenced rows)");
  }
  check_b(b, "randomization_test");
  check_alpha(alpha, "randomization_test");

  const double t_obs = t_cq_statistic(x1, x2);
  const GramCache gram = build_gram(difference_transform(x1),
                                    difference_transform(x2));
  const std::vector<double> draws = draw_randomized(gram, b, seed);

  std::int64_t at_or_above = 0;
  for (double d : draws) at_or_above += (d >= t_obs) ? 1 : 0;
  const double p = (1.0 + static_cast<double>(at_or_above)) /
                   (static_cast<double>(b) + 1.0);

  TestResult res;
  res.method = Method::kNew;
  res.statistic = t_obs;
  res.p_value = p;
  res.reject = p <= alpha;
  res.alpha = alpha;
  res.b_resamples = b;
  res.seed = seed.seed;
  return res;
}

double randomization_quantile(const GramCache& gram, std::int64_t b, double q,
                              RngSeed seed) {
  check_b(b, "randomization_quantile");
  if (!(q > 0.0 && q < 1.0)) {
    throw std::invalid_argument(
        "randomization_quantile: quantile level must lie strictly in (0, 1)");
  }
  std::vector<double> draws = draw_randomized(gram, b, seed);
  std::sort(draws.begin(), draws.end());
  // min{x : F(x) >= q} on the empirical CDF = order statistic ceil(q b).
  const auto rank = static_cast<std::int64_t>(
      std::ceil(q * static_cast<double>(b)));
  const auto index = std::clamp<std::int64_t>(rank - 1, 0, b - 1);
  return draws[static_cast<std::size_t>(index)];
}

}  // namespace hdbf
