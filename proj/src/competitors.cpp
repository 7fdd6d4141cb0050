#include "hdbf/competitors.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "hdbf/core_stats.hpp"
#include "hdbf/parallel.hpp"
#include "hdbf/randomization.hpp"
#include "hdbf/rng.hpp"

namespace hdbf {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

void check_alpha(double alpha, const char* where) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument(std::string(where) +
                                ": alpha must lie strictly in (0, 1)");
  }
}

double normal_upper_tail(double t) { return 0.5 * std::erfc(t / kSqrt2); }

struct CenteredGram {
  Eigen::MatrixXd c11, c22, c12;
  std::int64_t n1 = 0, n2 = 0;
};

// Bootstrap methods only ever need inner products of centered rows, so the
// per-draw work is O(n^2) lookups into one precomputed Gram.
CenteredGram centered_gram(const DataMatrix& x1, const DataMatrix& x2) {
  const Eigen::RowVectorXd mean1 = x1.colwise().mean();
  const Eigen::RowVectorXd mean2 = x2.colwise().mean();
  const Eigen::MatrixXd c1 = x1.rowwise() - mean1;
  const Eigen::MatrixXd c2 = x2.rowwise() - mean2;
  CenteredGram g;
  g.c11 = c1 * c1.transpose();
  g.c22 = c2 * c2.transpose();
  g.c12 = c1 * c2.transpose();
  g.n1 = x1.rows();
  g.n2 = x2.rows();
  return g;
}

double bootstrap_p_value(const DataMatrix& x1, const DataMatrix& x2,
                         std::int64_t b, RngSeed seed, bool wild,
                         double* t_obs_out) {
  const double t_obs = t_cq_statistic(x1, x2);
  const CenteredGram g = centered_gram(x1, x2);
  const auto n1 = static_cast<std::size_t>(g.n1);
  const auto n2 = static_cast<std::size_t>(g.n2);
  const double dn1 = static_cast<double>(g.n1);
  const double dn2 = static_cast<double>(g.n2);

  const Rng base(seed);
  std::vector<double> draws(static_cast<std::size_t>(b));
  parallel_for(b, [&](std::int64_t i) {
    Rng r = base.child(static_cast<std::uint64_t>(i));
    double within1 = 0.0, within2 = 0.0, cross = 0.0;
    if (wild) {
      Eigen::VectorXd e1(g.n1), e2(g.n2);
      for (Eigen::Index k = 0; k < g.n1; ++k) e1[k] = r.next_sign();
      for (Eigen::Index k = 0; k < g.n2; ++k) e2[k] = r.next_sign();
      within1 = 0.5 * (e1.dot(g.c11 * e1) - g.c11.trace());
      within2 = 0.5 * (e2.dot(g.c22 * e2) - g.c22.trace());
      cross = e1.dot(g.c12 * e2);
    } else {
      std::vector<std::int64_t> a1(n1), a2(n2);
      for (auto& v : a1) v = r.next_index(g.n1);
      for (auto& v : a2) v = r.next_index(g.n2);
      // i<j runs over resample positions; repeated source rows contribute
      // their self products.
      for (std::size_t i1 = 0; i1 < n1; ++i1)
        for (std::size_t j1 = i1 + 1; j1 < n1; ++j1)
          within1 += g.c11(a1[i1], a1[j1]);
      for (std::size_t i2 = 0; i2 < n2; ++i2)
        for (std::size_t j2 = i2 + 1; j2 < n2; ++j2)
          within2 += g.c22(a2[i2], a2[j2]);
      for (std::size_t i1 = 0; i1 < n1; ++i1)
        for (std::size_t j2 = 0; j2 < n2; ++j2)
          cross += g.c12(a1[i1], a2[j2]);
    }
    draws[static_cast<std::size_t>(i)] = 2.0 * within1 / (dn1 * (dn1 - 1.0)) +
                                         2.0 * within2 / (dn2 * (dn2 - 1.0)) -
                                         2.0 * cross / (dn1 * dn2);
  });

  std::int64_t at_or_above = 0;
  for (double d : draws) at_or_above += (d >= t_obs) ? 1 : 0;
  if (t_obs_out) *t_obs_out = t_obs;
  return (1.0 + static_cast<double>(at_or_above)) /
         (static_cast<double>(b) + 1.0);
}

TestResult bootstrap_test(const DataMatrix& x1, const DataMatrix& x2,
                          std::int64_t b, double alpha, RngSeed seed,
                          bool wild) {
  const char* where = wild ? "wild_bootstrap_test" : "empirical_bootstrap_test";
  if (x1.rows() < 2 || x2.rows() < 2) {
    throw std::invalid_argument(std::string(where) +
                                ": each group needs at least 2 observations");
  }
  if (b < 1) {
    throw std::invalid_argument(std::string(where) + ": b must be at least 1");
  }
  check_alpha(alpha, where);

  double t_obs = 0.0;
  const double p = bootstrap_p_value(x1, x2, b, seed, wild, &t_obs);
  TestResult res;
  res.method = wild ? Method::kWildBootstrap : Method::kEmpiricalBootstrap;
  res.statistic = t_obs;
  res.p_value = p;
  res.reject = p <= alpha;
  res.alpha = alpha;
  res.b_resamples = b;
  res.seed = seed.seed;
  return res;
}

GramCache differenced_gram(const DataMatrix& x1, const DataMatrix& x2,
                           const char* where) {
  if (x1.rows() < 4 || x2.rows() < 4) {
    throw std::invalid_argument(std::string(where) +
                                ": each group needs at least 4 observations "
                                "(two differenced rows)");
  }
  return build_gram(difference_transform(x1), difference_transform(x2));
}

}  // namespace

TestResult cq_test(const DataMatrix& x1, const DataMatrix& x2, double alpha) {
  check_alpha(alpha, "cq_test");
  const GramCache gram = differenced_gram(x1, x2, "cq_test");
  const double sd = conditional_sd(gram);
  if (!(sd > 0.0)) {
    throw std::domain_error(
        "cq_test: zero variance estimate, standardization undefined "
        "(degenerate data)");
  }
  const double standardized = t_cq_statistic(x1, x2) / sd;
  const double z = boost::math::quantile(boost::math::normal_distribution<>(),
                                         1.0 - alpha);
  TestResult res;
  res.method = Method::kCq;
  res.statistic = standardized;
  res.p_value = normal_upper_tail(standardized);
  res.reject = standardized > z;
  res.alpha = alpha;
  res.b_resamples = 0;
  return res;
}

TestResult empirical_bootstrap_test(const DataMatrix& x1, const DataMatrix& x2,
                                    std::int64_t b, double alpha, RngSeed seed) {
  return bootstrap_test(x1, x2, b, alpha, seed, /*wild=*/false);
}

TestResult wild_bootstrap_test(const DataMatrix& x1, const DataMatrix& x2,
                               std::int64_t b, double alpha, RngSeed seed) {
  return bootstrap_test(x1, x2, b, alpha, seed, /*wild=*/true);
}

Chi2Params chi2_params_from_moments(double trace_hat, double variance_hat) {
  if (!(trace_hat > 0.0)) {
    throw std::domain_error(
        "chi2_params_from_moments: nonpositive trace target");
  }
  if (!(variance_hat > 0.0)) {
    throw std::domain_error(
        "chi2_params_from_moments: nonpositive variance target");
  }
  Chi2Params params;
  params.beta_scale = variance_hat / (2.0 * trace_hat);
  params.dof = 2.0 * trace_hat * trace_hat / variance_hat;
  return params;
}

Chi2Params chi2_params_from_psi_hat(const GramCache& gram) {
  const double sd = conditional_sd(gram);
  if (!(sd > 0.0)) {
    throw std::domain_error(
        "chi2_params_from_psi_hat: zero conditional variance (degenerate data)");
  }
  // E[X~'X~] = tr((Sig_{2i-1} + Sig_{2i}) / 4), so (2/n_k) * mean of the self
  // products estimates tr(Sigbar_k) / n_k. The cache only knows m_k; n_k is
  // taken as 2 m_k (exact for even groups, approximate when a row was odd).
  const double trace_hat =
      gram.g11.diagonal().mean() / static_cast<double>(gram.m1()) +
      gram.g22.diagonal().mean() / static_cast<double>(gram.m2());
  return chi2_params_from_moments(trace_hat, sd * sd);
}

double chi2_critical(const Chi2Params& params, double alpha, Chi2Variant variant) {
  check_alpha(alpha, "chi2_critical");
  const boost::math::chi_squared_distribution<double> dist(params.dof);
  const double q = boost::math::quantile(dist, 1.0 - alpha);
  return variant == Chi2Variant::kTcq ? params.beta_scale * (q - params.dof)
                                      : params.beta_scale * q;
}

TestResult chi2_test(const DataMatrix& x1, const DataMatrix& x2, double alpha,
                     Chi2Variant variant) {
  check_alpha(alpha, "chi2_test");
  const GramCache gram = differenced_gram(x1, x2, "chi2_test");
  const Chi2Params params = chi2_params_from_psi_hat(gram);

  double statistic = 0.0;
  double chi2_value = 0.0;  // statistic mapped onto the chi-square scale
  if (variant == Chi2Variant::kTcq) {
    statistic = t_cq_statistic(x1, x2);
    chi2_value = statistic / params.beta_scale + params.dof;
  } else {
    const Eigen::RowVectorXd mean1 = x1.colwise().mean();
    const Eigen::RowVectorXd mean2 = x2.colwise().mean();
    statistic = (mean1 - mean2).squaredNorm();
    chi2_value = statistic / params.beta_scale;
  }

  const boost::math::chi_squared_distribution<double> dist(params.dof);
  const double p = chi2_value <= 0.0
                       ? 1.0
                       : boost::math::cdf(boost::math::complement(dist, chi2_value));

  TestResult res;
  res.method = variant == Chi2Variant::kTcq ? Method::kChi2Tcq : Method::kChi2Norm;
  res.statistic = statistic;
  res.p_value = p;
  res.reject = statistic > chi2_critical(params, alpha, variant);
  res.alpha = alpha;
  res.b_resamples = 0;
  return res;
}

}  // namespace hdbf
