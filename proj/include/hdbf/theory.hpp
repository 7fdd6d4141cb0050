#pragma once

#include <cstdint>
#include <vector>

#include "hdbf/types.hpp"

namespace hdbf {

// Population covariance with enough structure to keep traces and eigenvalues
// analytic where possible. Spiked = ident * I + sum_j w_j v_j v_j'; the dense
// form is the fallback for anything unstructured (symmetric input required).
class CovModel {
 public:
  enum class Kind { kEmpty, kScaledIdentity, kDiagonal, kSpiked, kDense };

  CovModel() = default;

  static CovModel scaled_identity(Eigen::Index p, double scale);
  static CovModel diagonal(Eigen::VectorXd d);
  static CovModel spiked(Eigen::Index p, double ident, Eigen::MatrixXd vecs,
                         Eigen::VectorXd weights);
  static CovModel dense(Eigen::MatrixXd m);

  Kind kind() const { return kind_; }
  Eigen::Index dim() const { return p_; }

  double trace() const;
  double trace_square() const;                       // tr(S^2)
  double product_trace(const CovModel& other) const; // tr(S T)

  Eigen::MatrixXd to_dense() const;
  // Descending. Analytic for identity/diagonal/orthogonal spikes; dense
  // symmetric eigensolver otherwise (dim <= 4096).
  Eigen::VectorXd eigenvalues() const;

  // a * this + b * other, preserving structure when the kinds allow it.
  CovModel scaled_sum(double a, const CovModel& other, double b) const;

 private:
  Kind kind_ = Kind::kEmpty;
  Eigen::Index p_ = 0;
  double scale_ = 0.0;       // kScaledIdentity scale, kSpiked ident part
  Eigen::VectorXd diag_;     // kDiagonal
  Eigen::MatrixXd vecs_;     // kSpiked spike columns
  Eigen::VectorXd weights_;  // kSpiked spike weights
  Eigen::MatrixXd dense_;    // kDense
};

// Two-group covariance description: group averages plus optional
// per-observation covariances (empty list = homogeneous group).
struct PsiSpec {
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
  CovModel sigma1;
  CovModel sigma2;
  std::vector<CovModel> per_obs1;
  std::vector<CovModel> per_obs2;
};

struct PsiInfo {
  Eigen::MatrixXd psi;          // n1^-1 sigma1 + n2^-1 sigma2, dense
  Eigen::VectorXd eigenvalues;  // descending
  double trace = 0.0;
  double trace_sq = 0.0;
};

PsiInfo psi_matrix(const PsiSpec& spec);

// Structure-aware shortcuts that avoid the dense build.
Eigen::VectorXd psi_eigenvalues(const PsiSpec& spec);
double psi_trace_sq(const PsiSpec& spec);

// Exact sampling standard deviation of the cross-product statistic under
// independent zero-mean groups:
//   var = sum_k 2/(n_k-1)^2 {tr(sigbar_k^2) - n_k^-2 sum_i tr(sig_{k,i}^2)}
//         + 4/(n_1 n_2) tr(sigbar_1 sigbar_2)
double sigma_oracle(const PsiSpec& spec);

// N iid draws of sum_i lam_i (chi2_1 - 1) / sqrt(2 sum_i lam_i^2), the
// Gaussian quadratic-form reference law for the standardized statistic.
std::vector<double> reference_qf_sample(const Eigen::VectorXd& psi_eigs,
                                        std::int64_t count, RngSeed seed);

// Limit family weights: kappas nonnegative, descending, sum of squares <= 1.
struct MixtureWeights {
  std::vector<double> kappas;
};

// N iid draws of sqrt(1 - sum kappa^2) xi_0 + sum_i kappa_i (xi_i^2 - 1)/sqrt(2),
// the series truncated at the supplied list.
std::vector<double> mixture_limit_sample(const MixtureWeights& w,
                                         std::int64_t count, RngSeed seed);

// Monte-Carlo CDF of the reference law at x; a fixed seed fixes the draw set,
// making the estimate monotone in x.
double gn_cdf(const Eigen::VectorXd& psi_eigs, double x, std::int64_t n_mc,
              RngSeed seed);

// 1 - G[G^{-1}(1-alpha) - shift_norm_sq / sqrt(2 sum lam^2)], both functionals
// evaluated on one shared Monte-Carlo sample so a zero shift returns alpha
// exactly (up to 1/n_mc discretization).
double local_power_predict(const Eigen::VectorXd& psi_eigs, double alpha,
                           double shift_norm_sq, std::int64_t n_mc, RngSeed seed);

inline constexpr std::int64_t kDefaultPowerPredictDraws = 200000;

}  // namespace hdbf
