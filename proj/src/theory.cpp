#include "hdbf/theory.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hdbf/parallel.hpp"
#include "hdbf/rng.hpp"

namespace hdbf {

namespace {

// Dense fallbacks (matrix build + symmetric eigensolve) are meant for desk
// scale; structured forms stay analytic at any dimension.
constexpr Eigen::Index kMaxDense = 4096;

void check_dense_dim(Eigen::Index p, const char* where) {
  if (p > kMaxDense) {
    throw std::invalid_argument(std::string(where) +
                                ": dense covariance operations are limited to "
                                "dimension 4096; use a structured form");
  }
}

constexpr double kInvSqrt2 = 0.70710678118654752440;

}  // namespace

CovModel CovModel::scaled_identity(Eigen::Index p, double scale) {
  if (p < 1) throw std::invalid_argument("CovModel: dimension must be positive");
  if (scale < 0.0) {
    throw std::invalid_argument("CovModel: identity scale must be nonnegative");
  }
  CovModel m;
  m.kind_ = Kind::kScaledIdentity;
  m.p_ = p;
  m.scale_ = scale;
  return m;
}

CovModel CovModel::diagonal(Eigen::VectorXd d) {
  if (d.size() < 1) throw std::invalid_argument("CovModel: empty diagonal");
  if ((d.array() < 0.0).any()) {
    throw std::invalid_argument("CovModel: diagonal entries must be nonnegative");
  }
  CovModel m;
  m.kind_ = Kind::kDiagonal;
  m.p_ = d.size();
  m.diag_ = std::move(d);
  return m;
}

CovModel CovModel::spiked(Eigen::Index p, double ident, Eigen::MatrixXd vecs,
                          Eigen::VectorXd weights) {
  if (p < 1) throw std::invalid_argument("CovModel: dimension must be positive");
  if (ident < 0.0) {
    throw std::invalid_argument("CovModel: identity part must be nonnegative");
  }
  if (vecs.rows() != p || vecs.cols() != weights.size()) {
    throw std::invalid_argument("CovModel: spike shape mismatch");
  }
  if ((weights.array() < 0.0).any()) {
    throw std::invalid_argument("CovModel: spike weights must be nonnegative");
  }
  CovModel m;
  m.kind_ = Kind::kSpiked;
  m.p_ = p;
  m.scale_ = ident;
  m.vecs_ = std::move(vecs);
  m.weights_ = std::move(weights);
  return m;
}

CovModel CovModel::dense(Eigen::MatrixXd mat) {
  if (mat.rows() < 1 || mat.rows() != mat.cols()) {
    throw std::invalid_argument("CovModel: dense covariance must be square");
  }
  const double scale = std::max(1.0, mat.cwiseAbs().maxCoeff());
  if (!mat.isApprox(mat.transpose(), 1e-12) &&
      (mat - mat.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw std::invalid_argument("CovModel: dense covariance must be symmetric");
  }
  CovModel m;
  m.kind_ = Kind::kDense;
  m.p_ = mat.rows();
  m.dense_ = std::move(mat);
  return m;
}

double CovModel::trace() const {
  switch (kind_) {
    case Kind::kScaledIdentity:
      return scale_ * static_cast<double>(p_);
    case Kind::kDiagonal:
      return diag_.sum();
    case Kind::kSpiked: {
      double t = scale_ * static_cast<double>(p_);
      for (Eigen::Index j = 0; j < weights_.size(); ++j) {
        t += weights_[j] * vecs_.col(j).squaredNorm();
      }
      return t;
    }
    case Kind::kDense:
      return dense_.trace();
    case Kind::kEmpty:
      break;
  }
  throw std::logic_error("CovModel: empty model");
}

double CovModel::trace_square() const {
  switch (kind_) {
    case Kind::kScaledIdentity:
      return scale_ * scale_ * static_cast<double>(p_);
    case Kind::kDiagonal:
      return diag_.squaredNorm();
    case Kind::kSpiked: {
      // tr((aI + sum w v v')^2) = p a^2 + 2a sum_j w_j |v_j|^2
      //                           + sum_ij w_i w_j (v_i'v_j)^2
      const Eigen::MatrixXd gram = vecs_.transpose() * vecs_;
      double t = scale_ * scale_ * static_cast<double>(p_);
      for (Eigen::Index j = 0; j < weights_.size(); ++j) {
        t += 2.0 * scale_ * weights_[j] * gram(j, j);
      }
      for (Eigen::Index i = 0; i < weights_.size(); ++i) {
        for (Eigen::Index j = 0; j < weights_.size(); ++j) {
          t += weights_[i] * weights_[j] * gram(i, j) * gram(i, j);
        }
      }
      return t;
    }
    case Kind::kDense:
      return dense_.squaredNorm();  // symmetric, so tr(D^2) = ||D||_F^2
    case Kind::kEmpty:
      break;
  }
  throw std::logic_error("CovModel: empty model");
}

double CovModel::product_trace(const CovModel& other) const {
  if (p_ != other.p_) {
    throw std::invalid_argument("CovModel: dimension mismatch in product trace");
  }
  if (kind_ == Kind::kEmpty || other.kind_ == Kind::kEmpty) {
    throw std::logic_error("CovModel: empty model");
  }
  if (kind_ == Kind::kScaledIdentity) return scale_ * other.trace();
  if (other.kind_ == Kind::kScaledIdentity) return other.scale_ * trace();

  if (kind_ == Kind::kDiagonal && other.kind_ == Kind::kDiagonal) {
    return diag_.dot(other.diag_);
  }
  if (kind_ == Kind::kDiagonal && other.kind_ == Kind::kSpiked) {
    double t = other.scale_ * diag_.sum();
    for (Eigen::Index j = 0; j < other.weights_.size(); ++j) {
      t += other.weights_[j] *
           other.vecs_.col(j).cwiseAbs2().dot(diag_);
    }
    return t;
  }
  if (kind_ == Kind::kSpiked && other.kind_ == Kind::kDiagonal) {
    return other.product_trace(*this);
  }
  if (kind_ == Kind::kSpiked && other.kind_ == Kind::kSpiked) {
    double t = scale_ * other.scale_ * static_cast<double>(p_);
    for (Eigen::Index j = 0; j < other.weights_.size(); ++j) {
      t += scale_ * other.weights_[j] * other.vecs_.col(j).squaredNorm();
    }
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
      t += other.scale_ * weights_[i] * vecs_.col(i).squaredNorm();
      for (Eigen::Index j = 0; j < other.weights_.size(); ++j) {
        const double dot = vecs_.col(i).dot(other.vecs_.col(j));
        t += weights_[i] * other.weights_[j] * dot * dot;
      }
    }
    return t;
  }
  // At least one dense operand: contract elementwise against the other's
  // dense form (both symmetric).
  const Eigen::MatrixXd a = kind_ == Kind::kDense ? dense_ : to_dense();
  if (other.kind_ == Kind::kDiagonal) {
    return a.diagonal().dot(other.diag_);
  }
  const Eigen::MatrixXd b = other.kind_ == Kind::kDense ? other.dense_
                                                        : other.to_dense();
  return a.cwiseProduct(b).sum();
}

Eigen::MatrixXd CovModel::to_dense() const {
  check_dense_dim(p_, "CovModel::to_dense");
  switch (kind_) {
    case Kind::kScaledIdentity:
      return scale_ * Eigen::MatrixXd::Identity(p_, p_);
    case Kind::kDiagonal:
      return diag_.asDiagonal();
    case Kind::kSpiked: {
      Eigen::MatrixXd m = scale_ * Eigen::MatrixXd::Identity(p_, p_);
      for (Eigen::Index j = 0; j < weights_.size(); ++j) {
        m.noalias() += weights_[j] * vecs_.col(j) * vecs_.col(j).transpose();
      }
      return m;
    }
    case Kind::kDense:
      return dense_;
    case Kind::kEmpty:
      break;
  }
  throw std::logic_error("CovModel: empty model");
}

Eigen::VectorXd CovModel::eigenvalues() const {
  switch (kind_) {
    case Kind::kScaledIdentity:
      return Eigen::VectorXd::Constant(p_, scale_);
    case Kind::kDiagonal: {
      Eigen::VectorXd e = diag_;
      std::sort(e.data(), e.data() + e.size(), std::greater<double>());
      return e;
    }
    case Kind::kSpiked: {
      // Mutually orthogonal spikes shift one eigenvalue each by w |v|^2.
      const Eigen::MatrixXd gram = vecs_.transpose() * vecs_;
      bool orthogonal = true;
      for (Eigen::Index i = 0; i < gram.rows() && orthogonal; ++i) {
        for (Eigen::Index j = i + 1; j < gram.cols(); ++j) {
          const double scale = std::sqrt(gram(i, i) * gram(j, j));
          if (std::abs(gram(i, j)) > 1e-9 * std::max(1.0, scale)) {
            orthogonal = false;
            break;
          }
        }
      }
      if (!orthogonal) {
        check_dense_dim(p_, "CovModel::eigenvalues");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_dense());
        return solver.eigenvalues().reverse();
      }
      std::vector<double> eigs;
      eigs.reserve(static_cast<std::size_t>(p_));
      for (Eigen::Index j = 0; j < weights_.size(); ++j) {
        eigs.push_back(scale_ + weights_[j] * gram(j, j));
      }
      for (Eigen::Index j = weights_.size(); j < p_; ++j) eigs.push_back(scale_);
      std::sort(eigs.begin(), eigs.end(), std::greater<double>());
      return Eigen::Map<Eigen::VectorXd>(eigs.data(),
                                         static_cast<Eigen::Index>(eigs.size()));
    }
    case Kind::kDense: {
      check_dense_dim(p_, "CovModel::eigenvalues");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense_);
      return solver.eigenvalues().reverse();
    }
    case Kind::kEmpty:
      break;
  }
  throw std::logic_error("CovModel: empty model");
}

CovModel CovModel::scaled_sum(double a, const CovModel& other, double b) const {
  if (p_ != other.p_) {
    throw std::invalid_argument("CovModel: dimension mismatch in scaled sum");
  }
  const auto is_diag_like = [](Kind k) {
    return k == Kind::kScaledIdentity || k == Kind::kDiagonal;
  };
  const auto is_spike_like = [](Kind k) {
    return k == Kind::kScaledIdentity || k == Kind::kSpiked;
  };

  if (kind_ == Kind::kScaledIdentity && other.kind_ == Kind::kScaledIdentity) {
    return scaled_identity(p_, a * scale_ + b * other.scale_);
  }
  if (is_diag_like(kind_) && is_diag_like(other.kind_)) {
    const auto as_diag = [this](const CovModel& m) -> Eigen::VectorXd {
      return m.kind_ == Kind::kDiagonal
                 ? m.diag_
                 : Eigen::VectorXd::Constant(p_, m.scale_).eval();
    };
    return diagonal(a * as_diag(*this) + b * as_diag(other));
  }
  if (is_spike_like(kind_) && is_spike_like(other.kind_)) {
    const Eigen::Index r1 = kind_ == Kind::kSpiked ? weights_.size() : 0;
    const Eigen::Index r2 = other.kind_ == Kind::kSpiked ? other.weights_.size() : 0;
    Eigen::MatrixXd vecs(p_, r1 + r2);
    Eigen::VectorXd weights(r1 + r2);
    if (r1 > 0) {
      vecs.leftCols(r1) = vecs_;
      weights.head(r1) = a * weights_;
    }
    if (r2 > 0) {
      vecs.rightCols(r2) = other.vecs_;
      weights.tail(r2) = b * other.weights_;
    }
    return spiked(p_, a * scale_ + b * other.scale_, std::move(vecs),
                  std::move(weights));
  }
  return dense(a * to_dense() + b * other.to_dense());
}

namespace {

void validate_psi_spec(const PsiSpec& spec, const char* where,
                       std::int64_t min_group) {
  if (spec.n1 < min_group || spec.n2 < min_group) {
    throw std::invalid_argument(std::string(where) + ": group sizes must be >= " +
                                std::to_string(min_group));
  }
  if (spec.sigma1.kind() == CovModel::Kind::kEmpty ||
      spec.sigma2.kind() == CovModel::Kind::kEmpty) {
    throw std::invalid_argument(std::string(where) + ": covariances not set");
  }
  if (spec.sigma1.dim() != spec.sigma2.dim()) {
    throw std::invalid_argument(std::string(where) +
                                ": group covariance dimensions differ");
  }
  const auto check_per_obs = [&](const std::vector<CovModel>& per_obs,
                                 const CovModel& sigma, std::int64_t nk,
                                 const char* group) {
    if (per_obs.empty()) return;
    if (static_cast<std::int64_t>(per_obs.size()) != nk) {
      throw std::invalid_argument(std::string(where) + ": per-observation list for " +
                                  group + " must have n_k entries");
    }
    double trace_sum = 0.0;
    for (const CovModel& c : per_obs) {
      if (c.dim() != sigma.dim()) {
        throw std::invalid_argument(std::string(where) +
                                    ": per-observation covariance dimension mismatch");
      }
      trace_sum += c.trace();
    }
    const double mean_trace = trace_sum / static_cast<double>(nk);
    const double target = sigma.trace();
    if (std::abs(mean_trace - target) > 1e-8 * (1.0 + std::abs(target))) {
      throw std::invalid_argument(std::string(where) + ": per-observation covariances for " +
                                  group + " do not average to the group covariance");
    }
  };
  check_per_obs(spec.per_obs1, spec.sigma1, spec.n1, "group 1");
  check_per_obs(spec.per_obs2, spec.sigma2, spec.n2, "group 2");
}

CovModel combined_psi(const PsiSpec& spec) {
  return spec.sigma1.scaled_sum(1.0 / static_cast<double>(spec.n1), spec.sigma2,
                                1.0 / static_cast<double>(spec.n2));
}

}  // namespace

PsiInfo psi_matrix(const PsiSpec& spec) {
  validate_psi_spec(spec, "psi_matrix", 1);
  const CovModel psi = combined_psi(spec);
  PsiInfo info;
  info.psi = psi.to_dense();
  info.eigenvalues = psi.eigenvalues();
  info.trace = psi.trace();
  info.trace_sq = psi.trace_square();
  return info;
}

Eigen::VectorXd psi_eigenvalues(const PsiSpec& spec) {
  validate_psi_spec(spec, "psi_eigenvalues", 1);
  return combined_psi(spec).eigenvalues();
}

double psi_trace_sq(const PsiSpec& spec) {
  validate_psi_spec(spec, "psi_trace_sq", 1);
  return combined_psi(spec).trace_square();
}

double sigma_oracle(const PsiSpec& spec) {
  validate_psi_spec(spec, "sigma_oracle", 2);
  const auto group_term = [](const CovModel& sigma,
                             const std::vector<CovModel>& per_obs,
                             std::int64_t nk) {
    const double n = static_cast<double>(nk);
    const double tr2 = sigma.trace_square();
    double per_obs_sum = n * tr2;
    if (!per_obs.empty()) {
      per_obs_sum = 0.0;
      for (const CovModel& c : per_obs) per_obs_sum += c.trace_square();
    }
    return 2.0 / ((n - 1.0) * (n - 1.0)) * (tr2 - per_obs_sum / (n * n));
  };
  const double var = group_term(spec.sigma1, spec.per_obs1, spec.n1) +
                     group_term(spec.sigma2, spec.per_obs2, spec.n2) +
                     4.0 / (static_cast<double>(spec.n1) *
                            static_cast<double>(spec.n2)) *
                         spec.sigma1.product_trace(spec.sigma2);
  if (var < 0.0) {
    throw std::domain_error(
        "sigma_oracle: negative variance, covariance spec is inconsistent");
  }
  return std::sqrt(var);
}

namespace {

struct EigGroup {
  double value = 0.0;
  std::int64_t count = 0;
};

// Runs of exactly equal nonzero eigenvalues, descending.
std::vector<EigGroup> group_eigenvalues(const Eigen::VectorXd& psi_eigs,
                                        double* trace_sq_out,
                                        const char* where) {
  if (psi_eigs.size() < 1) {
    throw std::invalid_argument(std::string(where) + ": empty eigenvalue list");
  }
  const double max_abs = psi_eigs.cwiseAbs().maxCoeff();
  std::vector<double> eigs(psi_eigs.data(), psi_eigs.data() + psi_eigs.size());
  std::sort(eigs.begin(), eigs.end(), std::greater<double>());
  double trace_sq = 0.0;
  std::vector<EigGroup> groups;
  for (double lam : eigs) {
    if (lam < 0.0) {
      // Dense eigensolves shed tiny negative noise; anything material is a
      // caller error.
      if (lam < -1e-9 * std::max(1.0, max_abs)) {
        throw std::invalid_argument(std::string(where) +
                                    ": eigenvalues must be nonnegative");
      }
      lam = 0.0;
    }
    trace_sq += lam * lam;
    if (lam == 0.0) continue;
    if (!groups.empty() && groups.back().value == lam) {
      ++groups.back().count;
    } else {
      groups.push_back({lam, 1});
    }
  }
  if (trace_sq <= 0.0) {
    throw std::invalid_argument(std::string(where) +
                                ": all eigenvalues are zero");
  }
  if (trace_sq_out) *trace_sq_out = trace_sq;
  return groups;
}

}  // namespace

std::vector<double> reference_qf_sample(const Eigen::VectorXd& psi_eigs,
                                        std::int64_t count, RngSeed seed) {
  if (count < 1) {
    throw std::invalid_argument("reference_qf_sample: count must be positive");
  }
  double trace_sq = 0.0;
  const std::vector<EigGroup> groups =
      group_eigenvalues(psi_eigs, &trace_sq, "reference_qf_sample");
  const double norm = 1.0 / std::sqrt(2.0 * trace_sq);

  const Rng base(seed);
  std::vector<double> out(static_cast<std::size_t>(count));
  parallel_for(count, [&](std::int64_t i) {
    Rng r = base.child(static_cast<std::uint64_t>(i));
    double acc = 0.0;
    for (const EigGroup& g : groups) {
      if (g.count == 1) {
        const double z = r.next_normal();
        acc += g.value * (z * z - 1.0);
      } else {
        // A run of m equal eigenvalues contributes lam (chi2_m - m); one
        // gamma(m/2, 2) draw replaces m squared normals.
        std::gamma_distribution<double> chi2(static_cast<double>(g.count) / 2.0,
                                             2.0);
        acc += g.value * (chi2(r) - static_cast<double>(g.count));
      }
    }
    out[static_cast<std::size_t>(i)] = acc * norm;
  });
  return out;
}

std::vector<double> mixture_limit_sample(const MixtureWeights& w,
                                         std::int64_t count, RngSeed seed) {
  if (count < 1) {
    throw std::invalid_argument("mixture_limit_sample: count must be positive");
  }
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < w.kappas.size(); ++i) {
    const double k = w.kappas[i];
    if (!(k >= 0.0)) {
      throw std::invalid_argument(
          "mixture_limit_sample: weights must be nonnegative");
    }
    if (i > 0 && k > w.kappas[i - 1] + 1e-12) {
      throw std::invalid_argument(
          "mixture_limit_sample: weights must be descending");
    }
    sum_sq += k * k;
  }
  if (sum_sq > 1.0 + 1e-12) {
    throw std::invalid_argument(
        "mixture_limit_sample: squared weights must sum to at most 1");
  }
  const double base_sd = std::sqrt(std::max(0.0, 1.0 - sum_sq));

  const Rng base(seed);
  std::vector<double> out(static_cast<std::size_t>(count));
  parallel_for(count, [&](std::int64_t i) {
    Rng r = base.child(static_cast<std::uint64_t>(i));
    double acc = base_sd * r.next_normal();
    for (double k : w.kappas) {
      const double z = r.next_normal();
      acc += k * (z * z - 1.0) * kInvSqrt2;
    }
    out[static_cast<std::size_t>(i)] = acc;
  });
  return out;
}

double gn_cdf(const Eigen::VectorXd& psi_eigs, double x, std::int64_t n_mc,
              RngSeed seed) {
  if (n_mc < 1) {
    throw std::invalid_argument("gn_cdf: n_mc must be positive");
  }
  const std::vector<double> sample = reference_qf_sample(psi_eigs, n_mc, seed);
  std::int64_t below = 0;
  for (double s : sample) below += (s <= x) ? 1 : 0;
  return static_cast<double>(below) / static_cast<double>(n_mc);
}

double local_power_predict(const Eigen::VectorXd& psi_eigs, double alpha,
                           double shift_norm_sq, std::int64_t n_mc,
                           RngSeed seed) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument(
        "local_power_predict: alpha must lie strictly in (0, 1)");
  }
  if (!(shift_norm_sq >= 0.0)) {
    throw std::invalid_argument(
        "local_power_predict: squared shift norm must be nonnegative");
  }
  if (n_mc < 1) {
    throw std::invalid_argument("local_power_predict: n_mc must be positive");
  }
  double trace_sq = 0.0;
  group_eigenvalues(psi_eigs, &trace_sq, "local_power_predict");

  std::vector<double> sample = reference_qf_sample(psi_eigs, n_mc, seed);
  std::sort(sample.begin(), sample.end());
  const auto rank = static_cast<std::int64_t>(
      std::ceil((1.0 - alpha) * static_cast<double>(n_mc)));
  const auto index = std::clamp<std::int64_t>(rank - 1, 0, n_mc - 1);
  const double quantile = sample[static_cast<std::size_t>(index)];
  const double threshold = quantile - shift_norm_sq / std::sqrt(2.0 * trace_sq);

  // Shared sample: count of draws strictly above the shifted threshold.
  const auto above = sample.end() - std::upper_bound(sample.begin(),
                                                     sample.end(), threshold);
  return static_cast<double>(above) / static_cast<double>(n_mc);
}

}  // namespace hdbf
