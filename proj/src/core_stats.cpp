#include "hdbf/core_stats.hpp"

#include <stdexcept>
#include <string>

namespace hdbf {

namespace {

void check_data(const DataMatrix& x, const char* where, const char* which) {
  if (x.rows() < 1 || x.cols() < 1) {
    throw std::invalid_argument(std::string(where) + ": " + which +
                                " must have at least one row and one column");
  }
  if (!x.allFinite()) {
    throw std::invalid_argument(std::string(where) + ": " + which +
                                " contains a non-finite value");
  }
}

void check_pair(const DataMatrix& x1, const DataMatrix& x2, const char* where) {
  check_data(x1, where, "x1");
  check_data(x2, where, "x2");
  if (x1.cols() != x2.cols()) {
    throw std::invalid_argument(std::string(where) + ": dimension mismatch (" +
                                std::to_string(x1.cols()) + " vs " +
                                std::to_string(x2.cols()) + " columns)");
  }
}

// sum over i<j of a square matrix; the diagonal carries self products.
double upper_sum(const Eigen::MatrixXd& g) {
  return 0.5 * (g.sum() - g.trace());
}

double cross_product_combine(const Eigen::MatrixXd& g11,
                             const Eigen::MatrixXd& g22,
                             const Eigen::MatrixXd& g12) {
  const double n1 = static_cast<double>(g11.rows());
  const double n2 = static_cast<double>(g22.rows());
  return 2.0 * upper_sum(g11) / (n1 * (n1 - 1.0)) +
         2.0 * upper_sum(g22) / (n2 * (n2 - 1.0)) -
         2.0 * g12.sum() / (n1 * n2);
}

}  // namespace

double t_cq_statistic(const DataMatrix& x1, const DataMatrix& x2) {
  check_pair(x1, x2, "t_cq_statistic");
  if (x1.rows() < 2 || x2.rows() < 2) {
    throw std::invalid_argument(
        "t_cq_statistic: each group needs at least two observations");
  }
  const Eigen::MatrixXd g11 = x1 * x1.transpose();
  const Eigen::MatrixXd g22 = x2 * x2.transpose();
  const Eigen::MatrixXd g12 = x1 * x2.transpose();
  return cross_product_combine(g11, g22, g12);
}

double t_bs_statistic(const DataMatrix& x1, const DataMatrix& x2) {
  check_pair(x1, x2, "t_bs_statistic");
  const auto n1 = x1.rows();
  const auto n2 = x2.rows();
  const auto n = n1 + n2;
  if (n < 3) {
    throw std::invalid_argument(
        "t_bs_statistic: needs n1 + n2 >= 3 for the pooled covariance");
  }
  const Eigen::RowVectorXd mean1 = x1.colwise().mean();
  const Eigen::RowVectorXd mean2 = x2.colwise().mean();
  // tr((n_k - 1) S_k) is the within-group scatter, so tr(S) needs no matrix.
  const double scatter = (x1.rowwise() - mean1).squaredNorm() +
                         (x2.rowwise() - mean2).squaredNorm();
  const double tr_pooled = scatter / static_cast<double>(n - 2);
  return (mean1 - mean2).squaredNorm() -
         static_cast<double>(n) /
             (static_cast<double>(n1) * static_cast<double>(n2)) * tr_pooled;
}

DifferencedSample difference_transform(const DataMatrix& x) {
  check_data(x, "difference_transform", "x");
  if (x.rows() < 2) {
    throw std::invalid_argument(
        "difference_transform: needs at least two observations to pair");
  }
  const Eigen::Index m = x.rows() / 2;
  DifferencedSample out;
  out.rows.resize(m, x.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    out.rows.row(i) = 0.5 * (x.row(2 * i + 1) - x.row(2 * i));
  }
  return out;
}

GramCache build_gram(const DifferencedSample& xt1, const DifferencedSample& xt2) {
  if (xt1.p() != xt2.p()) {
    throw std::invalid_argument("build_gram: dimension mismatch between groups");
  }
  if (xt1.m() < 2 || xt2.m() < 2) {
    throw std::invalid_argument(
        "build_gram: each differenced sample needs m >= 2 (the randomized "
        "statistic divides by m(m-1))");
  }
  GramCache g;
  g.g11 = xt1.rows * xt1.rows.transpose();
  g.g22 = xt2.rows * xt2.rows.transpose();
  g.g12 = xt1.rows * xt2.rows.transpose();
  return g;
}

double t_cq_differenced(const GramCache& gram) {
  if (gram.m1() < 2 || gram.m2() < 2) {
    throw std::invalid_argument("t_cq_differenced: invalid Gram cache");
  }
  return cross_product_combine(gram.g11, gram.g22, gram.g12);
}

}  // namespace hdbf
