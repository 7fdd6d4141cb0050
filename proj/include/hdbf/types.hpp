#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

namespace hdbf {

// Observations are rows, variables are columns.
using DataMatrix = Eigen::MatrixXd;

// Halved consecutive-pair differences (x_{2i} - x_{2i-1}) / 2, one per row.
// A trailing unpaired observation contributes to no row.
struct DifferencedSample {
  Eigen::MatrixXd rows;

  Eigen::Index m() const { return rows.rows(); }
  Eigen::Index p() const { return rows.cols(); }
};

// Pairwise inner products of two differenced samples. Within-group blocks are
// symmetric and keep the self products on the diagonal; the sign-randomized
// statistic only reads the off-diagonal part, but the diagonal feeds the
// trace estimator used by the chi-square approximation tests.
struct GramCache {
  Eigen::MatrixXd g11;  // m1 x m1
  Eigen::MatrixXd g22;  // m2 x m2
  Eigen::MatrixXd g12;  // m1 x m2

  Eigen::Index m1() const { return g11.rows(); }
  Eigen::Index m2() const { return g22.rows(); }
};

enum class Method {
  kNew,                 // sign-randomization test on the cross-product statistic
  kCq,                  // normal-approximation test
  kEmpiricalBootstrap,  // resample centered rows with replacement
  kWildBootstrap,       // Rademacher multipliers on centered rows
  kChi2Tcq,             // Welch-Satterthwaite chi-square calibration of T_CQ
  kChi2Norm,            // same calibration applied to ||mean1 - mean2||^2
};

const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);
bool method_uses_resampling(Method m);

// (seed, stream) fully determines every pseudo-random draw.
struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

struct TestResult {
  Method method = Method::kNew;
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
  std::int64_t b_resamples = 0;        // 0 for non-resampling methods
  std::optional<std::uint64_t> seed;   // engaged for resampling methods
};

}  // namespace hdbf
