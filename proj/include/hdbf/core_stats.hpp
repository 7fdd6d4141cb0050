#pragma once

#include "hdbf/types.hpp"

namespace hdbf {

// Two-sample cross-product statistic: within-group sums of X_i'X_j over i<j
// (self products removed) minus the between-group average inner product.
//   sum_k 2 sum_{i<j} X_{k,i}'X_{k,j} / (n_k (n_k-1))
//     - 2 sum_{i,j} X_{1,i}'X_{2,j} / (n_1 n_2)
double t_cq_statistic(const DataMatrix& x1, const DataMatrix& x2);

// ||mean1 - mean2||^2 - (n / (n_1 n_2)) tr(S), S the pooled sample covariance.
double t_bs_statistic(const DataMatrix& x1, const DataMatrix& x2);

// Consecutive-pair differences (x_{2i} - x_{2i-1}) / 2 in input row order;
// m = floor(n/2), a trailing odd row is dropped. The differenced rows are
// mean-free regardless of the population mean.
DifferencedSample difference_transform(const DataMatrix& x);

// All within- and cross-group inner products of two differenced samples.
GramCache build_gram(const DifferencedSample& xt1, const DifferencedSample& xt2);

// t_cq_statistic over the differenced samples, evaluated from the cache only.
double t_cq_differenced(const GramCache& gram);

}  // namespace hdbf
