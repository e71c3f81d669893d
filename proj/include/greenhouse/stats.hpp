// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "greenhouse/types.hpp"

namespace greenhouse {

/// Multivariate normal with a precomputed lower Cholesky factor of the
/// covariance. Built through fit_mvn or mvn_from_moments; treat as immutable.
struct MultivariateNormal {
  Index dimension = 0;
  Vector mean;
  Matrix covariance;
  Matrix cholesky_factor;  // lower triangular L with L * L^T = covariance
};

/// Normal distribution truncated below at zero. The fit is a pseudo-fit:
/// location/scale are the sample mean and standard deviation of the data,
/// truncation enters only at quantile evaluation.
struct TruncatedNormal {
  double location = 0.0;
  double scale = 1.0;
};

/// Sample mean and covariance (n-1 denominator) of the rows of `samples`,
/// regularized with ridge eps*I, eps = 1e-6 * trace/dim (1e-6 if the trace
/// vanishes). Requires at least dim+1 rows.
MultivariateNormal fit_mvn(const MatrixRef& samples);

/// Validates symmetry and positive definiteness of the given moments.
MultivariateNormal mvn_from_moments(Vector mean, Matrix covariance);

/// sqrt((x-mu)^T Sigma^-1 (x-mu)) via the stored Cholesky factor.
double mahalanobis(const MultivariateNormal& mvn, const VectorRef& x);

double std_normal_cdf(double z);

/// Inverse standard normal CDF, Wichura's AS241 rational approximation
/// (absolute error below 1e-9 across (0,1)). p must lie strictly inside (0,1).
double std_normal_quantile(double p);

/// Sample mean / standard deviation of nonnegative distances; a scale below
/// 1e-12 is clamped to 1e-12 with a warning.
TruncatedNormal fit_truncated_normal(const VectorRef& distances,
                                     std::vector<std::string>* warnings = nullptr);

/// Quantile of the zero-truncated normal:
///   location + scale * Phi^-1(Phi(alpha) + p * (1 - Phi(alpha))),
/// alpha = -location/scale. Nonnegative and strictly increasing in p.
double truncated_quantile(const TruncatedNormal& t, double p);

}  // namespace greenhouse
