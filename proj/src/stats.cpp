// SPDX-License-Identifier: Apache-2.0
#include "greenhouse/stats.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "greenhouse/error.hpp"

namespace greenhouse {

namespace {

Matrix cholesky_lower(const Matrix& covariance) {
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::CholeskyFailure, "covariance is not positive definite");
  return llt.matrixL();
}

}  // namespace

MultivariateNormal fit_mvn(const MatrixRef& samples) {
  const Index n = samples.rows();
  const Index dim = samples.cols();
  if (dim < 1) throw Error(ErrorCode::BadParams, "samples must have at least one column");
  if (n < dim + 1)
    throw Error(ErrorCode::TooFewSamples, "need at least dim+1 = " + std::to_string(dim + 1) +
                                              " samples, got " + std::to_string(n));

  Vector mean = samples.colwise().mean();
  Matrix centered = samples.rowwise() - mean.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  const double trace = cov.trace();
  const double ridge = trace > 0.0 ? 1e-6 * trace / static_cast<double>(dim) : 1e-6;
  cov.diagonal().array() += ridge;

  MultivariateNormal mvn;
  mvn.dimension = dim;
  mvn.mean = std::move(mean);
  mvn.cholesky_factor = cholesky_lower(cov);
  mvn.covariance = std::move(cov);
  return mvn;
}

MultivariateNormal mvn_from_moments(Vector mean, Matrix covariance) {
  const Index dim = mean.size();
  if (covariance.rows() != dim || covariance.cols() != dim)
    throw Error(ErrorCode::DimensionMismatch, "covariance shape does not match mean");
  if (!covariance.isApprox(covariance.transpose(), 1e-12))
    throw Error(ErrorCode::BadParams, "covariance must be symmetric");

  MultivariateNormal mvn;
  mvn.dimension = dim;
  mvn.mean = std::move(mean);
  mvn.cholesky_factor = cholesky_lower(covariance);
  mvn.covariance = std::move(covariance);
  return mvn;
}

double mahalanobis(const MultivariateNormal& mvn, const VectorRef& x) {
  if (x.size() != mvn.dimension)
    throw Error(ErrorCode::DimensionMismatch,
                "vector has dimension " + std::to_string(x.size()) + ", distribution has " +
                    std::to_string(mvn.dimension));
  // || L^-1 (x - mu) || equals sqrt((x-mu)^T Sigma^-1 (x-mu))
  Vector delta = x - mvn.mean;
  return mvn.cholesky_factor.triangularView<Eigen::Lower>().solve(delta).norm();
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw Error(ErrorCode::PercentileOutOfRange, "percentile must lie strictly inside (0,1)");

  // Wichura's algorithm AS241 (PPND16): rational approximations on three
  // regions of q = p - 1/2 resp. r = sqrt(-log(min(p, 1-p))).
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }

  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -value : value;
}

TruncatedNormal fit_truncated_normal(const VectorRef& distances,
                                     std::vector<std::string>* warnings) {
  const Index n = distances.size();
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 distances");
  if ((distances.array() < 0.0).any())
    throw Error(ErrorCode::NegativeDistance, "distances must be nonnegative");

  const double mean = distances.mean();
  double std =
      std::sqrt((distances.array() - mean).square().sum() / static_cast<double>(n - 1));
  if (std < 1e-12) {
    std = 1e-12;
    if (warnings)
      warnings->push_back("DegenerateDistances: scale below 1e-12, clamped to 1e-12");
  }
  return TruncatedNormal{mean, std};
}

double truncated_quantile(const TruncatedNormal& t, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw Error(ErrorCode::PercentileOutOfRange, "percentile must lie strictly inside (0,1)");
  const double alpha = (0.0 - t.location) / t.scale;
  const double mass_below = std_normal_cdf(alpha);
  double u = mass_below + p * (1.0 - mass_below);
  // guard the open interval against rounding at the extremes
  u = std::min(u, std::nextafter(1.0, 0.0));
  u = std::max(u, std::nextafter(0.0, 1.0));
  const double value = t.location + t.scale * std_normal_quantile(u);
  return std::max(value, 0.0);
}

}  // namespace greenhouse
