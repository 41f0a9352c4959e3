#pragma once

#include "rpflow/numerics.hpp"
#include "rpflow/rff.hpp"

#include <cstdint>
#include <vector>

namespace rpflow::gp {

constexpr std::size_t kExactSampleCap = 4096;

enum class SampleMode : std::uint8_t { exact_cholesky = 0, rff_approx = 1 };

struct GpSample {
    Matrix positions;
    Matrix values;  // N x m
    SampleMode mode = SampleMode::exact_cholesky;
};

/// Exact posterior over one shared kernel, independent across the m value
/// columns: a single factor of K(X,X) + noise*I serves every variable.
struct GpPosterior {
    Matrix train_positions;  // N x d
    CholeskyFactor factor;   // of K + noise_var*I (+ jitter)
    Matrix alpha;            // N x m, columnwise [K + noise I]^-1 values
    rff::KernelSpec spec;
};

/// Joint draw from GP(0, K) at the given positions via Cholesky; capped at
/// kExactSampleCap positions.
GpSample sample_prior_exact(Rng& rng, const rff::KernelSpec& spec, const Matrix& positions,
                            std::size_t channels);

/// Scalable draw through the feature map: values = embed(X) * W with W
/// standard normal (2F x m); covariance is the RFF kernel estimate.
GpSample sample_prior_rff(Rng& rng, const rff::RffBasis& basis, const Matrix& positions,
                          std::size_t channels);

GpPosterior fit_posterior(const rff::KernelSpec& spec, const Matrix& positions, const Matrix& values);

struct MeanCov {
    Matrix mean;  // N* x m
    Matrix cov;   // N* x N*, shared across variables
};

MeanCov posterior_mean_cov(const GpPosterior& post, const Matrix& query);

/// S joint posterior samples at the query positions; returns S matrices of
/// shape N* x m. Query size capped at kExactSampleCap.
std::vector<Matrix> sample_posterior(Rng& rng, const GpPosterior& post, const Matrix& query,
                                     std::size_t count);

/// Zero-mean GP log-likelihood of the columns of `values` on a position set
/// under lengthscale sigma: -1/2 z'K^-1 z - 1/2 log|K| - (N/2) log 2pi,
/// summed over columns, with the library jitter policy.
double gp_log_likelihood(const Matrix& positions, const Matrix& values, double sigma);

/// Grid-search MLE over candidate lengthscales; ties break toward smaller
/// sigma. Throws AllCandidatesFailed when no candidate factorizes.
double lengthscale_mle(const Matrix& positions, const Matrix& values,
                       const std::vector<double>& candidates);

/// Default candidate grid: `per_decade` log-spaced points per decade on
/// [lo, hi], endpoints included.
std::vector<double> log_spaced_candidates(double lo = 1e-3, double hi = 1.0,
                                          std::size_t per_decade = 32);

}  // namespace rpflow::gp
