#include "rpflow/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rpflow::gp {

GpSample sample_prior_exact(Rng& rng, const rff::KernelSpec& spec, const Matrix& positions,
                            std::size_t channels) {
    if (positions.rows() > kExactSampleCap)
        throw InvalidParam("sample_prior_exact: position count exceeds the exact-mode cap");
    Matrix k = rff::kernel_matrix(spec, positions, positions);
    CholeskyFactor f = cholesky_escalated(k, kGpJitter);
    Matrix e = rng.normal_matrix(positions.rows(), channels);
    GpSample s;
    s.positions = positions;
    s.values = matmul(f.l, e);
    s.mode = SampleMode::exact_cholesky;
    return s;
}

GpSample sample_prior_rff(Rng& rng, const rff::RffBasis& basis, const Matrix& positions,
                          std::size_t channels) {
    Matrix w = rng.normal_matrix(basis.embed_dim(), channels);
    GpSample s;
    s.positions = positions;
    s.values = matmul(rff::embed(basis, positions), w);
    s.mode = SampleMode::rff_approx;
    return s;
}

GpPosterior fit_posterior(const rff::KernelSpec& spec, const Matrix& positions, const Matrix& values) {
    if (positions.rows() != values.rows())
        throw DimensionMismatch("fit_posterior: positions/values row mismatch");
    if (spec.noise_var < 0.0) throw InvalidParam("fit_posterior: negative noise variance");
    Matrix k = rff::kernel_matrix(spec, positions, positions);
    for (std::size_t i = 0; i < k.rows(); ++i) k(i, i) += spec.noise_var;
    GpPosterior post;
    post.factor = cholesky_escalated(k, kGpJitter);
    post.alpha = solve_with_factor(post.factor, values);
    post.train_positions = positions;
    post.spec = spec;
    return post;
}

MeanCov posterior_mean_cov(const GpPosterior& post, const Matrix& query) {
    if (query.cols() != post.train_positions.cols())
        throw DimensionMismatch("posterior_mean_cov: coordinate dims differ");
    Matrix ks = rff::kernel_matrix(post.spec, query, post.train_positions);  // N* x N
    MeanCov out;
    out.mean = matmul(ks, post.alpha);
    Matrix kss = rff::kernel_matrix(post.spec, query, query);
    Matrix solved = solve_with_factor(post.factor, transpose(ks));  // N x N*
    out.cov = sub(kss, matmul(ks, solved));
    // Symmetrize to absorb roundoff before any factorization downstream.
    for (std::size_t i = 0; i < out.cov.rows(); ++i)
        for (std::size_t j = i + 1; j < out.cov.cols(); ++j) {
            const double v = 0.5 * (out.cov(i, j) + out.cov(j, i));
            out.cov(i, j) = v;
            out.cov(j, i) = v;
        }
    return out;
}

std::vector<Matrix> sample_posterior(Rng& rng, const GpPosterior& post, const Matrix& query,
                                     std::size_t count) {
    if (query.rows() > kExactSampleCap)
        throw InvalidParam("sample_posterior: query exceeds the exact covariance cap");
    MeanCov mc = posterior_mean_cov(post, query);
    CholeskyFactor f = cholesky_escalated(mc.cov, kGpJitter);
    const std::size_t m = post.alpha.cols();
    std::vector<Matrix> samples;
    samples.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        Matrix e = rng.normal_matrix(query.rows(), m);
        samples.push_back(add(mc.mean, matmul(f.l, e)));
    }
    return samples;
}

double gp_log_likelihood(const Matrix& positions, const Matrix& values, double sigma) {
    const auto n = static_cast<double>(positions.rows());
    rff::KernelSpec spec{sigma, 0.0};
    Matrix k = rff::kernel_matrix(spec, positions, positions);
    CholeskyFactor f = cholesky_escalated(k);
    Matrix alpha = solve_with_factor(f, values);
    double quad = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) quad += values.data()[i] * alpha.data()[i];
    const double logdet = 2.0 * log_diag_sum(f);
    const auto cols = static_cast<double>(values.cols());
    return -0.5 * quad - 0.5 * cols * logdet - 0.5 * cols * n * std::log(2.0 * std::numbers::pi);
}

double lengthscale_mle(const Matrix& positions, const Matrix& values,
                       const std::vector<double>& candidates) {
    if (positions.rows() < 8) throw InvalidParam("lengthscale_mle: need at least 8 points");
    for (double c : candidates)
        if (!(c > 0.0)) throw InvalidParam("lengthscale_mle: candidates must be > 0");

    std::vector<double> sorted = candidates;
    std::sort(sorted.begin(), sorted.end());

    bool found = false;
    double best_sigma = 0.0;
    double best_ll = 0.0;
    for (double sigma : sorted) {
        double ll;
        try {
            ll = gp_log_likelihood(positions, values, sigma);
        } catch (const NotPositiveDefinite&) {
            continue;
        }
        if (!std::isfinite(ll)) continue;
        if (!found || ll > best_ll) {  // strict: ties stay with the smaller sigma
            found = true;
            best_ll = ll;
            best_sigma = sigma;
        }
    }
    if (!found) throw AllCandidatesFailed("lengthscale_mle: every candidate failed to factorize");
    return best_sigma;
}

std::vector<double> log_spaced_candidates(double lo, double hi, std::size_t per_decade) {
    if (!(lo > 0.0) || !(hi > lo)) throw InvalidParam("log_spaced_candidates: need 0 < lo < hi");
    std::vector<double> out;
    const double step = 1.0 / static_cast<double>(per_decade);
    const double lg_lo = std::log10(lo);
    const double lg_hi = std::log10(hi);
    for (double lg = lg_lo; lg < lg_hi + 0.5 * step; lg += step)
        out.push_back(std::pow(10.0, std::min(lg, lg_hi)));
    return out;
}

}  // namespace rpflow::gp
