#include "rpflow/posterior_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace rpflow::pipeline {

Ensemble sample_prior_with_source(const net::Mlp& net, const net::TimeEmbedding& te,
                                  const rff::PositionEncoder& encoder, const Matrix& query,
                                  std::size_t count, std::uint64_t seed, std::size_t k,
                                  const std::function<Matrix(Rng&)>& source) {
    Ensemble e;
    e.positions = query;
    e.provenance = Provenance::prior;
    e.seed = seed;
    const Matrix features = encoder.encode(query);
    for (std::size_t s = 0; s < count; ++s) {
        Rng rng = Rng::derive(seed, s);
        Matrix z0 = source(rng);
        e.samples.push_back(
            ode::integrate(net, te, features, z0, {k, ode::Direction::forward}));
    }
    return e;
}

Ensemble sample_prior(const net::Mlp& net, const net::TimeEmbedding& te, const rff::RffBasis& basis,
                      const Matrix& query, std::size_t count, std::uint64_t seed, std::size_t k) {
    const std::size_t m = net.output_dim();
    auto source = [&](Rng& rng) { return gp::sample_prior_rff(rng, basis, query, m).values; };
    return sample_prior_with_source(net, te, rff::make_rff_encoder(basis), query, count, seed, k,
                                    source);
}

Ensemble sample_posterior(const net::Mlp& net, const net::TimeEmbedding& te,
                          const rff::PositionEncoder& encoder, const cfm::FieldObservations& obs,
                          const Matrix& query, const PosteriorConfig& cfg) {
    if (cfg.ensemble_size < 1) throw InvalidParam("sample_posterior: ensemble size must be >= 1");
    if (!(cfg.sigma_gp_posterior > 0.0))
        throw InvalidParam("sample_posterior: posterior lengthscale must be > 0");

    Matrix full_query = cfg.include_observations ? vcat(query, obs.positions) : query;

    // (1) observations back to the source space
    Matrix source_obs = ode::integrate(net, te, encoder, obs.positions, obs.values,
                                       {cfg.k_backward, ode::Direction::backward});

    // (2) noiseless source posterior, jitter only
    rff::KernelSpec spec{cfg.sigma_gp_posterior, 0.0};
    gp::GpPosterior post = gp::fit_posterior(spec, obs.positions, source_obs);

    // (3) joint source samples at the query, tiled when beyond the exact cap
    const std::size_t n = full_query.rows();
    const std::size_t m = obs.channels();
    const std::size_t cap = cfg.max_block > 0 ? cfg.max_block : gp::kExactSampleCap;
    const std::size_t n_blocks = (n + cap - 1) / cap;
    const std::size_t block = (n + n_blocks - 1) / n_blocks;
    std::vector<Matrix> source_samples(cfg.ensemble_size, Matrix(n, m));
    std::size_t block_index = 0;
    for (std::size_t begin = 0; begin < n; begin += block, ++block_index) {
        const std::size_t len = std::min(block, n - begin);
        gp::MeanCov mc = gp::posterior_mean_cov(post, row_block(full_query, begin, len));
        CholeskyFactor f = cholesky_escalated(mc.cov, kGpJitter);
        for (std::size_t s = 0; s < cfg.ensemble_size; ++s) {
            Rng rng = Rng::derive(cfg.seed, s, block_index);
            Matrix draw = add(mc.mean, matmul(f.l, rng.normal_matrix(len, m)));
            std::copy(draw.data(), draw.data() + draw.size(),
                      source_samples[s].data() + begin * m);
        }
    }

    // (4) each sample forward through the flow
    Ensemble e;
    e.positions = full_query;
    e.provenance = Provenance::posterior;
    e.seed = cfg.seed;
    e.joint_block = n_blocks == 1 ? 0 : block;
    const Matrix features = encoder.encode(full_query);
    for (auto& src : source_samples)
        e.samples.push_back(
            ode::integrate(net, te, features, src, {cfg.k_forward, ode::Direction::forward}));
    return e;
}

double quantile_interpolated(std::vector<double> values, double level) {
    if (values.empty()) throw InsufficientSamples("quantile: empty sample");
    std::sort(values.begin(), values.end());
    const double pos = level * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    if (values[lo] == values[hi]) return values[lo];  // exact under ties
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

Summary summarize(const Ensemble& e, const std::vector<double>& quantile_levels) {
    const std::size_t s = e.count();
    if (s < 2) throw InsufficientSamples("summarize: need at least 2 samples for std");
    const std::size_t n = e.points();
    const std::size_t m = e.channels();

    Summary out;
    out.mean = Matrix(n, m);
    out.stdev = Matrix(n, m);
    out.quantile_levels = quantile_levels;
    out.quantiles.assign(quantile_levels.size(), Matrix(n, m));

    std::vector<double> buf(s);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < m; ++c) {
            double sum = 0.0;
            bool all_equal = true;
            for (std::size_t k = 0; k < s; ++k) {
                buf[k] = e.samples[k](i, c);
                sum += buf[k];
                all_equal = all_equal && buf[k] == buf[0];
            }
            if (all_equal) {  // keep degenerate ensembles exact
                out.mean(i, c) = buf[0];
                out.stdev(i, c) = 0.0;
                for (std::size_t q = 0; q < quantile_levels.size(); ++q)
                    out.quantiles[q](i, c) = buf[0];
                continue;
            }
            const double mean = sum / static_cast<double>(s);
            double ss = 0.0;
            for (double v : buf) ss += (v - mean) * (v - mean);
            out.mean(i, c) = mean;
            out.stdev(i, c) = std::sqrt(ss / static_cast<double>(s - 1));
            for (std::size_t q = 0; q < quantile_levels.size(); ++q)
                out.quantiles[q](i, c) = quantile_interpolated(buf, quantile_levels[q]);
        }
    return out;
}

}  // namespace rpflow::pipeline
