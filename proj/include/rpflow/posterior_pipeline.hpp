#pragma once

#include "rpflow/cfm_train.hpp"
#include "rpflow/gp.hpp"
#include "rpflow/numerics.hpp"
#include "rpflow/transport.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace rpflow::pipeline {

enum class Provenance : std::uint8_t { prior = 0, posterior = 1 };

/// S sampled fields at the query positions; the carrier of every predictive
/// distribution in the library.
struct Ensemble {
    std::vector<Matrix> samples;  // S entries, each N* x m
    Matrix positions;             // N* x d
    Provenance provenance = Provenance::prior;
    std::uint64_t seed = 0;
    std::size_t joint_block = 0;  // 0: exact joint draw; else conditioning block size

    std::size_t count() const { return samples.size(); }
    std::size_t points() const { return positions.rows(); }
    std::size_t channels() const { return samples.empty() ? 0 : samples.front().cols(); }
};

struct PosteriorConfig {
    double sigma_gp_posterior = 0.008;
    std::size_t k_backward = 100;
    std::size_t k_forward = 100;
    std::size_t ensemble_size = 64;
    std::uint64_t seed = 0;
    bool include_observations = false;  // append the training positions to the query
    std::size_t max_block = 0;          // 0: the gp exact-sampling cap
};

/// S source realizations drawn through the model's feature map and pushed
/// forward through the flow.
Ensemble sample_prior(const net::Mlp& net, const net::TimeEmbedding& te, const rff::RffBasis& basis,
                      const Matrix& query, std::size_t count, std::uint64_t seed, std::size_t k);

/// Prior sampling with an explicit source sampler (exact GP or glued-region
/// draws); `source` must produce N* x m values on the query positions.
Ensemble sample_prior_with_source(const net::Mlp& net, const net::TimeEmbedding& te,
                                  const rff::PositionEncoder& encoder, const Matrix& query,
                                  std::size_t count, std::uint64_t seed, std::size_t k,
                                  const std::function<Matrix(Rng&)>& source);

/// Backward-transport the observations, fit the noiseless source posterior
/// GP at the configured lengthscale, draw joint samples at the query set,
/// and push each forward. Queries above the exact cap are tiled into blocks
/// conditioned jointly on the observations but independent of each other;
/// the block size is recorded on the ensemble.
Ensemble sample_posterior(const net::Mlp& net, const net::TimeEmbedding& te,
                          const rff::PositionEncoder& encoder, const cfm::FieldObservations& obs,
                          const Matrix& query, const PosteriorConfig& cfg);

struct Summary {
    Matrix mean;  // N* x m
    Matrix stdev; // N* x m, unbiased
    std::vector<double> quantile_levels;
    std::vector<Matrix> quantiles;  // one N* x m matrix per level
};

/// Per-position, per-variable sample mean, unbiased std and order-statistic
/// quantiles with linear interpolation. Needs S >= 2.
Summary summarize(const Ensemble& e,
                  const std::vector<double>& quantile_levels = {0.05, 0.25, 0.5, 0.75, 0.95});

/// Quantile by linear interpolation of the sorted values (sorts a copy).
double quantile_interpolated(std::vector<double> values, double level);

}  // namespace rpflow::pipeline
