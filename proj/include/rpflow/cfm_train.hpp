#pragma once

#include "rpflow/numerics.hpp"
#include "rpflow/rff.hpp"
#include "rpflow/velocity_net.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace rpflow::cfm {

/// One observed realization of the target field on N positions in [0,1]^d.
struct FieldObservations {
    Matrix positions;  // N x d
    Matrix values;     // N x m
    double peak = 1.0; // value-range metadata for PSNR and friends

    std::size_t count() const { return positions.rows(); }
    std::size_t dim() const { return positions.cols(); }
    std::size_t channels() const { return values.cols(); }
    void validate() const;
};

struct TrainConfig {
    std::size_t iterations = 10000;
    std::size_t batch_size = 128;
    double lr = 1e-3;
    double sigma_noise = 0.0;
    std::size_t warmup_steps = 0;  // 0 disables the linear ramp
    std::optional<double> ema_decay;
    std::uint64_t seed = 0;
};

struct TrainingBatch {
    Matrix features;          // B x P, encoded positions
    std::vector<double> t;    // B
    Matrix z_t;               // B x m, interpolant t*z1 + (1-t)*z0
    Matrix target_velocity;   // B x m, z1 - z0
};

/// Assemble one batch: position uniform from the observation set, t uniform
/// on [0,1], z0 standard normal, z1 = value + noise. `feature_cache` must be
/// the encoder applied to obs.positions. `forced_t` pins t for every element
/// (test seam for the interpolant endpoints).
TrainingBatch make_training_batch(Rng& rng, const FieldObservations& obs, const Matrix& feature_cache,
                                  const TrainConfig& cfg, std::optional<double> forced_t = {});

TrainingBatch make_training_batch(Rng& rng, const FieldObservations& obs,
                                  const rff::PositionEncoder& encoder, const TrainConfig& cfg,
                                  std::optional<double> forced_t = {});

struct TrainResult {
    net::Mlp final_net;
    std::optional<net::Mlp> ema;
    std::vector<double> loss_trace;  // one entry per iteration
};

/// Losses above this are treated as divergence: Adam's bounded steps keep an
/// exploding run finite, so a pure non-finite check would never trip.
constexpr double kDivergenceThreshold = 1e12;

/// Run cfg.iterations Adam steps of the conditional-velocity regression.
/// Deterministic given cfg.seed. Throws DivergedError when the loss leaves
/// the finite range or crosses kDivergenceThreshold.
TrainResult train(const FieldObservations& obs, const rff::PositionEncoder& encoder, net::Mlp net,
                  const net::TimeEmbedding& te, const TrainConfig& cfg);

/// Net input width for a given encoder / time embedding / channel count.
std::size_t input_dim(const rff::PositionEncoder& encoder, const net::TimeEmbedding& te,
                      std::size_t channels);

/// Standard layer-dimension vector: [input, width x hidden_layers, channels].
std::vector<std::size_t> layer_dims(const rff::PositionEncoder& encoder, const net::TimeEmbedding& te,
                                    std::size_t channels, std::size_t width, std::size_t hidden_layers);

void write_loss_csv(const std::vector<double>& trace, const std::string& path);

}  // namespace rpflow::cfm
