#pragma once

#include "rpflow/numerics.hpp"

#include <cstdint>
#include <vector>

namespace rpflow::net {

enum class OutputActivation : std::uint8_t { identity = 0, sigmoid = 1 };

struct Layer {
    Matrix w;               // out x in
    std::vector<double> b;  // out
};

/// Fully-connected net with rectified-linear hidden layers. Used both as the
/// velocity field v(z, x, t) on inputs [features(x) | t-embed | z] and as a
/// plain coordinate regressor for the baselines.
struct Mlp {
    std::vector<Layer> layers;
    OutputActivation out_act = OutputActivation::identity;

    std::size_t input_dim() const { return layers.front().w.cols(); }
    std::size_t output_dim() const { return layers.back().w.rows(); }
    std::size_t param_count() const;
    bool all_finite() const;
};

/// [t, cos(2 pi k t), sin(2 pi k t)] for k = 1..pairs; dimension 1 + 2*pairs.
struct TimeEmbedding {
    std::size_t pairs = 8;

    std::size_t dim() const { return 1 + 2 * pairs; }
    void write(double t, double* out) const;
    /// One row per t value.
    Matrix embed(const std::vector<double>& ts) const;
};

/// dims = [input, hidden..., output]; at least one hidden layer required.
/// Weights uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
Mlp init_mlp(Rng& rng, const std::vector<std::size_t>& dims,
             OutputActivation out_act = OutputActivation::identity);

Matrix forward(const Mlp& net, const Matrix& input);

/// Velocity-field entry point: assembles [features | t-embed | z] rows.
Matrix velocity_forward(const Mlp& net, const TimeEmbedding& te, const Matrix& features,
                        const std::vector<double>& t, const Matrix& z);

struct Gradients {
    std::vector<Layer> layers;  // same shapes as the net
};

/// Mean squared error over batch and output dims, with exact reverse-mode
/// gradients for the affine/ReLU chain.
double mse_loss_and_grad(const Mlp& net, const Matrix& input, const Matrix& target, Gradients& grads);

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<Layer> m;  // first moments
    std::vector<Layer> v;  // second moments
};

AdamState make_adam(const Mlp& net, double lr);
/// One bias-corrected Adam update; lr_override < 0 means use state.lr.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state, double lr_override = -1.0);

struct EmaState {
    double decay = 0.999;
    std::vector<Layer> shadow;
};

EmaState make_ema(const Mlp& net, double decay);
/// shadow <- decay*shadow + (1-decay)*params
void ema_update(const Mlp& net, EmaState& ema);
/// Net with the shadow parameters substituted in.
Mlp ema_net(const Mlp& net, const EmaState& ema);

}  // namespace rpflow::net
