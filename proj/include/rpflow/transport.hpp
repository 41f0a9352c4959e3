#pragma once

#include "rpflow/numerics.hpp"
#include "rpflow/rff.hpp"
#include "rpflow/velocity_net.hpp"

namespace rpflow::ode {

enum class Direction { forward, backward };

struct OdeConfig {
    std::size_t steps = 100;
    Direction direction = Direction::forward;
};

/// Explicit Euler transport of the rows of z_in, one state per position.
/// Forward: z += (1/k) v(z, x, i/k); backward: z -= (1/k) v(z, x, 1 - i/k).
/// `features` must be encoder.encode(positions); rows evolve independently.
Matrix integrate(const net::Mlp& net, const net::TimeEmbedding& te, const Matrix& features,
                 const Matrix& z_in, const OdeConfig& cfg);

Matrix integrate(const net::Mlp& net, const net::TimeEmbedding& te,
                 const rff::PositionEncoder& encoder, const Matrix& positions, const Matrix& z_in,
                 const OdeConfig& cfg);

/// max-abs of backward(forward(z)) - z with k steps each way.
double roundtrip_error(const net::Mlp& net, const net::TimeEmbedding& te,
                       const rff::PositionEncoder& encoder, const Matrix& positions, const Matrix& z,
                       std::size_t k);

/// Empirical lower bound on the Lipschitz constant of the forward map in its
/// source argument: max over sampled standard-normal pairs of
/// |T(a,x) - T(b,x)| / |a - b|, positions cycled from the given set.
double estimate_lipschitz(const net::Mlp& net, const net::TimeEmbedding& te,
                          const rff::PositionEncoder& encoder, const Matrix& positions, Rng& rng,
                          std::size_t pairs, std::size_t k = 100);

}  // namespace rpflow::ode
