#include "rpflow/transport.hpp"

#include <cmath>

namespace rpflow::ode {

Matrix integrate(const net::Mlp& net, const net::TimeEmbedding& te, const Matrix& features,
                 const Matrix& z_in, const OdeConfig& cfg) {
    if (cfg.steps < 1) throw InvalidParam("integrate: steps must be >= 1");
    if (features.rows() != z_in.rows()) throw DimensionMismatch("integrate: batch size mismatch");

    const std::size_t k = cfg.steps;
    const double h = 1.0 / static_cast<double>(k);
    const bool fwd = cfg.direction == Direction::forward;

    Matrix z = z_in;
    std::vector<double> t(z.rows());
    for (std::size_t i = 0; i < k; ++i) {
        const double ti = fwd ? static_cast<double>(i) * h : 1.0 - static_cast<double>(i) * h;
        std::fill(t.begin(), t.end(), ti);
        Matrix v = net::velocity_forward(net, te, features, t, z);
        const double sign = fwd ? 1.0 : -1.0;
        for (std::size_t j = 0; j < z.size(); ++j) z.data()[j] += sign * h * v.data()[j];
        if (!z.all_finite())
            throw NonFiniteState("integrate: state left the finite range at step " + std::to_string(i));
    }
    return z;
}

Matrix integrate(const net::Mlp& net, const net::TimeEmbedding& te,
                 const rff::PositionEncoder& encoder, const Matrix& positions, const Matrix& z_in,
                 const OdeConfig& cfg) {
    return integrate(net, te, encoder.encode(positions), z_in, cfg);
}

double roundtrip_error(const net::Mlp& net, const net::TimeEmbedding& te,
                       const rff::PositionEncoder& encoder, const Matrix& positions, const Matrix& z,
                       std::size_t k) {
    const Matrix features = encoder.encode(positions);
    Matrix fwd = integrate(net, te, features, z, {k, Direction::forward});
    Matrix back = integrate(net, te, features, fwd, {k, Direction::backward});
    return sub(back, z).max_abs();
}

double estimate_lipschitz(const net::Mlp& net, const net::TimeEmbedding& te,
                          const rff::PositionEncoder& encoder, const Matrix& positions, Rng& rng,
                          std::size_t pairs, std::size_t k) {
    if (pairs < 1) throw InvalidParam("estimate_lipschitz: pairs must be >= 1");
    const std::size_t m = net.output_dim();
    const std::size_t n = positions.rows();
    const Matrix features = encoder.encode(positions);

    // Draw all endpoints first so the stream prefix is independent of batching.
    Matrix a(pairs, m), b(pairs, m);
    std::vector<std::size_t> xi(pairs);
    for (std::size_t p = 0; p < pairs; ++p) {
        xi[p] = p % n;
        for (std::size_t c = 0; c < m; ++c) a(p, c) = rng.normal();
        for (std::size_t c = 0; c < m; ++c) b(p, c) = rng.normal();
    }
    Matrix feat = gather_rows(features, xi);
    Matrix ta = integrate(net, te, feat, a, {k, Direction::forward});
    Matrix tb = integrate(net, te, feat, b, {k, Direction::forward});

    double best = 0.0;
    for (std::size_t p = 0; p < pairs; ++p) {
        double num = 0.0, den = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            const double dn = ta(p, c) - tb(p, c);
            const double dd = a(p, c) - b(p, c);
            num += dn * dn;
            den += dd * dd;
        }
        if (den > 0.0) best = std::max(best, std::sqrt(num / den));
    }
    return best;
}

}  // namespace rpflow::ode
