#include "rpflow/rff.hpp"

#include <cmath>
#include <numbers>

namespace rpflow::rff {

RffBasis make_basis(Rng& rng, std::size_t frequencies, std::size_t dim, double sigma_rff) {
    if (frequencies < 1 || dim < 1) throw InvalidParam("make_basis: F and d must be >= 1");
    if (!(sigma_rff > 0.0)) throw InvalidParam("make_basis: sigma_rff must be > 0");
    RffBasis basis;
    basis.sigma_rff = sigma_rff;
    basis.b = scale(rng.normal_matrix(frequencies, dim), sigma_rff);
    return basis;
}

RffBasis make_basis(std::uint64_t seed, std::size_t frequencies, std::size_t dim, double sigma_rff) {
    Rng rng(seed);
    RffBasis basis = make_basis(rng, frequencies, dim, sigma_rff);
    basis.seed = seed;
    return basis;
}

Matrix embed(const RffBasis& basis, const Matrix& positions) {
    if (positions.cols() != basis.dim())
        throw DimensionMismatch("embed: positions have " + std::to_string(positions.cols()) +
                                " coords, basis expects " + std::to_string(basis.dim()));
    const std::size_t n = positions.rows();
    const std::size_t f = basis.frequencies();
    const double norm = 1.0 / std::sqrt(static_cast<double>(f));

    Matrix proj = matmul(positions, transpose(basis.b));  // N x F
    Matrix out(n, 2 * f);
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = proj.row_ptr(i);
        double* o = out.row_ptr(i);
        for (std::size_t j = 0; j < f; ++j) {
            o[j] = std::cos(p[j]) * norm;
            o[f + j] = std::sin(p[j]) * norm;
        }
    }
    return out;
}

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x, const Matrix& x2) {
    if (x.cols() != x2.cols()) throw DimensionMismatch("kernel_matrix: coordinate dims differ");
    if (!(spec.lengthscale > 0.0)) throw InvalidParam("kernel_matrix: lengthscale must be > 0");
    const double inv = -0.5 / (spec.lengthscale * spec.lengthscale);
    const std::size_t d = x.cols();
    Matrix k(x.rows(), x2.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* xi = x.row_ptr(i);
        for (std::size_t j = 0; j < x2.rows(); ++j) {
            const double* xj = x2.row_ptr(j);
            double sq = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = xi[c] - xj[c];
                sq += diff * diff;
            }
            k(i, j) = std::exp(inv * sq);
        }
    }
    return k;
}

std::size_t PositionEncoder::feature_dim() const {
    switch (kind) {
        case EncoderKind::rff: return basis.embed_dim();
        case EncoderKind::posenc: return 2 * octaves * coords;
        case EncoderKind::none: return 0;
        case EncoderKind::rff_region: return basis.embed_dim() + 1;
    }
    return 0;
}

Matrix PositionEncoder::encode(const Matrix& positions) const {
    switch (kind) {
        case EncoderKind::rff:
            return embed(basis, positions);
        case EncoderKind::posenc: {
            if (positions.cols() != coords)
                throw DimensionMismatch("posenc: coordinate dim mismatch");
            Matrix out(positions.rows(), feature_dim());
            for (std::size_t i = 0; i < positions.rows(); ++i) {
                double* o = out.row_ptr(i);
                std::size_t w = 0;
                for (std::size_t c = 0; c < coords; ++c) {
                    const double x = positions(i, c);
                    for (std::size_t j = 0; j < octaves; ++j) {
                        const double ang = 2.0 * std::numbers::pi * std::ldexp(x, static_cast<int>(j));
                        o[w++] = std::cos(ang);
                        o[w++] = std::sin(ang);
                    }
                }
            }
            return out;
        }
        case EncoderKind::none:
            if (positions.cols() != coords)
                throw DimensionMismatch("none encoder: coordinate dim mismatch");
            return Matrix(positions.rows(), 0);
        case EncoderKind::rff_region: {
            Matrix gamma = embed(basis, positions);
            Matrix flag(positions.rows(), 1);
            for (std::size_t i = 0; i < positions.rows(); ++i)
                flag(i, 0) = positions(i, 0) >= region_split ? 1.0 : 0.0;
            return hcat(gamma, flag);
        }
    }
    throw InvalidParam("encode: unknown encoder kind");
}

PositionEncoder make_rff_encoder(const RffBasis& basis) {
    PositionEncoder e;
    e.kind = EncoderKind::rff;
    e.basis = basis;
    e.coords = basis.dim();
    return e;
}

PositionEncoder make_posenc_encoder(std::size_t octaves, std::size_t coords) {
    if (octaves < 1) throw InvalidParam("posenc: octaves must be >= 1");
    PositionEncoder e;
    e.kind = EncoderKind::posenc;
    e.octaves = octaves;
    e.coords = coords;
    return e;
}

PositionEncoder make_none_encoder(std::size_t coords) {
    PositionEncoder e;
    e.kind = EncoderKind::none;
    e.coords = coords;
    return e;
}

PositionEncoder make_region_encoder(const RffBasis& basis, double split) {
    PositionEncoder e;
    e.kind = EncoderKind::rff_region;
    e.basis = basis;
    e.coords = basis.dim();
    e.region_split = split;
    return e;
}

}  // namespace rpflow::rff
