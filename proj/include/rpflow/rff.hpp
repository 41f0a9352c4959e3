#pragma once

#include "rpflow/numerics.hpp"

#include <cstdint>

namespace rpflow::rff {

/// Random Fourier Feature basis: F frequency rows drawn i.i.d. N(0, sigma_rff^2).
/// The embedding dimension is 2F and the implied source kernel is the
/// squared-exponential with lengthscale 1/sigma_rff.
struct RffBasis {
    Matrix b;            // F x d
    double sigma_rff = 0.0;
    std::uint64_t seed = 0;

    std::size_t frequencies() const { return b.rows(); }
    std::size_t dim() const { return b.cols(); }
    std::size_t embed_dim() const { return 2 * b.rows(); }
};

/// Squared-exponential kernel parameters: K(x,x') = exp(-|x-x'|^2 / (2 sigma^2)).
struct KernelSpec {
    double lengthscale = 1.0;
    double noise_var = 0.0;
};

RffBasis make_basis(Rng& rng, std::size_t frequencies, std::size_t dim, double sigma_rff);
RffBasis make_basis(std::uint64_t seed, std::size_t frequencies, std::size_t dim, double sigma_rff);

/// N x 2F embedding, rows [cos(Bx); sin(Bx)] / sqrt(F), so gamma(x).gamma(x')
/// is an unbiased estimate of the kernel and each row has unit norm.
Matrix embed(const RffBasis& basis, const Matrix& positions);

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x, const Matrix& x2);

// ---------------------------------------------------------------------------
// Position encoders: the RFF embedding plus the ablation variants that swap
// it for a deterministic sinusoidal encoding, nothing, or RFF with a region
// indicator column (used to glue independent source processes).
// ---------------------------------------------------------------------------

enum class EncoderKind : std::uint8_t { rff = 0, posenc = 1, none = 2, rff_region = 3 };

struct PositionEncoder {
    EncoderKind kind = EncoderKind::rff;
    RffBasis basis;          // rff / rff_region
    std::size_t octaves = 8; // posenc: frequencies 2^j, j = 0..octaves-1, per coordinate
    std::size_t coords = 1;  // posenc/none: spatial dimension
    double region_split = 0.5;  // rff_region: indicator on first coordinate

    std::size_t feature_dim() const;
    Matrix encode(const Matrix& positions) const;
};

PositionEncoder make_rff_encoder(const RffBasis& basis);
PositionEncoder make_posenc_encoder(std::size_t octaves, std::size_t coords);
PositionEncoder make_none_encoder(std::size_t coords);
PositionEncoder make_region_encoder(const RffBasis& basis, double split);

}  // namespace rpflow::rff
