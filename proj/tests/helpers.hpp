// Shared test oracles. Everything here is deliberately naive and independent
// of the library's solve paths.
#pragma once

#include "rpflow/cfm_train.hpp"
#include "rpflow/numerics.hpp"
#include "rpflow/rff.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace test_oracle {

using rpflow::Matrix;

/// Gauss-Jordan inverse with partial pivoting.
inline Matrix naive_inverse(Matrix a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("naive_inverse: not square");
    Matrix inv = Matrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (a(pivot, col) == 0.0) throw std::runtime_error("naive_inverse: singular");
        if (pivot != col)
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(a(pivot, c), a(col, c));
                std::swap(inv(pivot, c), inv(col, c));
            }
        const double d = a(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            a(col, c) /= d;
            inv(col, c) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                a(r, c) -= f * a(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    return inv;
}

inline double sq_exp_kernel(const double* x, const double* y, std::size_t d, double lengthscale) {
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        const double diff = x[c] - y[c];
        sq += diff * diff;
    }
    return std::exp(-sq / (2.0 * lengthscale * lengthscale));
}

struct NaivePosterior {
    Matrix mean;  // N* x m
    Matrix cov;   // N* x N*
};

/// Posterior mean/covariance by direct dense inversion of
/// K(X,X) + noise*I + jitter*I.
inline NaivePosterior naive_gp_posterior(const Matrix& train_x, const Matrix& train_y,
                                         const Matrix& query, double lengthscale, double noise_var,
                                         double jitter) {
    const std::size_t n = train_x.rows();
    const std::size_t q = query.rows();
    const std::size_t d = train_x.cols();

    Matrix k(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            k(i, j) = sq_exp_kernel(train_x.row_ptr(i), train_x.row_ptr(j), d, lengthscale) +
                      (i == j ? noise_var + jitter : 0.0);
    Matrix kinv = naive_inverse(k);

    Matrix ks(q, n);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < n; ++j)
            ks(i, j) = sq_exp_kernel(query.row_ptr(i), train_x.row_ptr(j), d, lengthscale);

    NaivePosterior out;
    out.mean = rpflow::matmul(rpflow::matmul(ks, kinv), train_y);
    Matrix kss(q, q);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < q; ++j)
            kss(i, j) = sq_exp_kernel(query.row_ptr(i), query.row_ptr(j), d, lengthscale);
    out.cov = rpflow::sub(kss, rpflow::matmul(rpflow::matmul(ks, kinv), rpflow::transpose(ks)));
    return out;
}

/// Random well-separated positions in [0,1]^d: rejection on minimum spacing,
/// halving the spacing after repeated failures so dense requests terminate.
inline Matrix separated_positions(rpflow::Rng& rng, std::size_t n, std::size_t d,
                                  double min_dist = 0.04) {
    Matrix x(n, d);
    std::size_t placed = 0;
    std::size_t failures = 0;
    while (placed < n) {
        double cand[4];
        for (std::size_t c = 0; c < d; ++c) cand[c] = rng.uniform();
        bool ok = true;
        for (std::size_t i = 0; i < placed && ok; ++i) {
            double sq = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = cand[c] - x(i, c);
                sq += diff * diff;
            }
            if (sq < min_dist * min_dist) ok = false;
        }
        if (ok) {
            for (std::size_t c = 0; c < d; ++c) x(placed, c) = cand[c];
            ++placed;
            failures = 0;
        } else if (++failures > 200) {
            min_dist *= 0.5;
            failures = 0;
        }
    }
    return x;
}

/// Synthetic grayscale image on an n x n grid: smooth base, a soft edge,
/// and fine oriented texture, mapped into roughly [0.1, 0.9].
inline Matrix synthetic_image_values(std::size_t side, std::uint64_t seed) {
    Matrix v(side * side, 1);
    rpflow::Rng r2(seed);
    const double f1 = 1.0 + r2.uniform() * 2.0;
    const double f2 = 2.0 + r2.uniform() * 3.0;
    const double p1 = r2.uniform() * 2.0 * std::numbers::pi;
    const double p2 = r2.uniform() * 2.0 * std::numbers::pi;
    const double cx = 0.3 + 0.4 * r2.uniform();
    const double cy = 0.3 + 0.4 * r2.uniform();
    const double tf1 = 5.0 + 3.0 * r2.uniform();   // texture frequencies
    const double tf2 = 6.0 + 3.0 * r2.uniform();
    const double tp = r2.uniform() * 2.0 * std::numbers::pi;
    for (std::size_t row = 0; row < side; ++row)
        for (std::size_t col = 0; col < side; ++col) {
            const double x = static_cast<double>(col) / static_cast<double>(side - 1);
            const double y = static_cast<double>(row) / static_cast<double>(side - 1);
            double s = 0.4 * std::sin(2.0 * std::numbers::pi * f1 * x + p1) *
                           std::cos(2.0 * std::numbers::pi * f2 * y + p2) +
                       0.35 * std::tanh(8.0 * (x - cx)) * std::sin(3.0 * (y - cy)) +
                       0.18 * std::sin(2.0 * std::numbers::pi * (f1 * y + f2 * x) / 2.0) +
                       0.16 * std::sin(2.0 * std::numbers::pi * (tf1 * x + tf2 * y) + tp) +
                       0.1 * std::cos(2.0 * std::numbers::pi * tf2 * (x - cx) * (y - cy) * 2.0 + tp);
            v(row * side + col, 0) = 0.5 + 0.4 * std::tanh(s);
        }
    return v;
}

}  // namespace test_oracle
