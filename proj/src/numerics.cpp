#include "rpflow/numerics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace rpflow {

namespace {

using EMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMatrix>;
using MapC = Eigen::Map<const EMatrix>;

MapC as_eigen(const Matrix& m) {
    return MapC(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

MapM as_eigen(Matrix& m) {
    return MapM(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionMismatch("matmul: " + std::to_string(a.cols()) + " cols vs " +
                                std::to_string(b.rows()) + " rows");
    Matrix out(a.rows(), b.cols());
    as_eigen(out).noalias() = as_eigen(a) * as_eigen(b);
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    as_eigen(out) = as_eigen(a).transpose();
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("add: shape mismatch");
    Matrix out = a;
    as_eigen(out) += as_eigen(b);
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("sub: shape mismatch");
    Matrix out = a;
    as_eigen(out) -= as_eigen(b);
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out = a;
    as_eigen(out) *= s;
    return out;
}

Matrix gather_rows(const Matrix& a, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a.rows()) throw DimensionMismatch("gather_rows: index out of range");
        std::copy(a.row_ptr(idx[i]), a.row_ptr(idx[i]) + a.cols(), out.row_ptr(i));
    }
    return out;
}

Matrix hcat(const Matrix& a, const Matrix& b) {
    if (a.cols() == 0) return b;
    if (b.cols() == 0) return a;
    if (a.rows() != b.rows()) throw DimensionMismatch("hcat: row mismatch");
    Matrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        std::copy(a.row_ptr(i), a.row_ptr(i) + a.cols(), out.row_ptr(i));
        std::copy(b.row_ptr(i), b.row_ptr(i) + b.cols(), out.row_ptr(i) + a.cols());
    }
    return out;
}

Matrix vcat(const Matrix& a, const Matrix& b) {
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    if (a.cols() != b.cols()) throw DimensionMismatch("vcat: col mismatch");
    Matrix out(a.rows() + b.rows(), a.cols());
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

Matrix row_block(const Matrix& a, std::size_t begin, std::size_t count) {
    if (begin + count > a.rows()) throw DimensionMismatch("row_block: out of range");
    Matrix out(count, a.cols());
    std::copy(a.row_ptr(begin), a.row_ptr(begin) + count * a.cols(), out.data());
    return out;
}

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

Rng Rng::derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    // Fold the stream key through the same finalizer as the main stream.
    Rng mixer(seed);
    std::uint64_t s = mixer.next_u64() ^ (a * 0x9e3779b97f4a7c15ULL);
    Rng mixer2(s);
    return Rng(mixer2.next_u64() ^ (b * 0xbf58476d1ce4e5b9ULL));
}

std::uint64_t Rng::next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw InvalidParam("uniform_index: n must be >= 1");
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0,1] so the log is finite.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

Matrix Rng::normal_matrix(std::size_t rows, std::size_t cols) {
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = normal();
    return out;
}

Matrix standard_normal(Rng& rng, std::size_t rows, std::size_t cols) {
    if (rows < 1 || cols < 1) throw InvalidParam("standard_normal: rows, cols must be >= 1");
    return rng.normal_matrix(rows, cols);
}

// ---------------------------------------------------------------------------
// Cholesky
// ---------------------------------------------------------------------------

CholeskyFactor cholesky(const Matrix& a, double jitter) {
    if (a.rows() != a.cols()) throw DimensionMismatch("cholesky: matrix not square");
    if (jitter < 0.0) throw InvalidParam("cholesky: jitter must be >= 0");
    const auto n = static_cast<Eigen::Index>(a.rows());

    EMatrix work = as_eigen(a);
    work.diagonal().array() += jitter;

    Eigen::LLT<EMatrix> llt(work);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("cholesky: non-positive pivot at jitter " + std::to_string(jitter));

    CholeskyFactor f;
    f.n = a.rows();
    f.jitter = jitter;
    f.l = Matrix(a.rows(), a.rows());
    as_eigen(f.l) = EMatrix(llt.matrixL());
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(f.l(i, i) > 0.0))
            throw NotPositiveDefinite("cholesky: non-positive diagonal in factor");
    return f;
}

Matrix solve_with_factor(const CholeskyFactor& f, const Matrix& b) {
    if (f.n != b.rows()) throw DimensionMismatch("solve_with_factor: rhs rows != factor dim");
    Matrix out = b;
    auto l = as_eigen(f.l);
    auto x = as_eigen(out);
    l.triangularView<Eigen::Lower>().solveInPlace(x);
    l.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
    return out;
}

double log_diag_sum(const CholeskyFactor& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.n; ++i) s += std::log(f.l(i, i));
    return s;
}

CholeskyFactor cholesky_escalated(const Matrix& a, double jitter) {
    double j = jitter;
    while (true) {
        try {
            return cholesky(a, j);
        } catch (const NotPositiveDefinite&) {
            if (j >= kMaxJitter) throw;
            j = (j == 0.0) ? kDefaultJitter : j * 10.0;
            if (j > kMaxJitter) j = kMaxJitter;
        }
    }
}

}  // namespace rpflow
