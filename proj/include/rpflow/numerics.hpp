#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rpflow {

// ---------------------------------------------------------------------------
// Error types shared across the library.
// ---------------------------------------------------------------------------

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InvalidParam : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NotPositiveDefinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonFiniteState : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientSamples : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct SizeMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ImageTooSmall : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct AllCandidatesFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Dense row-major matrix of 64-bit floats.
// ---------------------------------------------------------------------------

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    bool all_finite() const;
    double max_abs() const;

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

/// Rows of `a` selected by index, in order (duplicates allowed).
Matrix gather_rows(const Matrix& a, const std::vector<std::size_t>& idx);
/// Horizontal concatenation [a | b]; either side may be empty (0 cols).
Matrix hcat(const Matrix& a, const Matrix& b);
/// Vertical concatenation.
Matrix vcat(const Matrix& a, const Matrix& b);
/// Contiguous row slice [begin, begin+count).
Matrix row_block(const Matrix& a, std::size_t begin, std::size_t count);

// ---------------------------------------------------------------------------
// Deterministic seeded generator.
//
// The stream is SplitMix64 (Steele, Lea, Flood 2014): a 64-bit counter
// advanced by the golden-ratio increment, finalized with two xor-shift
// multiplies. Normals come from the Box-Muller transform with the second
// value of each pair cached. Both pieces are fixed by this definition, so a
// seed pins the entire draw sequence.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Independent sub-stream keyed by (seed, a, b); used where results must
    /// not depend on evaluation order across samples or blocks.
    static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

    std::uint64_t next_u64();

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform();

    /// Uniform index in [0, n).
    std::size_t uniform_index(std::size_t n);

    /// Standard normal draw.
    double normal();

    Matrix normal_matrix(std::size_t rows, std::size_t cols);

    struct State {
        std::uint64_t counter;
        bool has_spare;
        double spare;
    };
    State save_state() const { return {state_, has_spare_, spare_}; }
    void restore_state(const State& s) {
        state_ = s.counter;
        has_spare_ = s.has_spare;
        spare_ = s.spare;
    }

private:
    std::uint64_t state_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// i.i.d. N(0,1) matrix from a fresh position of `rng`.
Matrix standard_normal(Rng& rng, std::size_t rows, std::size_t cols);

// ---------------------------------------------------------------------------
// Cholesky factorization and solves.
// ---------------------------------------------------------------------------

struct CholeskyFactor {
    Matrix l;            // lower triangular, n x n
    std::size_t n = 0;
    double jitter = 0.0; // diagonal shift applied before factorization
};

/// Factor a + jitter*I = L*L^T. Throws NotPositiveDefinite when a pivot is
/// not strictly positive.
CholeskyFactor cholesky(const Matrix& a, double jitter);

/// Solve (a + jitter*I) x = b via forward/backward substitution.
Matrix solve_with_factor(const CholeskyFactor& f, const Matrix& b);

/// Sum of log-diagonal entries of L; log|A + jitter*I| = 2 * this.
double log_diag_sum(const CholeskyFactor& f);

constexpr double kDefaultJitter = 1e-8;
constexpr double kMaxJitter = 1e-4;
// GP factorizations start lower so that noiseless posteriors keep their
// near-zero variance at conditioning points; escalation still reaches
// kDefaultJitter and beyond on near-singular dense-grid kernels.
constexpr double kGpJitter = 1e-12;

/// cholesky() with the library-wide escalation policy: start at `jitter`,
/// multiply by 10 up to kMaxJitter, rethrow on final failure.
CholeskyFactor cholesky_escalated(const Matrix& a, double jitter = kDefaultJitter);

}  // namespace rpflow
