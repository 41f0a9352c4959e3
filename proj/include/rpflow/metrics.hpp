#pragma once

#include "rpflow/numerics.hpp"
#include "rpflow/posterior_pipeline.hpp"

#include <vector>

namespace rpflow::metrics {

/// 10 log10(peak^2 / MSE); +infinity when the arrays match exactly.
double psnr(const Matrix& pred, const Matrix& truth, double peak);

/// Mean local SSIM of two single-channel images with an 11-tap Gaussian
/// window (sigma 1.5), C1 = (0.01 peak)^2, C2 = (0.03 peak)^2, evaluated
/// where the window fits entirely.
double ssim(const Matrix& pred, const Matrix& truth, double peak);

/// Channel-average SSIM for fields stored N x m over an h x w grid
/// (row-major positions).
double ssim_field(const Matrix& pred, const Matrix& truth, std::size_t height, std::size_t width,
                  double peak);

enum class W1Mode { exact_assignment, pooled1d };

/// Wasserstein-1 between two sample sets of m-dimensional points (rows).
/// exact_assignment: optimal matching under the Euclidean ground cost,
/// equal sizes up to 1024; pooled1d: sorted-difference distance on the
/// flattened scalars, any sizes.
double wasserstein1(const Matrix& a, const Matrix& b, W1Mode mode = W1Mode::exact_assignment);

/// Minimum-cost perfect matching of a square cost matrix; returns the
/// assigned column per row.
std::vector<std::size_t> solve_assignment(const Matrix& cost, double* total_cost = nullptr);

struct ReliabilityCurve {
    std::vector<double> levels;
    std::vector<double> coverage;
};

struct PceResult {
    double value = 0.0;
    ReliabilityCurve curve;
};

/// Probabilistic calibration error of order p: central equal-tailed
/// intervals from ensemble order statistics at `levels` uniform confidence
/// levels on (0,1); coverage counted per (position, variable) scalar.
PceResult pce(const pipeline::Ensemble& ensemble, const Matrix& truth, double p = 1.0,
              std::size_t levels = 99);

struct MomentBoundReport {
    double lhs_mean_gap = 0.0;   // |E T(xi) - T(E xi)|
    double rhs_mean_gap = 0.0;   // L * (E|xi - E xi|^k)^(1/k)
    bool mean_gap_ok = false;
    double lhs_moment = 0.0;     // E|T(xi) - E T(xi)|^k
    double rhs_moment = 0.0;     // (2L)^k * E|xi - E xi|^k
    bool moment_ok = false;
};

/// Empirical check of the two transported-moment inequalities at one
/// position. `transported_mean` is the forward transport of the source
/// sample mean; both sample sets are S x m with matched order.
MomentBoundReport check_moment_bounds(const Matrix& target_samples, const Matrix& source_samples,
                                      const std::vector<double>& transported_mean,
                                      double lipschitz, std::size_t order);

struct TailBoundPoint {
    double threshold = 0.0;
    double empirical = 0.0;
    double bound = 0.0;
    bool vacuous = false;   // bound >= 1
    bool flagged = false;   // empirical above a non-vacuous bound
};

struct TailBoundReport {
    std::vector<TailBoundPoint> points;
    std::size_t flagged_count() const;
};

/// Chebyshev-type bound on the sample mean: empirical frequency of
/// |mu_hat_N - mu| > t over the batches versus 4 L^2 Var / (N t^2).
/// `batch_samples` holds B*N rows of transported values; mu is the grand
/// mean over all rows.
TailBoundReport check_tail_bound(const Matrix& batch_samples, std::size_t batch_size,
                                 double lipschitz, double source_variance,
                                 const std::vector<double>& thresholds);

void write_reliability_csv(const ReliabilityCurve& curve, const std::string& path);

}  // namespace rpflow::metrics
