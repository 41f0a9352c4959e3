#pragma once

#include "rpflow/baselines.hpp"
#include "rpflow/cfm_train.hpp"
#include "rpflow/io.hpp"
#include "rpflow/metrics.hpp"
#include "rpflow/posterior_pipeline.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rpflow::experiments {

// ---------------------------------------------------------------------------
// Shared model plumbing.
// ---------------------------------------------------------------------------

struct RpFlowConfig {
    std::size_t frequencies = 256;
    double sigma_rff = 10.0;
    std::size_t width = 256;
    std::size_t hidden_layers = 4;
    std::size_t time_pairs = 8;
    cfm::TrainConfig train;
};

struct RpFlowModel {
    rff::RffBasis basis;
    rff::PositionEncoder encoder;
    net::TimeEmbedding time_embedding;
    net::Mlp net;
    std::optional<net::Mlp> ema;
    std::vector<double> loss_trace;
};

RpFlowModel train_rpflow(const cfm::FieldObservations& obs, const RpFlowConfig& cfg);

struct MetricRow {
    std::string method;
    std::string metric;
    double value = 0.0;
};

void write_metric_csv(const std::vector<MetricRow>& rows, const std::string& path);

// ---------------------------------------------------------------------------
// Source-lengthscale recovery on a constant-zero 1D target.
// ---------------------------------------------------------------------------

struct T0Config {
    std::size_t grid_points = 256;
    RpFlowConfig model;                     // sigma_rff overridden per sweep value
    std::size_t k_backward = 100;
    std::vector<double> mle_candidates;     // empty: library default grid
};

struct T0Row {
    double sigma_rff = 0.0;
    std::uint64_t seed = 0;
    double sigma_mle = 0.0;
};

std::vector<T0Row> run_t0_convergence(const std::vector<double>& sigma_rff_values,
                                      const std::vector<std::uint64_t>& seeds, const T0Config& cfg);
void write_t0_csv(const std::vector<T0Row>& rows, const std::string& path);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Discontinuous 1D target: continuous source versus a source glued from two
// independent processes at the split point.
// ---------------------------------------------------------------------------

struct DiscontinuityConfig {
    std::size_t grid_points = 256;
    double jump = 1.0;
    double split = 0.5;
    RpFlowConfig model;
    std::size_t prior_samples = 4;
    std::size_t k_forward = 50;
    double gap = 1.0 / 256.0;  // evaluation gap straddling the split
};

struct DiscontinuityRow {
    std::uint64_t seed = 0;
    double jump_continuous = 0.0;     // max prior-sample increment across the gap
    double jump_discontinuous = 0.0;
    double true_jump = 0.0;
};

std::vector<DiscontinuityRow> run_discontinuity(const std::vector<std::uint64_t>& seeds,
                                                const DiscontinuityConfig& cfg);
void write_discontinuity_csv(const std::vector<DiscontinuityRow>& rows, const std::string& path);

/// Prior ensemble whose source is glued from independent per-region draws of
/// the same basis (region indicator taken from the encoder split).
pipeline::Ensemble sample_prior_glued(const RpFlowModel& model, const Matrix& query,
                                      std::size_t count, std::uint64_t seed, std::size_t k);

// ---------------------------------------------------------------------------
// Image regression.
// ---------------------------------------------------------------------------

enum class ImageTask { upsample4x, random25 };

struct ImageRegressionConfig {
    RpFlowConfig model;
    double sigma_gp_posterior = 0.012;
    std::size_t ensemble_size = 24;
    std::size_t k_backward = 50;
    std::size_t k_forward = 12;
    double gpr_lengthscale = 0.03;
    double gpr_calibrated_lengthscale = 0.05;
    double gpr_calibrated_noise = 0.05;  // noise std, squared into Eq. 4
    std::size_t rff_net_iterations = 0;  // 0: reuse model.train.iterations
    std::uint64_t mask_seed = 17;
    std::uint64_t eval_seed = 23;
    bool run_baselines = true;
};

struct ImageRegressionResult {
    std::vector<MetricRow> rows;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    pipeline::Ensemble posterior;  // at the full grid
    pipeline::Ensemble prior;
};

std::vector<std::size_t> upsample_train_indices(std::size_t height, std::size_t width,
                                                std::size_t stride = 4);
std::vector<std::size_t> random_mask_indices(std::size_t total, double fraction,
                                             std::uint64_t seed);
std::vector<std::size_t> complement_indices(std::size_t total, const std::vector<std::size_t>& in);

ImageRegressionResult run_image_regression(const io::Image& image, ImageTask task,
                                           const ImageRegressionConfig& cfg);

// ---------------------------------------------------------------------------
// Multivariate trace interpolation on a synthetic volume.
// ---------------------------------------------------------------------------

struct VolumeSpec {
    std::size_t grid = 65;    // grid x grid positions
    std::size_t depth = 16;   // trace dimension m
    std::uint64_t seed = 0;
};

/// Layered synthetic volume: background sinusoid plus pulses at interfaces
/// whose depths are warped by smooth 2D fields; values normalized to [0,1].
cfm::FieldObservations make_synthetic_volume(const VolumeSpec& spec);

struct TraceConfig {
    VolumeSpec volume;
    std::size_t grid_every = 8;
    RpFlowConfig model;
    double sigma_gp_posterior = 0.1;
    std::size_t ensemble_size = 24;
    std::size_t k_backward = 50;
    std::size_t k_forward = 12;
    double gpr_lengthscale = 0.08;
    double gpr_calibrated_noise = 0.2;
    std::size_t w1_set_size = 512;
    std::uint64_t eval_seed = 29;
};

struct TraceResult {
    std::vector<MetricRow> rows;
    double train_reproduction_error = 0.0;  // max-abs of posterior samples at training traces
    double roundtrip = 0.0;
};

TraceResult run_trace_interpolation(const TraceConfig& cfg);

// ---------------------------------------------------------------------------
// Calibration sweep: PCE as a function of the training noise.
// ---------------------------------------------------------------------------

struct CalibrationSweepResult {
    double best_sigma = 0.0;
    std::vector<double> sigmas;
    std::vector<double> pce;
};

CalibrationSweepResult run_calibration_sweep(const std::vector<double>& sigma_grid,
                                             const std::function<double(double)>& pce_of_sigma);
void write_sweep_csv(const CalibrationSweepResult& r, const std::string& path);

}  // namespace rpflow::experiments
