#include "rpflow/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace rpflow::experiments {

RpFlowModel train_rpflow(const cfm::FieldObservations& obs, const RpFlowConfig& cfg) {
    RpFlowModel model;
    model.basis = rff::make_basis(cfg.train.seed ^ 0x5eedba5e5eedba5eULL, cfg.frequencies,
                                  obs.dim(), cfg.sigma_rff);
    model.encoder = rff::make_rff_encoder(model.basis);
    model.time_embedding.pairs = cfg.time_pairs;

    Rng init_rng(cfg.train.seed);
    net::Mlp net = net::init_mlp(
        init_rng, cfm::layer_dims(model.encoder, model.time_embedding, obs.channels(), cfg.width,
                                  cfg.hidden_layers));
    cfm::TrainResult result = cfm::train(obs, model.encoder, std::move(net), model.time_embedding,
                                         cfg.train);
    model.net = std::move(result.final_net);
    model.ema = std::move(result.ema);
    model.loss_trace = std::move(result.loss_trace);
    return model;
}

void write_metric_csv(const std::vector<MetricRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path);
    out << "method,metric,value\n";
    out.precision(17);
    for (const auto& r : rows) out << r.method << "," << r.metric << "," << r.value << "\n";
}

// ---------------------------------------------------------------------------
// t = 0 convergence
// ---------------------------------------------------------------------------

namespace {

Matrix grid_1d(std::size_t n) {
    Matrix x(n, 1);
    for (std::size_t i = 0; i < n; ++i)
        x(i, 0) = static_cast<double>(i) / static_cast<double>(n - 1);
    return x;
}

}  // namespace

std::vector<T0Row> run_t0_convergence(const std::vector<double>& sigma_rff_values,
                                      const std::vector<std::uint64_t>& seeds, const T0Config& cfg) {
    const Matrix x = grid_1d(cfg.grid_points);
    const Matrix zeros(cfg.grid_points, 1);
    const std::vector<double> candidates =
        cfg.mle_candidates.empty() ? gp::log_spaced_candidates() : cfg.mle_candidates;

    std::vector<T0Row> rows;
    for (double sigma_rff : sigma_rff_values)
        for (std::uint64_t seed : seeds) {
            RpFlowConfig mc = cfg.model;
            mc.sigma_rff = sigma_rff;
            mc.train.seed = seed;
            cfm::FieldObservations obs{x, zeros, 1.0};
            RpFlowModel model = train_rpflow(obs, mc);
            // EMA weights when available: the noise-averaged inverse is the
            // object of study here
            const net::Mlp& eval_net = model.ema ? *model.ema : model.net;
            Matrix source = ode::integrate(eval_net, model.time_embedding, model.encoder, x, zeros,
                                           {cfg.k_backward, ode::Direction::backward});
            T0Row row;
            row.sigma_rff = sigma_rff;
            row.seed = seed;
            row.sigma_mle = gp::lengthscale_mle(x, source, candidates);
            rows.push_back(row);
        }
    return rows;
}

void write_t0_csv(const std::vector<T0Row>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path);
    out << "sigma_rff,seed,sigma_mle\n";
    out.precision(17);
    for (const auto& r : rows) out << r.sigma_rff << "," << r.seed << "," << r.sigma_mle << "\n";
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidParam("spearman: bad input sizes");
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> rx = ranks(x);
    const std::vector<double> ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Discontinuity
// ---------------------------------------------------------------------------

pipeline::Ensemble sample_prior_glued(const RpFlowModel& model, const Matrix& query,
                                      std::size_t count, std::uint64_t seed, std::size_t k) {
    const std::size_t m = model.net.output_dim();
    const double split = model.encoder.region_split;
    auto source = [&](Rng& rng) {
        Matrix w_left = rng.normal_matrix(model.basis.embed_dim(), m);
        Matrix w_right = rng.normal_matrix(model.basis.embed_dim(), m);
        Matrix gamma = rff::embed(model.basis, query);
        Matrix left = matmul(gamma, w_left);
        Matrix right = matmul(gamma, w_right);
        Matrix out(query.rows(), m);
        for (std::size_t i = 0; i < query.rows(); ++i) {
            const bool r = query(i, 0) >= split;
            for (std::size_t c = 0; c < m; ++c) out(i, c) = r ? right(i, c) : left(i, c);
        }
        return out;
    };
    return pipeline::sample_prior_with_source(model.net, model.time_embedding, model.encoder, query,
                                              count, seed, k, source);
}

std::vector<DiscontinuityRow> run_discontinuity(const std::vector<std::uint64_t>& seeds,
                                                const DiscontinuityConfig& cfg) {
    const Matrix x = grid_1d(cfg.grid_points);
    Matrix values(cfg.grid_points, 1);
    for (std::size_t i = 0; i < cfg.grid_points; ++i) {
        const double xi = x(i, 0);
        values(i, 0) = 0.25 * std::sin(2.0 * std::numbers::pi * xi) +
                       (xi >= cfg.split ? cfg.jump : 0.0);
    }
    cfm::FieldObservations obs{x, values, 1.0};

    Matrix probe(2, 1);
    probe(0, 0) = cfg.split - 0.5 * cfg.gap;
    probe(1, 0) = cfg.split + 0.5 * cfg.gap;

    std::vector<DiscontinuityRow> rows;
    for (std::uint64_t seed : seeds) {
        DiscontinuityRow row;
        row.seed = seed;
        row.true_jump = cfg.jump;

        RpFlowConfig mc = cfg.model;
        mc.train.seed = seed;

        // continuous source: plain RFF conditioning
        RpFlowModel cont = train_rpflow(obs, mc);
        pipeline::Ensemble prior_cont =
            pipeline::sample_prior(cont.net, cont.time_embedding, cont.basis, probe,
                                   cfg.prior_samples, seed ^ 0xabcdULL, cfg.k_forward);
        for (const auto& s : prior_cont.samples)
            row.jump_continuous = std::max(row.jump_continuous, std::abs(s(1, 0) - s(0, 0)));

        // discontinuous source: region indicator plus independently glued draws
        RpFlowModel disc = cont;
        {
            RpFlowConfig dc = mc;
            cfm::FieldObservations dobs = obs;
            disc.basis = rff::make_basis(dc.train.seed ^ 0x5eedba5e5eedba5eULL, dc.frequencies,
                                         obs.dim(), dc.sigma_rff);
            disc.encoder = rff::make_region_encoder(disc.basis, cfg.split);
            Rng init_rng(dc.train.seed);
            net::Mlp net = net::init_mlp(
                init_rng, cfm::layer_dims(disc.encoder, disc.time_embedding, obs.channels(),
                                          dc.width, dc.hidden_layers));
            cfm::TrainResult res = cfm::train(dobs, disc.encoder, std::move(net),
                                              disc.time_embedding, dc.train);
            disc.net = std::move(res.final_net);
        }
        pipeline::Ensemble prior_disc =
            sample_prior_glued(disc, probe, cfg.prior_samples, seed ^ 0xdcbaULL, cfg.k_forward);
        for (const auto& s : prior_disc.samples)
            row.jump_discontinuous = std::max(row.jump_discontinuous, std::abs(s(1, 0) - s(0, 0)));

        rows.push_back(row);
    }
    return rows;
}

void write_discontinuity_csv(const std::vector<DiscontinuityRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path);
    out << "seed,jump_continuous,jump_discontinuous,true_jump\n";
    out.precision(17);
    for (const auto& r : rows)
        out << r.seed << "," << r.jump_continuous << "," << r.jump_discontinuous << ","
            << r.true_jump << "\n";
}

// ---------------------------------------------------------------------------
// Image regression
// ---------------------------------------------------------------------------

std::vector<std::size_t> upsample_train_indices(std::size_t height, std::size_t width,
                                                std::size_t stride) {
    std::vector<std::size_t> idx;
    for (std::size_t r = 0; r < height; r += stride)
        for (std::size_t c = 0; c < width; c += stride) idx.push_back(r * width + c);
    return idx;
}

std::vector<std::size_t> random_mask_indices(std::size_t total, double fraction,
                                             std::uint64_t seed) {
    std::vector<std::size_t> all(total);
    std::iota(all.begin(), all.end(), 0);
    Rng rng(seed);
    const auto keep = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total)));
    for (std::size_t i = 0; i < keep; ++i) {
        const std::size_t j = i + rng.uniform_index(total - i);
        std::swap(all[i], all[j]);
    }
    all.resize(keep);
    std::sort(all.begin(), all.end());
    return all;
}

std::vector<std::size_t> complement_indices(std::size_t total, const std::vector<std::size_t>& in) {
    std::vector<char> mask(total, 0);
    for (std::size_t i : in) mask[i] = 1;
    std::vector<std::size_t> out;
    out.reserve(total - in.size());
    for (std::size_t i = 0; i < total; ++i)
        if (!mask[i]) out.push_back(i);
    return out;
}

namespace {

double mean_sample_psnr(const pipeline::Ensemble& e, const std::vector<std::size_t>& idx,
                        const Matrix& truth_rows, double peak) {
    double acc = 0.0;
    for (const auto& s : e.samples) acc += metrics::psnr(gather_rows(s, idx), truth_rows, peak);
    return acc / static_cast<double>(e.count());
}

pipeline::Ensemble gather_ensemble(const pipeline::Ensemble& e,
                                   const std::vector<std::size_t>& idx) {
    pipeline::Ensemble out;
    out.positions = gather_rows(e.positions, idx);
    out.provenance = e.provenance;
    out.seed = e.seed;
    out.joint_block = e.joint_block;
    for (const auto& s : e.samples) out.samples.push_back(gather_rows(s, idx));
    return out;
}

/// Independent per-point Gaussian ensemble from marginal mean/variance;
/// coverage statistics only depend on the marginals.
pipeline::Ensemble gaussian_marginal_ensemble(const Matrix& mean, const Matrix& variance,
                                              const Matrix& positions, std::size_t count,
                                              std::uint64_t seed) {
    pipeline::Ensemble e;
    e.positions = positions;
    e.seed = seed;
    for (std::size_t s = 0; s < count; ++s) {
        Rng rng = Rng::derive(seed, s);
        Matrix draw(mean.rows(), mean.cols());
        for (std::size_t i = 0; i < mean.rows(); ++i) {
            const double sd = std::sqrt(std::max(0.0, variance(i, 0)));
            for (std::size_t c = 0; c < mean.cols(); ++c)
                draw(i, c) = mean(i, c) + sd * rng.normal();
        }
        e.samples.push_back(std::move(draw));
    }
    return e;
}

}  // namespace

ImageRegressionResult run_image_regression(const io::Image& image, ImageTask task,
                                           const ImageRegressionConfig& cfg) {
    const std::size_t n = image.height * image.width;
    const Matrix grid = io::image_grid(image.height, image.width);

    ImageRegressionResult result;
    result.train_indices = task == ImageTask::upsample4x
                               ? upsample_train_indices(image.height, image.width)
                               : random_mask_indices(n, 0.25, cfg.mask_seed);
    result.test_indices = complement_indices(n, result.train_indices);

    cfm::FieldObservations obs;
    obs.positions = gather_rows(grid, result.train_indices);
    obs.values = gather_rows(image.values, result.train_indices);
    obs.peak = 1.0;

    const Matrix truth_test = gather_rows(image.values, result.test_indices);

    // RP Flow
    RpFlowModel model = train_rpflow(obs, cfg.model);
    pipeline::PosteriorConfig pc;
    pc.sigma_gp_posterior = cfg.sigma_gp_posterior;
    pc.k_backward = cfg.k_backward;
    pc.k_forward = cfg.k_forward;
    pc.ensemble_size = cfg.ensemble_size;
    pc.seed = cfg.eval_seed;
    result.posterior = pipeline::sample_posterior(model.net, model.time_embedding, model.encoder,
                                                  obs, grid, pc);
    result.prior = pipeline::sample_prior(model.net, model.time_embedding, model.basis, grid,
                                          cfg.ensemble_size, cfg.eval_seed ^ 0x9999ULL,
                                          cfg.k_forward);

    pipeline::Summary post_summary = pipeline::summarize(result.posterior, {});
    auto add = [&](const std::string& method, const std::string& metric, double value) {
        result.rows.push_back({method, metric, value});
    };

    add("rpflow", "psnr_posterior_mean",
        metrics::psnr(gather_rows(post_summary.mean, result.test_indices), truth_test, 1.0));
    add("rpflow", "psnr_posterior_sample",
        mean_sample_psnr(result.posterior, result.test_indices, truth_test, 1.0));
    add("rpflow", "psnr_prior_sample",
        mean_sample_psnr(result.prior, result.test_indices, truth_test, 1.0));
    add("rpflow", "ssim",
        metrics::ssim_field(post_summary.mean, image.values, image.height, image.width, 1.0));
    add("rpflow", "pce_prior",
        metrics::pce(gather_ensemble(result.prior, result.test_indices), truth_test).value);
    add("rpflow", "pce_posterior",
        metrics::pce(gather_ensemble(result.posterior, result.test_indices), truth_test).value);

    if (!cfg.run_baselines) return result;

    // RFF network with twice the embedding frequencies
    baselines::RffNetConfig nc;
    nc.width = cfg.model.width;
    nc.hidden_layers = cfg.model.hidden_layers;
    nc.iterations = cfg.rff_net_iterations ? cfg.rff_net_iterations : cfg.model.train.iterations;
    nc.batch_size = cfg.model.train.batch_size;
    nc.lr = cfg.model.train.lr;
    nc.seed = cfg.model.train.seed;
    rff::RffBasis net_basis = rff::make_basis(cfg.model.train.seed ^ 0x0fffULL,
                                              2 * cfg.model.frequencies, 2, cfg.model.sigma_rff);
    baselines::RffNetModel rffnet = baselines::train_rff_net(obs, net_basis, nc);
    Matrix rff_pred = baselines::rff_net_predict(rffnet, grid);
    add("rff_net", "psnr",
        metrics::psnr(gather_rows(rff_pred, result.test_indices), truth_test, 1.0));
    add("rff_net", "ssim",
        metrics::ssim_field(rff_pred, image.values, image.height, image.width, 1.0));

    // GPR baselines
    auto run_gpr = [&](const std::string& name, double lengthscale, double noise_std) {
        rff::KernelSpec spec{lengthscale, noise_std * noise_std};
        baselines::GprPrediction pred = baselines::gpr_predict(obs, spec, grid);
        add(name, "psnr", metrics::psnr(gather_rows(pred.mean, result.test_indices), truth_test, 1.0));
        add(name, "ssim",
            metrics::ssim_field(pred.mean, image.values, image.height, image.width, 1.0));
        pipeline::Ensemble samples =
            gaussian_marginal_ensemble(gather_rows(pred.mean, result.test_indices),
                                       gather_rows(pred.variance, result.test_indices),
                                       gather_rows(grid, result.test_indices), cfg.ensemble_size,
                                       cfg.eval_seed ^ 0x77ULL);
        add(name, "pce", metrics::pce(samples, truth_test).value);
    };
    run_gpr("gpr_noiseless", cfg.gpr_lengthscale, 0.0);
    run_gpr("gpr_calibrated", cfg.gpr_calibrated_lengthscale, cfg.gpr_calibrated_noise);

    return result;
}

// ---------------------------------------------------------------------------
// Trace interpolation
// ---------------------------------------------------------------------------

cfm::FieldObservations make_synthetic_volume(const VolumeSpec& spec) {
    const std::size_t g = spec.grid;
    const std::size_t m = spec.depth;
    const std::size_t n = g * g;

    Matrix positions(n, 2);
    for (std::size_t r = 0; r < g; ++r)
        for (std::size_t c = 0; c < g; ++c) {
            positions(r * g + c, 0) = static_cast<double>(c) / static_cast<double>(g - 1);
            positions(r * g + c, 1) = static_cast<double>(r) / static_cast<double>(g - 1);
        }

    // smooth warp fields for interface depths
    Rng rng(spec.seed ^ 0x7ace5eedULL);
    rff::RffBasis warp_basis = rff::make_basis(rng.next_u64(), 64, 2, 2.2);
    constexpr std::size_t kLayers = 3;
    Matrix warp = gp::sample_prior_rff(rng, warp_basis, positions, kLayers).values;

    const double base_depth[kLayers] = {0.25, 0.55, 0.8};
    const double warp_amp[kLayers] = {0.1, 0.13, 0.08};
    const double pulse_amp[kLayers] = {0.9, -0.7, 0.6};
    const double pulse_width = 0.045;

    Matrix values(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double depth = static_cast<double>(j) / static_cast<double>(m - 1);
            double v = 0.15 * std::sin(2.0 * std::numbers::pi * 2.0 * depth);
            for (std::size_t l = 0; l < kLayers; ++l) {
                const double h = base_depth[l] + warp_amp[l] * warp(i, l);
                const double u = (depth - h) / pulse_width;
                v += pulse_amp[l] * (1.0 - 2.0 * u * u) * std::exp(-u * u);  // Ricker pulse
            }
            values(i, j) = v;
        }

    // normalize into [0.05, 0.95]
    double lo = values.data()[0], hi = values.data()[0];
    for (std::size_t i = 0; i < values.size(); ++i) {
        lo = std::min(lo, values.data()[i]);
        hi = std::max(hi, values.data()[i]);
    }
    const double span = hi - lo;
    for (std::size_t i = 0; i < values.size(); ++i)
        values.data()[i] = 0.05 + 0.9 * (values.data()[i] - lo) / span;

    return cfm::FieldObservations{positions, values, 1.0};
}

TraceResult run_trace_interpolation(const TraceConfig& cfg) {
    const cfm::FieldObservations truth = make_synthetic_volume(cfg.volume);
    const std::size_t g = cfg.volume.grid;

    std::vector<std::size_t> train_idx;
    for (std::size_t r = 0; r < g; r += cfg.grid_every)
        for (std::size_t c = 0; c < g; c += cfg.grid_every) train_idx.push_back(r * g + c);
    std::vector<std::size_t> test_idx = complement_indices(g * g, train_idx);

    cfm::FieldObservations obs;
    obs.positions = gather_rows(truth.positions, train_idx);
    obs.values = gather_rows(truth.values, train_idx);
    obs.peak = 1.0;

    const Matrix truth_test = gather_rows(truth.values, test_idx);

    TraceResult result;
    auto add = [&](const std::string& method, const std::string& metric, double value) {
        result.rows.push_back({method, metric, value});
    };

    RpFlowModel model = train_rpflow(obs, cfg.model);
    const net::Mlp& eval_net = model.ema ? *model.ema : model.net;

    {
        Rng rt_rng(cfg.eval_seed);
        Matrix z = rt_rng.normal_matrix(obs.count(), obs.channels());
        result.roundtrip = ode::roundtrip_error(eval_net, model.time_embedding, model.encoder,
                                                obs.positions, z, 100);
    }

    pipeline::PosteriorConfig pc;
    pc.sigma_gp_posterior = cfg.sigma_gp_posterior;
    pc.k_backward = cfg.k_backward;
    pc.k_forward = cfg.k_forward;
    pc.ensemble_size = cfg.ensemble_size;
    pc.seed = cfg.eval_seed;
    pipeline::Ensemble posterior = pipeline::sample_posterior(
        eval_net, model.time_embedding, model.encoder, obs, truth.positions, pc);

    pipeline::Summary summary = pipeline::summarize(posterior, {});
    add("rpflow", "psnr_posterior_mean",
        metrics::psnr(gather_rows(summary.mean, test_idx), truth_test, 1.0));
    add("rpflow", "psnr_posterior_sample",
        mean_sample_psnr(posterior, test_idx, truth_test, 1.0));
    add("rpflow", "ssim",
        metrics::ssim_field(summary.mean, truth.values, g, g, 1.0));
    add("rpflow", "pce_posterior",
        metrics::pce(gather_ensemble(posterior, test_idx), truth_test).value);

    // posterior reproduction of the training traces (criterion-5 style)
    double repro = 0.0;
    for (const auto& s : posterior.samples)
        repro = std::max(repro, sub(gather_rows(s, train_idx), obs.values).max_abs());
    result.train_reproduction_error = repro;
    add("rpflow", "train_reproduction_maxabs", repro);
    add("rpflow", "roundtrip_k100", result.roundtrip);

    // W1 between randomly-sampled held-out truth traces and posterior-sample traces
    {
        Rng w1_rng(cfg.eval_seed ^ 0x1357ULL);
        const std::size_t set = std::min(cfg.w1_set_size, test_idx.size());
        std::vector<std::size_t> ta(set), tb(set);
        for (std::size_t i = 0; i < set; ++i) ta[i] = test_idx[w1_rng.uniform_index(test_idx.size())];
        for (std::size_t i = 0; i < set; ++i) tb[i] = test_idx[w1_rng.uniform_index(test_idx.size())];
        Matrix pred_set(set, truth.channels());
        for (std::size_t i = 0; i < set; ++i) {
            const auto s = w1_rng.uniform_index(posterior.samples.size());
            std::copy(posterior.samples[s].row_ptr(tb[i]),
                      posterior.samples[s].row_ptr(tb[i]) + truth.channels(), pred_set.row_ptr(i));
        }
        add("rpflow", "w1_exact",
            metrics::wasserstein1(gather_rows(truth.values, ta), pred_set,
                                  metrics::W1Mode::exact_assignment));
    }

    // GPR baselines, per-variable with a shared factor
    auto run_gpr = [&](const std::string& name, double lengthscale, double noise_std) {
        rff::KernelSpec spec{lengthscale, noise_std * noise_std};
        baselines::GprPrediction pred = baselines::gpr_predict(obs, spec, truth.positions);
        add(name, "psnr", metrics::psnr(gather_rows(pred.mean, test_idx), truth_test, 1.0));
        add(name, "ssim", metrics::ssim_field(pred.mean, truth.values, g, g, 1.0));
        pipeline::Ensemble samples = gaussian_marginal_ensemble(
            gather_rows(pred.mean, test_idx), gather_rows(pred.variance, test_idx),
            gather_rows(truth.positions, test_idx), cfg.ensemble_size, cfg.eval_seed ^ 0x88ULL);
        add(name, "pce", metrics::pce(samples, truth_test).value);
    };
    run_gpr("gpr_noiseless", cfg.gpr_lengthscale, 0.0);
    run_gpr("gpr_calibrated", cfg.gpr_lengthscale, cfg.gpr_calibrated_noise);

    return result;
}

// ---------------------------------------------------------------------------
// Calibration sweep
// ---------------------------------------------------------------------------

CalibrationSweepResult run_calibration_sweep(const std::vector<double>& sigma_grid,
                                             const std::function<double(double)>& pce_of_sigma) {
    if (sigma_grid.empty()) throw InvalidParam("run_calibration_sweep: empty grid");
    CalibrationSweepResult r;
    r.sigmas = sigma_grid;
    double best = 0.0;
    for (std::size_t i = 0; i < sigma_grid.size(); ++i) {
        const double p = pce_of_sigma(sigma_grid[i]);
        r.pce.push_back(p);
        if (i == 0 || p < best) {
            best = p;
            r.best_sigma = sigma_grid[i];
        }
    }
    return r;
}

void write_sweep_csv(const CalibrationSweepResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path);
    out << "sigma_noise,pce\n";
    out.precision(17);
    for (std::size_t i = 0; i < r.sigmas.size(); ++i) out << r.sigmas[i] << "," << r.pce[i] << "\n";
}

}  // namespace rpflow::experiments
