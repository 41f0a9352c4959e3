// rpflow command line: train / sample / eval / experiment / inspect.

#include "rpflow/baselines.hpp"
#include "rpflow/experiments.hpp"
#include "rpflow/io.hpp"
#include "rpflow/metrics.hpp"
#include "rpflow/posterior_pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>

namespace fs = std::filesystem;
using namespace rpflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUserError = 1;
constexpr int kExitInternalError = 2;

std::string output_root() {
    const char* env = std::getenv("RPFLOW_OUTPUT_DIR");
    return env ? std::string(env) : std::string(".");
}

std::string resolve_out(const std::string& path) {
    if (path.empty()) return output_root();
    fs::path p(path);
    if (p.is_absolute()) return path;
    return (fs::path(output_root()) / p).string();
}

cfm::FieldObservations load_observations(const std::string& path) {
    if (path.ends_with(".pgm") || path.ends_with(".ppm")) {
        io::Image img = io::load_image(path);
        cfm::FieldObservations obs;
        obs.positions = io::image_grid(img.height, img.width);
        obs.values = img.values;
        obs.peak = 1.0;
        return obs;
    }
    return io::load_field_csv(path);
}

const std::set<std::string> kTrainKeys = {
    "data",        "out",      "frequencies", "sigma_rff", "width",      "hidden_layers",
    "time_pairs",  "iterations", "batch_size", "lr",       "sigma_noise", "warmup_steps",
    "ema_decay",   "seed"};

int cmd_train(const std::string& config_path, const io::Config& overrides) {
    io::Config cfg = config_path.empty() ? io::Config() : io::Config::from_file(config_path);
    // command-line flags win over file values
    for (const std::string& key : kTrainKeys)
        if (overrides.has(key)) cfg.set(key, overrides.get_string(key));
    cfg.reject_unknown(kTrainKeys);

    const std::string data = cfg.get_string("data");
    if (!fs::exists(data)) throw IoError("data file not found: " + data);
    cfm::FieldObservations obs = load_observations(data);

    experiments::RpFlowConfig mc;
    mc.frequencies = static_cast<std::size_t>(cfg.get_int("frequencies", 256));
    mc.sigma_rff = cfg.get_double("sigma_rff", 10.0);
    mc.width = static_cast<std::size_t>(cfg.get_int("width", 256));
    mc.hidden_layers = static_cast<std::size_t>(cfg.get_int("hidden_layers", 4));
    mc.time_pairs = static_cast<std::size_t>(cfg.get_int("time_pairs", 8));
    mc.train.iterations = static_cast<std::size_t>(cfg.get_int("iterations", 10000));
    mc.train.batch_size = static_cast<std::size_t>(cfg.get_int("batch_size", 128));
    mc.train.lr = cfg.get_double("lr", 1e-3);
    mc.train.sigma_noise = cfg.get_double("sigma_noise", 0.0);
    mc.train.warmup_steps = static_cast<std::size_t>(cfg.get_int("warmup_steps", 0));
    if (cfg.has("ema_decay")) mc.train.ema_decay = cfg.get_double("ema_decay");
    mc.train.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));

    experiments::RpFlowModel model = experiments::train_rpflow(obs, mc);

    const fs::path out(resolve_out(cfg.get_string("out", "model.ckpt")));
    if (out.has_parent_path()) fs::create_directories(out.parent_path());

    io::Checkpoint ckpt;
    ckpt.encoder = model.encoder;
    ckpt.time_embedding = model.time_embedding;
    ckpt.net = model.net;
    ckpt.train_config = mc.train;
    if (model.ema) {
        ckpt.ema_shadow = model.ema->layers;
        ckpt.ema_decay = mc.train.ema_decay.value_or(0.0);
    }
    io::save_checkpoint(ckpt, out.string());
    cfm::write_loss_csv(model.loss_trace, out.string() + ".loss.csv");
    std::cout << "wrote " << out.string() << " (" << model.net.param_count() << " parameters)\n";
    return kExitOk;
}

int cmd_sample(const std::string& ckpt_path, const std::string& mode, const std::string& data,
               const std::string& query_csv, std::size_t grid_h, std::size_t grid_w,
               std::size_t samples, std::size_t k_backward, std::size_t k_forward,
               double sigma_gp_posterior, std::uint64_t seed, const std::string& out_path,
               bool use_ema) {
    io::Checkpoint ckpt = io::load_checkpoint(ckpt_path);
    net::Mlp net = ckpt.net;
    if (use_ema) {
        if (!ckpt.ema_shadow) throw InvalidParam("checkpoint has no EMA block");
        net.layers = *ckpt.ema_shadow;
    }

    Matrix query;
    if (!query_csv.empty()) {
        query = io::load_field_csv(query_csv).positions;
    } else if (grid_h > 0 && grid_w > 0) {
        query = io::image_grid(grid_h, grid_w);
    } else {
        throw InvalidParam("sample: provide --query-csv or --grid H W");
    }

    pipeline::Ensemble ensemble;
    if (mode == "prior") {
        if (sigma_gp_posterior > 0.0)
            std::cerr << "warning: --sigma-gp-posterior is ignored in prior mode\n";
        if (ckpt.encoder.kind != rff::EncoderKind::rff)
            throw InvalidParam("prior sampling needs an RFF checkpoint");
        ensemble = pipeline::sample_prior(net, ckpt.time_embedding, ckpt.encoder.basis, query,
                                          samples, seed, k_forward);
    } else if (mode == "posterior") {
        if (data.empty()) throw InvalidParam("posterior mode needs --data observations");
        cfm::FieldObservations obs = load_observations(data);
        pipeline::PosteriorConfig pc;
        pc.sigma_gp_posterior = sigma_gp_posterior > 0.0 ? sigma_gp_posterior : 0.008;
        pc.k_backward = k_backward;
        pc.k_forward = k_forward;
        pc.ensemble_size = samples;
        pc.seed = seed;
        ensemble = pipeline::sample_posterior(net, ckpt.time_embedding, ckpt.encoder, obs, query, pc);
    } else {
        throw InvalidParam("sample: mode must be prior or posterior");
    }

    const fs::path out(resolve_out(out_path));
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    io::save_ensemble(ensemble, out.string());
    if (samples >= 2) io::save_summary_csv(ensemble, out.string() + ".summary.csv");

    if (grid_h > 0 && grid_w > 0 &&
        (ensemble.channels() == 1 || ensemble.channels() == 3) && samples >= 2) {
        pipeline::Summary s = pipeline::summarize(ensemble, {});
        io::Image mean_img{grid_h, grid_w, ensemble.channels(), 255, s.mean};
        io::save_image(mean_img, out.string() + ".mean.pgm");
        io::Image std_img{grid_h, grid_w, ensemble.channels(), 255, s.stdev};
        io::save_image(std_img, out.string() + ".std.pgm");
    }
    std::cout << "wrote " << out.string() << " (" << ensemble.count() << " samples at "
              << ensemble.points() << " positions)\n";
    return kExitOk;
}

int cmd_eval(const std::string& ensemble_path, const std::string& truth_path,
             const std::string& metric_list, const std::string& out_path) {
    pipeline::Ensemble ensemble = io::load_ensemble(ensemble_path);
    cfm::FieldObservations truth = load_observations(truth_path);
    if (truth.values.rows() != ensemble.points() || truth.values.cols() != ensemble.channels())
        throw DimensionMismatch("eval: ensemble and truth shapes disagree");

    std::vector<std::string> wanted;
    std::stringstream ss(metric_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) wanted.push_back(item);
    }

    pipeline::Summary s = pipeline::summarize(ensemble, {});
    std::vector<experiments::MetricRow> rows;
    for (const std::string& metric : wanted) {
        if (metric == "psnr") {
            rows.push_back({"ensemble_mean", "psnr", metrics::psnr(s.mean, truth.values, 1.0)});
        } else if (metric == "ssim") {
            const auto side = static_cast<std::size_t>(std::llround(std::sqrt(
                static_cast<double>(ensemble.points()))));
            if (side * side != ensemble.points())
                throw InvalidParam("eval: ssim needs a square grid ensemble");
            rows.push_back({"ensemble_mean", "ssim",
                            metrics::ssim_field(s.mean, truth.values, side, side, 1.0)});
        } else if (metric == "w1") {
            Matrix pooled(ensemble.count() * ensemble.points(), ensemble.channels());
            for (std::size_t i = 0; i < ensemble.count(); ++i)
                std::copy(ensemble.samples[i].data(),
                          ensemble.samples[i].data() + ensemble.samples[i].size(),
                          pooled.data() + i * ensemble.samples[i].size());
            rows.push_back({"ensemble", "w1_pooled1d",
                            metrics::wasserstein1(pooled, truth.values, metrics::W1Mode::pooled1d)});
        } else if (metric == "pce") {
            rows.push_back({"ensemble", "pce", metrics::pce(ensemble, truth.values).value});
        } else {
            throw InvalidParam("eval: unknown metric '" + metric + "'");
        }
    }

    const fs::path out(resolve_out(out_path));
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    experiments::write_metric_csv(rows, out.string());
    for (const auto& r : rows) std::cout << r.method << " " << r.metric << " = " << r.value << "\n";
    return kExitOk;
}

const std::set<std::string> kExperimentNames = {"t0-convergence", "discontinuity",
                                                "image-regression", "trace-interpolation",
                                                "calibration-sweep"};

int cmd_experiment(const std::string& name, const std::string& config_path,
                   const std::string& out_dir, bool list) {
    if (list) {
        for (const auto& n : kExperimentNames) std::cout << n << "\n";
        return kExitOk;
    }
    if (!kExperimentNames.count(name)) {
        std::cerr << "unknown experiment '" << name << "'; available:\n";
        for (const auto& n : kExperimentNames) std::cerr << "  " << n << "\n";
        return kExitUserError;
    }
    io::Config cfg = config_path.empty() ? io::Config() : io::Config::from_file(config_path);
    const fs::path out(resolve_out(out_dir));
    fs::create_directories(out);

    const auto seed0 = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    const auto seeds_n = static_cast<std::size_t>(cfg.get_int("seeds", 3));
    std::vector<std::uint64_t> seeds(seeds_n);
    for (std::size_t i = 0; i < seeds_n; ++i) seeds[i] = seed0 + i;

    if (name == "t0-convergence") {
        experiments::T0Config tc;
        tc.model.frequencies = static_cast<std::size_t>(cfg.get_int("frequencies", 256));
        tc.model.width = static_cast<std::size_t>(cfg.get_int("width", 128));
        tc.model.train.iterations = static_cast<std::size_t>(cfg.get_int("iterations", 3000));
        tc.model.train.batch_size = static_cast<std::size_t>(cfg.get_int("batch_size", 64));
        std::vector<double> sigmas = {10.0, 20.0, 40.0, 80.0};
        auto rows = experiments::run_t0_convergence(sigmas, seeds, tc);
        experiments::write_t0_csv(rows, (out / "t0_convergence.csv").string());
    } else if (name == "discontinuity") {
        experiments::DiscontinuityConfig dc;
        dc.model.frequencies = static_cast<std::size_t>(cfg.get_int("frequencies", 128));
        dc.model.sigma_rff = cfg.get_double("sigma_rff", 10.0);
        dc.model.width = static_cast<std::size_t>(cfg.get_int("width", 128));
        dc.model.train.iterations = static_cast<std::size_t>(cfg.get_int("iterations", 2500));
        dc.model.train.batch_size = static_cast<std::size_t>(cfg.get_int("batch_size", 64));
        auto rows = experiments::run_discontinuity(seeds, dc);
        experiments::write_discontinuity_csv(rows, (out / "discontinuity.csv").string());
    } else if (name == "image-regression") {
        const std::string image_path = cfg.get_string("image");
        io::Image img = io::load_image(image_path);
        experiments::ImageRegressionConfig ic;
        ic.model.frequencies = static_cast<std::size_t>(cfg.get_int("frequencies", 128));
        ic.model.sigma_rff = cfg.get_double("sigma_rff", 10.0);
        ic.model.width = static_cast<std::size_t>(cfg.get_int("width", 128));
        ic.model.train.iterations = static_cast<std::size_t>(cfg.get_int("iterations", 3000));
        ic.model.train.sigma_noise = cfg.get_double("sigma_noise", 0.0);
        ic.model.train.seed = seed0;
        ic.sigma_gp_posterior = cfg.get_double("sigma_gp_posterior", 0.012);
        const std::string task = cfg.get_string("task", "upsample4x");
        auto res = experiments::run_image_regression(
            img, task == "random25" ? experiments::ImageTask::random25
                                    : experiments::ImageTask::upsample4x, ic);
        experiments::write_metric_csv(res.rows, (out / "image_metrics.csv").string());
        io::save_ensemble(res.posterior, (out / "posterior.ens").string());
    } else if (name == "trace-interpolation") {
        experiments::TraceConfig tc;
        tc.volume.seed = seed0;
        tc.volume.grid = static_cast<std::size_t>(cfg.get_int("grid", 65));
        tc.volume.depth = static_cast<std::size_t>(cfg.get_int("depth", 16));
        tc.grid_every = static_cast<std::size_t>(cfg.get_int("grid_every", 8));
        tc.model.frequencies = static_cast<std::size_t>(cfg.get_int("frequencies", 64));
        tc.model.sigma_rff = cfg.get_double("sigma_rff", 6.0);
        tc.model.width = static_cast<std::size_t>(cfg.get_int("width", 192));
        tc.model.train.iterations = static_cast<std::size_t>(cfg.get_int("iterations", 4000));
        tc.model.train.seed = seed0;
        auto res = experiments::run_trace_interpolation(tc);
        experiments::write_metric_csv(res.rows, (out / "trace_metrics.csv").string());
    } else if (name == "calibration-sweep") {
        // sweep a synthetic image task over sigma_noise
        const std::string image_path = cfg.get_string("image");
        io::Image img = io::load_image(image_path);
        std::vector<double> grid = {0.0, 0.03, 0.06, 0.12};
        experiments::ImageRegressionConfig ic;
        ic.model.frequencies = static_cast<std::size_t>(cfg.get_int("frequencies", 128));
        ic.model.width = static_cast<std::size_t>(cfg.get_int("width", 128));
        ic.model.train.iterations = static_cast<std::size_t>(cfg.get_int("iterations", 2500));
        ic.model.train.seed = seed0;
        ic.run_baselines = false;
        auto result = experiments::run_calibration_sweep(grid, [&](double sigma) {
            experiments::ImageRegressionConfig c = ic;
            c.model.train.sigma_noise = sigma;
            auto res = experiments::run_image_regression(img, experiments::ImageTask::upsample4x, c);
            for (const auto& row : res.rows)
                if (row.method == "rpflow" && row.metric == "pce_prior") return row.value;
            return 1.0;
        });
        experiments::write_sweep_csv(result, (out / "calibration_sweep.csv").string());
    }
    std::cout << "experiment '" << name << "' wrote outputs under " << out.string() << "\n";
    return kExitOk;
}

int cmd_inspect(const std::string& path) {
    if (path.ends_with(".ens")) {
        pipeline::Ensemble e = io::load_ensemble(path);
        std::cout << "ensemble: S=" << e.count() << " N=" << e.points() << " m=" << e.channels()
                  << " d=" << e.positions.cols() << " provenance="
                  << (e.provenance == pipeline::Provenance::prior ? "prior" : "posterior")
                  << " seed=" << e.seed << " joint_block=" << e.joint_block << "\n";
        return kExitOk;
    }
    io::Checkpoint ckpt = io::load_checkpoint(path);
    std::cout << "checkpoint: encoder_kind=" << static_cast<int>(ckpt.encoder.kind)
              << " params=" << ckpt.net.param_count()
              << " layers=" << ckpt.net.layers.size()
              << " time_pairs=" << ckpt.time_embedding.pairs
              << " train_seed=" << ckpt.train_config.seed
              << " iterations=" << ckpt.train_config.iterations
              << (ckpt.ema_shadow ? " ema=yes" : " ema=no") << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random-process flow matching toolkit"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Train a model from observations");
    std::string train_config, train_data, train_out, train_seed, train_iters, train_sigma;
    train->add_option("--config", train_config, "key = value config file");
    train->add_option("--data", train_data, "observations (CSV or PGM/PPM)");
    train->add_option("--out", train_out, "checkpoint path");
    train->add_option("--seed", train_seed, "training seed");
    train->add_option("--iterations", train_iters, "Adam steps");
    train->add_option("--sigma-noise", train_sigma, "training noise std");

    // sample
    auto* sample = app.add_subcommand("sample", "Draw prior or posterior ensembles");
    std::string s_ckpt, s_mode = "prior", s_data, s_query, s_out = "ensemble.ens";
    std::vector<std::size_t> s_grid;
    std::size_t s_count = 16, s_kb = 100, s_kf = 100;
    double s_sigma_post = 0.0;
    std::uint64_t s_seed = 0;
    bool s_ema = false;
    sample->add_option("--checkpoint", s_ckpt)->required();
    sample->add_option("--mode", s_mode, "prior | posterior");
    sample->add_option("--data", s_data, "observations for posterior mode");
    sample->add_option("--query-csv", s_query, "positions file");
    sample->add_option("--grid", s_grid, "query grid H W")->expected(2);
    sample->add_option("--samples", s_count);
    sample->add_option("--k-backward", s_kb);
    sample->add_option("--k-forward", s_kf);
    sample->add_option("--sigma-gp-posterior", s_sigma_post);
    sample->add_option("--seed", s_seed);
    sample->add_option("--out", s_out);
    sample->add_flag("--ema", s_ema, "use the EMA weights");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate an ensemble against ground truth");
    std::string e_ens, e_truth, e_metrics = "psnr,pce", e_out = "metrics.csv";
    eval->add_option("--ensemble", e_ens)->required();
    eval->add_option("--truth", e_truth)->required();
    eval->add_option("--metrics", e_metrics, "comma list: psnr,ssim,w1,pce");
    eval->add_option("--out", e_out);

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run a scripted study");
    std::string x_name, x_config, x_out = "experiment_out";
    bool x_list = false;
    exp->add_option("--name", x_name);
    exp->add_option("--config", x_config);
    exp->add_option("--out", x_out);
    exp->add_flag("--list", x_list, "list registered experiments");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Print container headers");
    std::string i_path;
    inspect->add_option("path", i_path)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            io::Config overrides;
            if (!train_data.empty()) overrides.set("data", train_data);
            if (!train_out.empty()) overrides.set("out", train_out);
            if (!train_seed.empty()) overrides.set("seed", train_seed);
            if (!train_iters.empty()) overrides.set("iterations", train_iters);
            if (!train_sigma.empty()) overrides.set("sigma_noise", train_sigma);
            return cmd_train(train_config, overrides);
        }
        if (sample->parsed())
            return cmd_sample(s_ckpt, s_mode, s_data, s_query, s_grid.size() == 2 ? s_grid[0] : 0,
                              s_grid.size() == 2 ? s_grid[1] : 0, s_count, s_kb, s_kf,
                              s_sigma_post, s_seed, s_out, s_ema);
        if (eval->parsed()) return cmd_eval(e_ens, e_truth, e_metrics, e_out);
        if (exp->parsed()) return cmd_experiment(x_name, x_config, x_out, x_list);
        if (inspect->parsed()) return cmd_inspect(i_path);
    } catch (const InvalidParam& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const DimensionMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternalError;
    }
    return kExitUserError;
}
