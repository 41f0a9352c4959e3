#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rpflow/cfm_train.hpp"
#include "rpflow/transport.hpp"

#include <cmath>

using namespace rpflow;

namespace {

cfm::FieldObservations grid_observations(std::size_t n, double value) {
    cfm::FieldObservations obs;
    obs.positions = Matrix(n, 1);
    obs.values = Matrix(n, 1, value);
    for (std::size_t i = 0; i < n; ++i)
        obs.positions(i, 0) = static_cast<double>(i) / static_cast<double>(n - 1);
    return obs;
}

}  // namespace

TEST_CASE("observation validation") {
    cfm::FieldObservations obs = grid_observations(4, 0.0);
    CHECK_NOTHROW(obs.validate());

    cfm::FieldObservations dup = obs;
    dup.positions(2, 0) = dup.positions(1, 0);
    CHECK_THROWS_AS(dup.validate(), InvalidParam);

    cfm::FieldObservations tiny;
    tiny.positions = Matrix(1, 1);
    tiny.values = Matrix(1, 1);
    CHECK_THROWS_AS(tiny.validate(), InvalidParam);
}

TEST_CASE("training batch interpolant endpoints") {
    cfm::FieldObservations obs = grid_observations(8, 0.0);
    for (std::size_t i = 0; i < 8; ++i) obs.values(i, 0) = static_cast<double>(i) * 10.0;
    rff::PositionEncoder enc = rff::make_rff_encoder(rff::make_basis(0, 16, 1, 5.0));
    cfm::TrainConfig cfg;
    cfg.batch_size = 64;
    cfg.sigma_noise = 0.0;

    Rng rng(1);
    // t = 1 forced: z_t equals the observed value exactly
    cfm::TrainingBatch at_one = cfm::make_training_batch(rng, obs, enc, cfg, 1.0);
    for (std::size_t i = 0; i < 64; ++i) {
        bool matches_some = false;
        for (std::size_t j = 0; j < 8; ++j)
            if (at_one.z_t(i, 0) == obs.values(j, 0)) matches_some = true;
        CHECK(matches_some);
    }

    // t = 0 forced: z_t is the source draw, so z_t + target hits an observation
    cfm::TrainingBatch at_zero = cfm::make_training_batch(rng, obs, enc, cfg, 0.0);
    for (std::size_t i = 0; i < 64; ++i) {
        const double z1 = at_zero.z_t(i, 0) + at_zero.target_velocity(i, 0);
        bool matches_some = false;
        for (std::size_t j = 0; j < 8; ++j)
            if (std::abs(z1 - obs.values(j, 0)) < 1e-12) matches_some = true;
        CHECK(matches_some);
    }
}

TEST_CASE("training noise has the configured scale") {
    // two positions, identical zero values: at t=1 the batch carries pure noise
    cfm::FieldObservations obs = grid_observations(2, 0.0);
    rff::PositionEncoder enc = rff::make_none_encoder(1);
    cfm::TrainConfig cfg;
    cfg.batch_size = 100000;
    cfg.sigma_noise = 0.06;

    Rng rng(3);
    cfm::TrainingBatch batch = cfm::make_training_batch(rng, obs, enc, cfg, 1.0);
    double ss = 0.0;
    for (std::size_t i = 0; i < batch.z_t.size(); ++i) ss += batch.z_t(i, 0) * batch.z_t(i, 0);
    const double stdev = std::sqrt(ss / static_cast<double>(batch.z_t.size()));
    CHECK(stdev == doctest::Approx(0.06).epsilon(0.03));
}

TEST_CASE("batch time marginal is uniform (KS) and source is standard normal") {
    cfm::FieldObservations obs = grid_observations(16, 0.5);
    rff::PositionEncoder enc = rff::make_none_encoder(1);
    cfm::TrainConfig cfg;
    cfg.batch_size = 10000;

    Rng rng(5);
    cfm::TrainingBatch batch = cfm::make_training_batch(rng, obs, enc, cfg);

    std::vector<double> ts = batch.t;
    std::sort(ts.begin(), ts.end());
    double ks = 0.0;
    const double n = static_cast<double>(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        ks = std::max({ks, std::abs(ts[i] - lo), std::abs(ts[i] - hi)});
    }
    CHECK(ks < 1.63 / std::sqrt(n));  // 1% critical value

    // recover z0 = z_t - t * (z1 - z0)
    std::vector<double> z0(batch.t.size());
    for (std::size_t i = 0; i < z0.size(); ++i)
        z0[i] = batch.z_t(i, 0) - batch.t[i] * batch.target_velocity(i, 0);
    double mean = 0.0;
    for (double v : z0) mean += v;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : z0) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    CHECK(std::abs(mean) < 0.04);
    CHECK(std::abs(m2 - 1.0) < 0.05);
    CHECK(std::abs(m3 / std::pow(m2, 1.5)) < 0.1);
    CHECK(std::abs(m4 / (m2 * m2) - 3.0) < 0.25);
}

TEST_CASE("zero iterations leave the net untouched") {
    cfm::FieldObservations obs = grid_observations(8, 0.3);
    rff::PositionEncoder enc = rff::make_rff_encoder(rff::make_basis(0, 8, 1, 5.0));
    net::TimeEmbedding te;
    Rng rng(7);
    net::Mlp net = net::init_mlp(rng, cfm::layer_dims(enc, te, 1, 16, 2));
    net::Mlp before = net;

    cfm::TrainConfig cfg;
    cfg.iterations = 0;
    cfm::TrainResult res = cfm::train(obs, enc, std::move(net), te, cfg);
    CHECK(res.loss_trace.empty());
    for (std::size_t i = 0; i < before.layers.size(); ++i)
        CHECK(res.final_net.layers[i].w == before.layers[i].w);
}

TEST_CASE("training on a constant target learns the point-mass transport") {
    const double target_value = 0.7;
    cfm::FieldObservations obs = grid_observations(32, target_value);
    rff::PositionEncoder enc = rff::make_rff_encoder(rff::make_basis(1, 32, 1, 8.0));
    net::TimeEmbedding te;
    Rng rng(11);
    net::Mlp net = net::init_mlp(rng, cfm::layer_dims(enc, te, 1, 64, 3));

    cfm::TrainConfig cfg;
    cfg.iterations = 5000;
    cfg.batch_size = 64;
    cfg.seed = 12;
    cfm::TrainResult res = cfm::train(obs, enc, std::move(net), te, cfg);

    double tail = 0.0;
    for (std::size_t i = res.loss_trace.size() - 100; i < res.loss_trace.size(); ++i)
        tail += res.loss_trace[i];
    tail /= 100.0;
    CHECK(tail < 0.1);

    // forward transport of fresh source draws lands near the constant
    Rng source(13);
    Matrix z0 = standard_normal(source, 32, 1);
    Matrix out = ode::integrate(res.final_net, te, enc, obs.positions, z0, {100, ode::Direction::forward});
    for (std::size_t i = 0; i < out.rows(); ++i)
        CHECK(std::abs(out(i, 0) - target_value) < 0.05);
}

TEST_CASE("constant-zero 1D toy reaches a small loss") {
    cfm::FieldObservations obs = grid_observations(32, 0.0);
    rff::PositionEncoder enc = rff::make_rff_encoder(rff::make_basis(2, 32, 1, 8.0));
    net::TimeEmbedding te;
    Rng rng(15);
    net::Mlp net = net::init_mlp(rng, cfm::layer_dims(enc, te, 1, 64, 3));

    cfm::TrainConfig cfg;
    cfg.iterations = 4000;
    cfg.batch_size = 64;
    cfg.seed = 16;
    cfm::TrainResult res = cfm::train(obs, enc, std::move(net), te, cfg);
    double tail = 0.0;
    for (std::size_t i = res.loss_trace.size() - 100; i < res.loss_trace.size(); ++i)
        tail += res.loss_trace[i];
    CHECK(tail / 100.0 <= 0.1);
}

TEST_CASE("divergence detection fires at an absurd learning rate") {
    cfm::FieldObservations obs = grid_observations(16, 0.5);
    rff::PositionEncoder enc = rff::make_rff_encoder(rff::make_basis(3, 16, 1, 8.0));
    net::TimeEmbedding te;
    Rng rng(17);
    net::Mlp net = net::init_mlp(rng, cfm::layer_dims(enc, te, 1, 32, 2));

    cfm::TrainConfig cfg;
    cfg.iterations = 500;
    cfg.batch_size = 32;
    cfg.lr = 1e+3;
    CHECK_THROWS_AS(cfm::train(obs, enc, std::move(net), te, cfg), DivergedError);
}

TEST_CASE("identical seed gives bitwise-identical training") {
    cfm::FieldObservations obs = grid_observations(16, 0.4);
    rff::PositionEncoder enc = rff::make_rff_encoder(rff::make_basis(4, 16, 1, 6.0));
    net::TimeEmbedding te;
    cfm::TrainConfig cfg;
    cfg.iterations = 120;
    cfg.batch_size = 16;
    cfg.seed = 99;
    cfg.ema_decay = 0.99;

    auto run = [&]() {
        Rng rng(18);
        net::Mlp net = net::init_mlp(rng, cfm::layer_dims(enc, te, 1, 24, 2));
        return cfm::train(obs, enc, std::move(net), te, cfg);
    };
    cfm::TrainResult a = run();
    cfm::TrainResult b = run();
    CHECK(a.loss_trace == b.loss_trace);
    for (std::size_t i = 0; i < a.final_net.layers.size(); ++i) {
        CHECK(a.final_net.layers[i].w == b.final_net.layers[i].w);
        CHECK(a.ema->layers[i].w == b.ema->layers[i].w);
    }
}

TEST_CASE("warmup ramps the effective learning rate") {
    // with warmup the first steps move parameters less than without
    cfm::FieldObservations obs = grid_observations(16, 0.8);
    rff::PositionEncoder enc = rff::make_rff_encoder(rff::make_basis(5, 16, 1, 6.0));
    net::TimeEmbedding te;

    auto first_step_delta = [&](std::size_t warmup) {
        Rng rng(19);
        net::Mlp net = net::init_mlp(rng, cfm::layer_dims(enc, te, 1, 24, 2));
        net::Mlp before = net;
        cfm::TrainConfig cfg;
        cfg.iterations = 1;
        cfg.batch_size = 16;
        cfg.seed = 20;
        cfg.warmup_steps = warmup;
        cfm::TrainResult res = cfm::train(obs, enc, std::move(net), te, cfg);
        double delta = 0.0;
        for (std::size_t i = 0; i < before.layers.size(); ++i)
            delta = std::max(delta, sub(res.final_net.layers[i].w, before.layers[i].w).max_abs());
        return delta;
    };
    CHECK(first_step_delta(100) < first_step_delta(0));
}
