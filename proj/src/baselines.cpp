#include "rpflow/baselines.hpp"

#include <cmath>

namespace rpflow::baselines {

RffNetModel train_rff_net(const cfm::FieldObservations& obs, const rff::RffBasis& basis,
                          const RffNetConfig& cfg) {
    obs.validate();
    for (std::size_t i = 0; i < obs.values.size(); ++i) {
        const double v = obs.values.data()[i];
        if (v < 0.0 || v > 1.0)
            throw InvalidParam("train_rff_net: sigmoid output needs targets in [0,1]");
    }

    RffNetModel model;
    model.basis = basis;
    const Matrix features = rff::embed(basis, obs.positions);

    std::vector<std::size_t> dims;
    dims.push_back(features.cols());
    dims.insert(dims.end(), cfg.hidden_layers, cfg.width);
    dims.push_back(obs.channels());

    Rng rng(cfg.seed);
    model.net = net::init_mlp(rng, dims, net::OutputActivation::sigmoid);
    net::AdamState adam = net::make_adam(model.net, cfg.lr);
    net::Gradients grads;
    model.loss_trace.reserve(cfg.iterations);

    const std::size_t n = obs.count();
    for (std::size_t step = 0; step < cfg.iterations; ++step) {
        std::vector<std::size_t> idx(cfg.batch_size);
        for (auto& v : idx) v = rng.uniform_index(n);
        Matrix input = gather_rows(features, idx);
        Matrix target = gather_rows(obs.values, idx);
        const double loss = net::mse_loss_and_grad(model.net, input, target, grads);
        if (!std::isfinite(loss) || loss > cfm::kDivergenceThreshold)
            throw DivergedError("train_rff_net: diverged loss at step " + std::to_string(step));
        net::adam_step(model.net, grads, adam);
        model.loss_trace.push_back(loss);
    }
    return model;
}

Matrix rff_net_predict(const RffNetModel& model, const Matrix& query) {
    return net::forward(model.net, rff::embed(model.basis, query));
}

GprPrediction gpr_predict(const cfm::FieldObservations& obs, const rff::KernelSpec& spec,
                          const Matrix& query) {
    // The unit-variance kernel is a prior in normalized space: standardize
    // each channel on the training observations, regress, then map back.
    const std::size_t n = obs.count();
    const std::size_t m = obs.channels();
    std::vector<double> mean(m, 0.0), sd(m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < m; ++c) mean[c] += obs.values(i, c);
    for (double& v : mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < m; ++c) {
            const double d = obs.values(i, c) - mean[c];
            sd[c] += d * d;
        }
    for (double& v : sd) v = std::sqrt(v / static_cast<double>(n));
    // one variance scale across channels keeps the shared-factor contract
    double pooled = 0.0;
    for (double v : sd) pooled += v * v;
    pooled = std::sqrt(pooled / static_cast<double>(m));
    if (pooled < 1e-12) pooled = 1.0;

    Matrix normalized = obs.values;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < m; ++c)
            normalized(i, c) = (obs.values(i, c) - mean[c]) / pooled;

    GprPrediction out;
    out.posterior = gp::fit_posterior(spec, obs.positions, normalized);
    gp::MeanCov mc = gp::posterior_mean_cov(out.posterior, query);
    out.mean = std::move(mc.mean);
    for (std::size_t i = 0; i < query.rows(); ++i)
        for (std::size_t c = 0; c < m; ++c)
            out.mean(i, c) = out.mean(i, c) * pooled + mean[c];
    out.variance = Matrix(query.rows(), 1);
    for (std::size_t i = 0; i < query.rows(); ++i)
        out.variance(i, 0) = std::max(0.0, mc.cov(i, i)) * pooled * pooled;
    return out;
}

AblationModel rpflow_ablation(BaselineKind kind, const cfm::FieldObservations& obs,
                              const AblationConfig& cfg) {
    AblationModel model;
    switch (kind) {
        case BaselineKind::rpflow_no_pos:
            model.encoder = rff::make_none_encoder(obs.dim());
            break;
        case BaselineKind::rpflow_posenc:
            model.encoder = rff::make_posenc_encoder(cfg.posenc_octaves, obs.dim());
            break;
        default:
            throw InvalidParam("rpflow_ablation: kind must be rpflow_no_pos or rpflow_posenc");
    }
    Rng rng(cfg.train.seed);
    net::Mlp net = net::init_mlp(
        rng,
        cfm::layer_dims(model.encoder, model.time_embedding, obs.channels(), cfg.width,
                        cfg.hidden_layers));
    cfm::TrainResult result = cfm::train(obs, model.encoder, std::move(net), model.time_embedding,
                                         cfg.train);
    model.net = std::move(result.final_net);
    model.loss_trace = std::move(result.loss_trace);
    return model;
}

}  // namespace rpflow::baselines
