#include "rpflow/cfm_train.hpp"

#include <cmath>
#include <fstream>

namespace rpflow::cfm {

void FieldObservations::validate() const {
    if (positions.rows() < 2) throw InvalidParam("observations: need N >= 2");
    if (positions.rows() != values.rows())
        throw DimensionMismatch("observations: positions/values row mismatch");
    if (!positions.all_finite() || !values.all_finite())
        throw InvalidParam("observations: non-finite entries");
    for (std::size_t i = 0; i < positions.rows(); ++i)
        for (std::size_t j = i + 1; j < positions.rows(); ++j) {
            bool same = true;
            for (std::size_t c = 0; c < positions.cols(); ++c)
                if (positions(i, c) != positions(j, c)) {
                    same = false;
                    break;
                }
            if (same) throw InvalidParam("observations: duplicate position at rows " +
                                         std::to_string(i) + "," + std::to_string(j));
        }
}

TrainingBatch make_training_batch(Rng& rng, const FieldObservations& obs, const Matrix& feature_cache,
                                  const TrainConfig& cfg, std::optional<double> forced_t) {
    const std::size_t b = cfg.batch_size;
    const std::size_t m = obs.channels();
    const std::size_t n = obs.count();
    if (feature_cache.rows() != n)
        throw DimensionMismatch("make_training_batch: feature cache rows != observation count");

    TrainingBatch batch;
    batch.features = Matrix(b, feature_cache.cols());
    batch.t.resize(b);
    batch.z_t = Matrix(b, m);
    batch.target_velocity = Matrix(b, m);

    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t idx = rng.uniform_index(n);
        const double t = forced_t ? *forced_t : rng.uniform();
        std::copy(feature_cache.row_ptr(idx), feature_cache.row_ptr(idx) + feature_cache.cols(),
                  batch.features.row_ptr(i));
        batch.t[i] = t;
        for (std::size_t c = 0; c < m; ++c) {
            const double z0 = rng.normal();
            const double eps = cfg.sigma_noise > 0.0 ? cfg.sigma_noise * rng.normal() : 0.0;
            const double z1 = obs.values(idx, c) + eps;
            batch.z_t(i, c) = t * z1 + (1.0 - t) * z0;
            batch.target_velocity(i, c) = z1 - z0;
        }
    }
    return batch;
}

TrainingBatch make_training_batch(Rng& rng, const FieldObservations& obs,
                                  const rff::PositionEncoder& encoder, const TrainConfig& cfg,
                                  std::optional<double> forced_t) {
    return make_training_batch(rng, obs, encoder.encode(obs.positions), cfg, forced_t);
}

std::size_t input_dim(const rff::PositionEncoder& encoder, const net::TimeEmbedding& te,
                      std::size_t channels) {
    return encoder.feature_dim() + te.dim() + channels;
}

std::vector<std::size_t> layer_dims(const rff::PositionEncoder& encoder, const net::TimeEmbedding& te,
                                    std::size_t channels, std::size_t width,
                                    std::size_t hidden_layers) {
    std::vector<std::size_t> dims;
    dims.push_back(input_dim(encoder, te, channels));
    dims.insert(dims.end(), hidden_layers, width);
    dims.push_back(channels);
    return dims;
}

TrainResult train(const FieldObservations& obs, const rff::PositionEncoder& encoder, net::Mlp net,
                  const net::TimeEmbedding& te, const TrainConfig& cfg) {
    obs.validate();
    if (net.input_dim() != input_dim(encoder, te, obs.channels()))
        throw DimensionMismatch("train: net input dim does not match encoder/time/channel layout");

    const Matrix features = encoder.encode(obs.positions);
    Rng rng(cfg.seed);
    net::AdamState adam = net::make_adam(net, cfg.lr);
    std::optional<net::EmaState> ema;
    if (cfg.ema_decay) ema = net::make_ema(net, *cfg.ema_decay);

    TrainResult result;
    result.loss_trace.reserve(cfg.iterations);
    net::Gradients grads;

    for (std::size_t step = 0; step < cfg.iterations; ++step) {
        TrainingBatch batch = make_training_batch(rng, obs, features, cfg);
        Matrix input = hcat(hcat(batch.features, te.embed(batch.t)), batch.z_t);
        const double loss = net::mse_loss_and_grad(net, input, batch.target_velocity, grads);
        if (!std::isfinite(loss) || loss > kDivergenceThreshold)
            throw DivergedError("train: diverged loss at step " + std::to_string(step));

        double lr = cfg.lr;
        if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
            lr = cfg.lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
        net::adam_step(net, grads, adam, lr);
        if (ema) net::ema_update(net, *ema);
        result.loss_trace.push_back(loss);
    }

    if (!net.all_finite()) throw DivergedError("train: non-finite parameters after training");
    if (ema) result.ema = net::ema_net(net, *ema);
    result.final_net = std::move(net);
    return result;
}

void write_loss_csv(const std::vector<double>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path);
    out << "step,loss\n";
    out.precision(17);
    for (std::size_t i = 0; i < trace.size(); ++i) out << i << "," << trace[i] << "\n";
}

}  // namespace rpflow::cfm
