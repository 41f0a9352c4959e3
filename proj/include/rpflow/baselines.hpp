#pragma once

#include "rpflow/cfm_train.hpp"
#include "rpflow/gp.hpp"
#include "rpflow/numerics.hpp"

#include <cstdint>

namespace rpflow::baselines {

enum class BaselineKind : std::uint8_t {
    rff_net = 0,
    gpr_noiseless = 1,
    gpr_calibrated = 2,
    rpflow_no_pos = 3,
    rpflow_posenc = 4,
};

struct RffNetConfig {
    std::size_t width = 256;
    std::size_t hidden_layers = 4;
    std::size_t iterations = 10000;
    std::size_t batch_size = 128;
    double lr = 1e-3;
    std::uint64_t seed = 0;
};

struct RffNetModel {
    net::Mlp net;
    rff::RffBasis basis;
    std::vector<double> loss_trace;
};

/// Direct x -> Z(x) regression on the RFF embedding with a sigmoid output;
/// target values must live in [0,1].
RffNetModel train_rff_net(const cfm::FieldObservations& obs, const rff::RffBasis& basis,
                          const RffNetConfig& cfg);

Matrix rff_net_predict(const RffNetModel& model, const Matrix& query);

struct GprPrediction {
    Matrix mean;      // N* x m
    Matrix variance;  // N* x 1, shared across channels
    gp::GpPosterior posterior;
};

/// Target-space GPR per channel; noiseless mode passes noise_var = 0.
GprPrediction gpr_predict(const cfm::FieldObservations& obs, const rff::KernelSpec& spec,
                          const Matrix& query);

struct AblationConfig {
    BaselineKind kind = BaselineKind::rpflow_no_pos;
    std::size_t posenc_octaves = 8;
    std::size_t width = 256;
    std::size_t hidden_layers = 4;
    cfm::TrainConfig train;
};

struct AblationModel {
    net::Mlp net;
    rff::PositionEncoder encoder;
    net::TimeEmbedding time_embedding;
    std::vector<double> loss_trace;
};

/// The RP Flow trainer with the position features swapped out: nothing for
/// rpflow_no_pos, deterministic sinusoids for rpflow_posenc.
AblationModel rpflow_ablation(BaselineKind kind, const cfm::FieldObservations& obs,
                              const AblationConfig& cfg);

}  // namespace rpflow::baselines
