#include "rpflow/velocity_net.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace rpflow::net {

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

// y = x * W^T + 1 b^T
Matrix affine(const Matrix& x, const Layer& layer) {
    Matrix out(x.rows(), layer.w.rows());
    auto o = as_eigen(out);
    o.noalias() = as_eigen(x) * as_eigen(layer.w).transpose();
    Eigen::Map<const Eigen::VectorXd> b(layer.b.data(), static_cast<Eigen::Index>(layer.b.size()));
    o.rowwise() += b.transpose();
    return out;
}

void relu_inplace(Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m.data()[i] < 0.0) m.data()[i] = 0.0;
}

void sigmoid_inplace(Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = 1.0 / (1.0 + std::exp(-m.data()[i]));
}

std::vector<Layer> zero_like(const Mlp& net) {
    std::vector<Layer> out;
    out.reserve(net.layers.size());
    for (const auto& l : net.layers)
        out.push_back(Layer{Matrix(l.w.rows(), l.w.cols()), std::vector<double>(l.b.size(), 0.0)});
    return out;
}

}  // namespace

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

bool Mlp::all_finite() const {
    for (const auto& l : layers) {
        if (!l.w.all_finite()) return false;
        for (double v : l.b)
            if (!std::isfinite(v)) return false;
    }
    return true;
}

void TimeEmbedding::write(double t, double* out) const {
    out[0] = t;
    for (std::size_t k = 1; k <= pairs; ++k) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) * t;
        out[2 * k - 1] = std::cos(ang);
        out[2 * k] = std::sin(ang);
    }
}

Matrix TimeEmbedding::embed(const std::vector<double>& ts) const {
    Matrix out(ts.size(), dim());
    for (std::size_t i = 0; i < ts.size(); ++i) write(ts[i], out.row_ptr(i));
    return out;
}

Mlp init_mlp(Rng& rng, const std::vector<std::size_t>& dims, OutputActivation out_act) {
    if (dims.size() < 3) throw InvalidParam("init_mlp: need at least one hidden layer");
    for (std::size_t d : dims)
        if (d < 1) throw InvalidParam("init_mlp: zero-width layer");
    Mlp net;
    net.out_act = out_act;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Layer l;
        l.w = Matrix(dims[i + 1], dims[i]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
        for (std::size_t j = 0; j < l.w.size(); ++j)
            l.w.data()[j] = (2.0 * rng.uniform() - 1.0) * bound;
        l.b.assign(dims[i + 1], 0.0);
        net.layers.push_back(std::move(l));
    }
    return net;
}

Matrix forward(const Mlp& net, const Matrix& input) {
    if (input.cols() != net.input_dim())
        throw DimensionMismatch("forward: input dim " + std::to_string(input.cols()) +
                                " != net input " + std::to_string(net.input_dim()));
    Matrix h = input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        h = affine(h, net.layers[i]);
        if (i + 1 < net.layers.size())
            relu_inplace(h);
        else if (net.out_act == OutputActivation::sigmoid)
            sigmoid_inplace(h);
    }
    return h;
}

Matrix velocity_forward(const Mlp& net, const TimeEmbedding& te, const Matrix& features,
                        const std::vector<double>& t, const Matrix& z) {
    if (features.rows() != z.rows() || t.size() != z.rows())
        throw DimensionMismatch("velocity_forward: batch sizes disagree");
    Matrix input = hcat(hcat(features, te.embed(t)), z);
    return forward(net, input);
}

double mse_loss_and_grad(const Mlp& net, const Matrix& input, const Matrix& target, Gradients& grads) {
    if (target.rows() != input.rows() || target.cols() != net.output_dim())
        throw DimensionMismatch("mse_loss_and_grad: target shape mismatch");
    const std::size_t n_layers = net.layers.size();

    std::vector<Matrix> acts;  // acts[i] = input to layer i; acts[n] = output
    acts.reserve(n_layers + 1);
    acts.push_back(input);
    for (std::size_t i = 0; i < n_layers; ++i) {
        Matrix h = affine(acts.back(), net.layers[i]);
        if (i + 1 < n_layers)
            relu_inplace(h);
        else if (net.out_act == OutputActivation::sigmoid)
            sigmoid_inplace(h);
        acts.push_back(std::move(h));
    }

    const Matrix& out = acts.back();
    const double denom = static_cast<double>(out.size());
    Matrix delta = sub(out, target);
    double loss = 0.0;
    for (std::size_t i = 0; i < delta.size(); ++i) loss += delta.data()[i] * delta.data()[i];
    loss /= denom;

    // d loss / d out
    as_eigen(delta) *= 2.0 / denom;
    if (net.out_act == OutputActivation::sigmoid)
        for (std::size_t i = 0; i < delta.size(); ++i)
            delta.data()[i] *= out.data()[i] * (1.0 - out.data()[i]);

    if (grads.layers.size() != n_layers) grads.layers = zero_like(net);
    for (std::size_t li = n_layers; li-- > 0;) {
        const Matrix& a = acts[li];
        Layer& g = grads.layers[li];
        as_eigen(g.w).noalias() = as_eigen(delta).transpose() * as_eigen(a);
        Eigen::Map<Eigen::VectorXd> gb(g.b.data(), static_cast<Eigen::Index>(g.b.size()));
        gb = as_eigen(delta).colwise().sum();
        if (li > 0) {
            Matrix prev(delta.rows(), a.cols());
            as_eigen(prev).noalias() = as_eigen(delta) * as_eigen(net.layers[li].w);
            // ReLU mask from the stored (post-activation) values
            for (std::size_t i = 0; i < prev.size(); ++i)
                if (a.data()[i] <= 0.0) prev.data()[i] = 0.0;
            delta = std::move(prev);
        }
    }
    return loss;
}

AdamState make_adam(const Mlp& net, double lr) {
    AdamState st;
    st.lr = lr;
    st.m = zero_like(net);
    st.v = zero_like(net);
    return st;
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state, double lr_override) {
    if (grads.layers.size() != net.layers.size() || state.m.size() != net.layers.size())
        throw DimensionMismatch("adam_step: state/gradient shape mismatch");
    state.step += 1;
    const double lr = lr_override >= 0.0 ? lr_override : state.lr;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    const double alpha = lr * std::sqrt(bc2) / bc1;

    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto update = [&](double* p, double* m, double* v, const double* g, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) {
                m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
                v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
                p[i] -= alpha * m[i] / (std::sqrt(v[i]) + state.eps);
            }
        };
        update(net.layers[li].w.data(), state.m[li].w.data(), state.v[li].w.data(),
               grads.layers[li].w.data(), net.layers[li].w.size());
        update(net.layers[li].b.data(), state.m[li].b.data(), state.v[li].b.data(),
               grads.layers[li].b.data(), net.layers[li].b.size());
    }
}

EmaState make_ema(const Mlp& net, double decay) {
    EmaState ema;
    ema.decay = decay;
    ema.shadow = net.layers;
    return ema;
}

void ema_update(const Mlp& net, EmaState& ema) {
    if (ema.shadow.size() != net.layers.size())
        throw DimensionMismatch("ema_update: shadow shape mismatch");
    const double d = ema.decay;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto blend = [&](double* s, const double* p, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) s[i] = d * s[i] + (1.0 - d) * p[i];
        };
        blend(ema.shadow[li].w.data(), net.layers[li].w.data(), net.layers[li].w.size());
        blend(ema.shadow[li].b.data(), net.layers[li].b.data(), net.layers[li].b.size());
    }
}

Mlp ema_net(const Mlp& net, const EmaState& ema) {
    Mlp out = net;
    out.layers = ema.shadow;
    return out;
}

}  // namespace rpflow::net
