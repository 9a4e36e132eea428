#include "cnts/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "cnts/errors.hpp"

namespace cnts {

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw NumericError(std::string("non-finite value in ") + what);
    }
}

double activate(Activation a, double z) {
    switch (a) {
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Identity: return z;
    }
    return z;
}

// Derivative in terms of the pre-activation z.
double activate_grad(Activation a, double z) {
    switch (a) {
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: {
            double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

} // namespace

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw ConfigError("unknown activation: " + name);
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

std::vector<std::size_t> DenseNet::dims() const {
    std::vector<std::size_t> d;
    d.reserve(layers.size() + 1);
    d.push_back(layers.front().in());
    for (const auto& layer : layers) d.push_back(layer.out());
    return d;
}

std::size_t DenseNet::param_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.weights.data.size() + layer.bias.size();
    return n;
}

NetGrads NetGrads::zeros_like(const DenseNet& net) {
    NetGrads g;
    g.layers.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        g.layers.push_back({Matrix(layer.out(), layer.in()),
                            std::vector<double>(layer.out(), 0.0)});
    }
    return g;
}

std::uint64_t Rng::bits() {
    // splitmix64: tiny, portable, and plenty for parameter init and noise.
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    return static_cast<double>(bits() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
}

DenseNet init_params(const std::vector<std::size_t>& dims,
                     const std::vector<Activation>& activations,
                     std::uint64_t seed) {
    if (dims.size() < 2) {
        throw ConfigError("init_params: dims needs at least an input and an output width");
    }
    for (std::size_t d : dims) {
        if (d == 0) throw ConfigError("init_params: zero layer width");
    }
    if (activations.size() != dims.size() - 1) {
        throw ConfigError("init_params: one activation tag per layer required");
    }

    Rng rng(seed);
    DenseNet net;
    net.layers.reserve(dims.size() - 1);
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        std::size_t in = dims[k];
        std::size_t out = dims[k + 1];
        DenseLayer layer;
        layer.weights = Matrix(out, in);
        layer.bias.assign(out, 0.0);
        layer.act = activations[k];
        double scale = std::sqrt(6.0 / static_cast<double>(in + out));
        for (double& w : layer.weights.data) w = rng.uniform(-scale, scale);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

ForwardTrace forward(const DenseNet& net, const Matrix& input) {
    if (input.cols != net.input_width()) {
        throw ShapeError("forward: input width " + std::to_string(input.cols) +
                         " does not match first layer in=" + std::to_string(net.input_width()));
    }

    ForwardTrace trace;
    trace.activations.reserve(net.layers.size() + 1);
    trace.pre_acts.reserve(net.layers.size());
    trace.activations.push_back(input);

    for (const auto& layer : net.layers) {
        const Matrix& x = trace.activations.back();
        Matrix z(x.rows, layer.out());
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double* xi = &x.data[i * x.cols];
            for (std::size_t o = 0; o < layer.out(); ++o) {
                const double* w = &layer.weights.data[o * layer.in()];
                double acc = layer.bias[o];
                for (std::size_t j = 0; j < layer.in(); ++j) acc += w[j] * xi[j];
                z(i, o) = acc;
            }
        }
        Matrix a(z.rows, z.cols);
        for (std::size_t idx = 0; idx < z.data.size(); ++idx) {
            a.data[idx] = activate(layer.act, z.data[idx]);
        }
        trace.pre_acts.push_back(std::move(z));
        trace.activations.push_back(std::move(a));
    }
    for (double v : trace.output().data) {
        if (!std::isfinite(v)) throw NumericError("forward: non-finite output");
    }
    return trace;
}

NetGrads backward(const DenseNet& net, const ForwardTrace& trace,
                  const Matrix& output_grad) {
    if (trace.activations.size() != net.layers.size() + 1 ||
        trace.pre_acts.size() != net.layers.size()) {
        throw ShapeError("backward: trace does not match net layer count");
    }
    if (!output_grad.same_shape(trace.output())) {
        throw ShapeError("backward: output_grad shape mismatch");
    }

    NetGrads grads = NetGrads::zeros_like(net);
    Matrix delta = output_grad;

    for (std::size_t k = net.layers.size(); k-- > 0;) {
        const DenseLayer& layer = net.layers[k];
        const Matrix& z = trace.pre_acts[k];
        const Matrix& x = trace.activations[k];

        // delta <- dLoss/dz for this layer.
        for (std::size_t idx = 0; idx < delta.data.size(); ++idx) {
            delta.data[idx] *= activate_grad(layer.act, z.data[idx]);
        }

        NetGrads::Layer& g = grads.layers[k];
        for (std::size_t i = 0; i < delta.rows; ++i) {
            const double* di = &delta.data[i * delta.cols];
            const double* xi = &x.data[i * x.cols];
            for (std::size_t o = 0; o < layer.out(); ++o) {
                double d = di[o];
                g.bias[o] += d;
                double* gw = &g.weights.data[o * layer.in()];
                for (std::size_t j = 0; j < layer.in(); ++j) gw[j] += d * xi[j];
            }
        }

        if (k > 0) {
            Matrix prev(delta.rows, layer.in());
            for (std::size_t i = 0; i < delta.rows; ++i) {
                const double* di = &delta.data[i * delta.cols];
                double* pi = &prev.data[i * prev.cols];
                for (std::size_t o = 0; o < layer.out(); ++o) {
                    double d = di[o];
                    const double* w = &layer.weights.data[o * layer.in()];
                    for (std::size_t j = 0; j < layer.in(); ++j) pi[j] += d * w[j];
                }
            }
            delta = std::move(prev);
        }
    }
    return grads;
}

double grad_check(const DenseNet& net, const Matrix& input, const LossFn& loss,
                  double eps) {
    if (!(eps > 0.0)) {
        throw NumericError("grad_check: eps must be positive");
    }

    ForwardTrace trace = forward(net, input);
    LossEval at_point = loss(trace.output());
    require_finite(at_point.value, "grad_check loss");
    NetGrads analytic = backward(net, trace, at_point.output_grad);

    DenseNet probe = net;
    auto loss_at = [&](void) -> double {
        double v = loss(forward(probe, input).output()).value;
        require_finite(v, "grad_check loss");
        return v;
    };

    double worst = 0.0;
    auto check_param = [&](double& p, double a) {
        double saved = p;
        p = saved + eps;
        double up = loss_at();
        p = saved - eps;
        double down = loss_at();
        p = saved;
        double numeric = (up - down) / (2.0 * eps);
        double rel = std::abs(a - numeric) /
                     std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, rel);
    };

    for (std::size_t k = 0; k < probe.layers.size(); ++k) {
        auto& layer = probe.layers[k];
        for (std::size_t idx = 0; idx < layer.weights.data.size(); ++idx) {
            check_param(layer.weights.data[idx], analytic.layers[k].weights.data[idx]);
        }
        for (std::size_t o = 0; o < layer.bias.size(); ++o) {
            check_param(layer.bias[o], analytic.layers[k].bias[o]);
        }
    }
    return worst;
}

AdamState AdamState::init(const DenseNet& net, const AdamConfig& cfg) {
    AdamState s;
    s.cfg = cfg;
    s.m = NetGrads::zeros_like(net);
    s.v = NetGrads::zeros_like(net);
    s.step = 0;
    return s;
}

void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state) {
    if (grads.layers.size() != net.layers.size()) {
        throw ShapeError("adam_step: gradient layer count mismatch");
    }

    state.step += 1;
    const double b1 = state.cfg.beta1;
    const double b2 = state.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto update = [&](std::vector<double>& params, const std::vector<double>& g,
                          std::vector<double>& m, std::vector<double>& v) {
            if (g.size() != params.size()) {
                throw ShapeError("adam_step: gradient shape mismatch at layer " +
                                 std::to_string(k));
            }
            for (std::size_t i = 0; i < params.size(); ++i) {
                if (!std::isfinite(g[i])) {
                    throw NumericError("adam_step: non-finite gradient at layer " +
                                       std::to_string(k));
                }
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                double m_hat = m[i] / bc1;
                double v_hat = v[i] / bc2;
                params[i] -= state.cfg.step_size * m_hat /
                             (std::sqrt(v_hat) + state.cfg.epsilon);
                if (!std::isfinite(params[i])) {
                    throw NumericError("adam_step: non-finite parameter at layer " +
                                       std::to_string(k));
                }
            }
        };
        update(net.layers[k].weights.data, grads.layers[k].weights.data,
               state.m.layers[k].weights.data, state.v.layers[k].weights.data);
        update(net.layers[k].bias, grads.layers[k].bias,
               state.m.layers[k].bias, state.v.layers[k].bias);
    }
}

std::vector<double> softmax(const std::vector<double>& values) {
    if (values.empty()) throw ShapeError("softmax: empty input");
    double max_v = *std::max_element(values.begin(), values.end());
    require_finite(max_v, "softmax input");

    std::vector<double> out(values.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        require_finite(values[i], "softmax input");
        out[i] = std::exp(values[i] - max_v);
        sum += out[i];
    }
    for (double& p : out) p /= sum;
    return out;
}

double cross_entropy(const std::vector<double>& target_probs,
                     const std::vector<double>& predicted_logits) {
    if (target_probs.size() != predicted_logits.size()) {
        throw ShapeError("cross_entropy: length mismatch");
    }
    if (target_probs.empty()) throw ShapeError("cross_entropy: empty input");

    double target_sum = 0.0;
    for (double t : target_probs) {
        if (!(t >= 0.0 && t <= 1.0)) {
            throw ValidationError("cross_entropy: target entries must lie in [0,1]");
        }
        target_sum += t;
    }
    if (std::abs(target_sum - 1.0) > 1e-6) {
        throw ValidationError("cross_entropy: target must sum to 1");
    }

    // log-softmax via the log-sum-exp trick; never log(softmax(...)).
    double max_v = *std::max_element(predicted_logits.begin(), predicted_logits.end());
    require_finite(max_v, "cross_entropy logits");
    double lse = 0.0;
    for (double z : predicted_logits) {
        require_finite(z, "cross_entropy logits");
        lse += std::exp(z - max_v);
    }
    lse = max_v + std::log(lse);

    double loss = 0.0;
    for (std::size_t i = 0; i < target_probs.size(); ++i) {
        loss -= target_probs[i] * (predicted_logits[i] - lse);
    }
    require_finite(loss, "cross_entropy");
    return loss;
}

double mse(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("mse: length mismatch");
    if (a.empty()) throw ShapeError("mse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    acc /= static_cast<double>(a.size());
    require_finite(acc, "mse");
    return acc;
}

std::vector<double> elementwise_sq_err(const std::vector<double>& a,
                                       const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("elementwise_sq_err: length mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        out[i] = d * d;
    }
    return out;
}

} // namespace cnts
