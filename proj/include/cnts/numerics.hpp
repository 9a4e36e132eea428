#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cnts {

/// Dense row-major matrix of doubles. Rows are samples, columns are features.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
};

enum class Activation { Relu, Tanh, Identity };

Activation activation_from_name(const std::string& name);
const char* activation_name(Activation a);

/// One fully connected layer: y = act(W x + b), W is [out x in].
struct DenseLayer {
    Matrix weights;
    std::vector<double> bias;
    Activation act = Activation::Identity;

    std::size_t in() const { return weights.cols; }
    std::size_t out() const { return weights.rows; }
};

/// A chain of dense layers. Consecutive shapes must agree: layer k's `in`
/// equals layer k-1's `out`.
struct DenseNet {
    std::vector<DenseLayer> layers;

    std::size_t input_width() const { return layers.front().in(); }
    std::size_t output_width() const { return layers.back().out(); }
    std::vector<std::size_t> dims() const;
    std::size_t param_count() const;
};

/// Gradient (or moment accumulator) shaped exactly like a DenseNet.
struct NetGrads {
    struct Layer {
        Matrix weights;
        std::vector<double> bias;
    };
    std::vector<Layer> layers;

    static NetGrads zeros_like(const DenseNet& net);
};

/// Deterministic random source. Wraps mt19937_64 but derives doubles from
/// raw bits directly so streams do not depend on the standard library's
/// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Uniform in [0, 1).
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    /// Standard normal via Box-Muller.
    double normal();
    /// Raw 64-bit draw.
    std::uint64_t bits();

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Builds a net with the given layer size chain. Weights are uniform in
/// [-s, +s] with s = sqrt(6 / (in + out)); biases start at zero. The result
/// is fully determined by `seed`.
DenseNet init_params(const std::vector<std::size_t>& dims,
                     const std::vector<Activation>& activations,
                     std::uint64_t seed);

/// Everything backward() needs: the input, each layer's pre-activation, and
/// each layer's output. activations[0] is the input batch; activations.back()
/// is the final output.
struct ForwardTrace {
    std::vector<Matrix> activations;
    std::vector<Matrix> pre_acts;

    const Matrix& output() const { return activations.back(); }
};

/// Runs the batch through the net, keeping all intermediates.
ForwardTrace forward(const DenseNet& net, const Matrix& input);

/// Reverse-mode pass. `output_grad` is dLoss/dOutput with the same shape as
/// trace.output(). Returns gradients shaped exactly like `net`.
NetGrads backward(const DenseNet& net, const ForwardTrace& trace,
                  const Matrix& output_grad);

/// Loss callback for grad_check: given the net output, return the scalar loss
/// and dLoss/dOutput.
struct LossEval {
    double value = 0.0;
    Matrix output_grad;
};
using LossFn = std::function<LossEval(const Matrix& output)>;

/// Central finite-difference oracle. Returns the max over all parameters of
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const DenseNet& net, const Matrix& input, const LossFn& loss,
                  double eps);

struct AdamConfig {
    double step_size = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive-moment optimizer state; accumulator shapes mirror the net.
struct AdamState {
    AdamConfig cfg;
    NetGrads m;
    NetGrads v;
    std::int64_t step = 0;

    static AdamState init(const DenseNet& net, const AdamConfig& cfg);
};

/// One bias-corrected adaptive-moment update, in place. Deterministic.
/// Throws NumericError (with the offending layer index) on non-finite
/// gradients, and if any parameter is non-finite after the step.
void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state);

/// Numerically stable softmax (max-subtraction). Entries are positive and
/// sum to 1; the argmax of the input is preserved.
std::vector<double> softmax(const std::vector<double>& values);

/// -sum(target_i * logsoftmax(logits)_i), computed via log-softmax so large
/// logits never overflow. Target must be a probability vector. The gradient
/// with respect to the logits is softmax(logits) - target.
double cross_entropy(const std::vector<double>& target_probs,
                     const std::vector<double>& predicted_logits);

double mse(const std::vector<double>& a, const std::vector<double>& b);
std::vector<double> elementwise_sq_err(const std::vector<double>& a,
                                       const std::vector<double>& b);

} // namespace cnts
