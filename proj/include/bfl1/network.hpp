#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bfl1/dataset.hpp"
#include "bfl1/linalg.hpp"
#include "bfl1/rng.hpp"

namespace bfl1 {

enum class Activation { ReLU, ELU, Tanh, Identity };

struct ActivationKind {
    Activation kind = Activation::Identity;
    double alpha = 1.0; // ELU scale, ignored by the other kinds

    static ActivationKind relu() { return {Activation::ReLU, 1.0}; }
    static ActivationKind elu(double alpha = 1.0) { return {Activation::ELU, alpha}; }
    static ActivationKind tanh() { return {Activation::Tanh, 1.0}; }
    static ActivationKind identity() { return {Activation::Identity, 1.0}; }

    bool operator==(const ActivationKind&) const = default;
};

double activation_eval(const ActivationKind& act, double z);

// Pointwise derivative. Conventions at the kinks: ReLU'(0) = 0,
// ELU'(z) = alpha * exp(z) for z <= 0.
double activation_deriv(const ActivationKind& act, double z);

struct LayerSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    ActivationKind activation;

    bool operator==(const LayerSpec&) const = default;
};

// Layers are applied in order; the last entry is the output layer.
void validate_arch(const std::vector<LayerSpec>& specs);

std::size_t param_count(const std::vector<LayerSpec>& specs);

struct Layer {
    Matrix weights; // out_dim x in_dim
    Vector bias;    // out_dim
};

struct NetworkParams {
    std::vector<Layer> layers;
};

// Glorot uniform: W ~ U[-a, a) with a = sqrt(6 / (in + out)), biases zero.
// Entries are drawn in flat order (each layer's weights row-major, then its
// bias), so a given rng stream pins the full initialization.
NetworkParams init_params(const std::vector<LayerSpec>& specs, Rng& rng);

// Flat layout: for each layer in order, weights row-major then bias.
Vector flatten(const NetworkParams& params);
NetworkParams unflatten(const std::vector<LayerSpec>& specs, const Vector& theta);

Vector forward(const std::vector<LayerSpec>& specs, const NetworkParams& params,
               const Vector& x);

// Mean over samples of the squared l2 norm of the residual vector.
double mse_loss(const std::vector<LayerSpec>& specs, const NetworkParams& params,
                const Dataset& data);

// Gradient of mse_loss with respect to the flat parameter vector.
Vector backprop(const std::vector<LayerSpec>& specs, const NetworkParams& params,
                const Dataset& data);

// Batched engine over a flat parameter vector; owns its scratch buffers so a
// training loop can reuse them across iterations.
class BatchEvaluator {
public:
    explicit BatchEvaluator(std::vector<LayerSpec> specs);

    const std::vector<LayerSpec>& specs() const { return specs_; }
    std::size_t n_params() const { return n_params_; }

    // Predictions for x (n x in_dim), one sample per row. If masks is given
    // it must hold one n x out_dim matrix per non-output layer; entries
    // multiply that layer's activations (inverted-dropout scaling included).
    const Matrix& forward(const Vector& theta, const Matrix& x,
                          const std::vector<Matrix>* masks = nullptr);

    double loss(const Vector& theta, const Matrix& x, const Matrix& y,
                const std::vector<Matrix>* masks = nullptr);

    // Loss and its gradient; grad is resized to n_params().
    double loss_grad(const Vector& theta, const Matrix& x, const Matrix& y,
                     Vector& grad, const std::vector<Matrix>* masks = nullptr);

private:
    struct LayerView {
        std::size_t w_off, b_off, in, out;
        ActivationKind act;
    };

    void run_forward(const Vector& theta, const Matrix& x,
                     const std::vector<Matrix>* masks);

    std::vector<LayerSpec> specs_;
    std::vector<LayerView> views_;
    std::size_t n_params_ = 0;
    std::vector<Matrix> z_;  // pre-activations per layer
    std::vector<Matrix> a_;  // activations per layer (a_[0] unused; x is layer 0 input)
    std::vector<Matrix> dz_;
    Matrix scratch_t_; // transposed weight / delta buffer
    Matrix dA_;
};

// Encoder and decoder chains; composed() is the end-to-end layer list.
struct AutoencoderSpec {
    std::vector<LayerSpec> encoder;
    std::vector<LayerSpec> decoder;

    std::vector<LayerSpec> composed() const;
    std::size_t latent_dim() const;
};

// (latent, reconstruction) for one input.
std::pair<Vector, Vector> autoencode_forward(const AutoencoderSpec& spec,
                                             const NetworkParams& params,
                                             const Vector& x);

// Serialization: {"spec": [...], "flat_theta": [...]}.
nlohmann::json network_to_json(const std::vector<LayerSpec>& specs,
                               const NetworkParams& params);
std::pair<std::vector<LayerSpec>, NetworkParams> network_from_json(const nlohmann::json& j);

} // namespace bfl1
