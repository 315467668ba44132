#include "bfl1/network.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace bfl1 {

std::pair<Matrix, Matrix> dataset_to_matrices(const Dataset& data) {
    if (data.empty()) throw input_error("dataset is empty");
    const std::size_t dx = data.front().x.size();
    const std::size_t dy = data.front().y.size();
    Matrix x(data.size(), dx), y(data.size(), dy);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].x.size() != dx || data[i].y.size() != dy)
            throw input_error("dataset row " + std::to_string(i) + " has inconsistent width");
        std::memcpy(x.row(i), data[i].x.data(), dx * sizeof(double));
        std::memcpy(y.row(i), data[i].y.data(), dy * sizeof(double));
    }
    return {std::move(x), std::move(y)};
}

double activation_eval(const ActivationKind& act, double z) {
    switch (act.kind) {
        case Activation::ReLU: return z > 0.0 ? z : 0.0;
        case Activation::ELU: return z > 0.0 ? z : act.alpha * (std::exp(z) - 1.0);
        case Activation::Tanh: return std::tanh(z);
        case Activation::Identity: return z;
    }
    throw config_error("unknown activation kind");
}

double activation_deriv(const ActivationKind& act, double z) {
    switch (act.kind) {
        case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
        case Activation::ELU: return z > 0.0 ? 1.0 : act.alpha * std::exp(z);
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::Identity: return 1.0;
    }
    throw config_error("unknown activation kind");
}

void validate_arch(const std::vector<LayerSpec>& specs) {
    if (specs.empty()) throw config_error("network needs at least one layer");
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].in_dim == 0 || specs[i].out_dim == 0)
            throw config_error("layer " + std::to_string(i) + " has a zero dimension");
        if (i > 0 && specs[i].in_dim != specs[i - 1].out_dim)
            throw config_error("layer " + std::to_string(i) + " expects input of size " +
                               std::to_string(specs[i].in_dim) + " but previous layer emits " +
                               std::to_string(specs[i - 1].out_dim));
    }
}

std::size_t param_count(const std::vector<LayerSpec>& specs) {
    std::size_t n = 0;
    for (const auto& s : specs) n += s.out_dim * (s.in_dim + 1);
    return n;
}

namespace {

// Reshape + zero-fill without shrinking capacity, so per-iteration reuse
// stays allocation-free.
void reset_matrix(Matrix& m, std::size_t rows, std::size_t cols) {
    m.rows = rows;
    m.cols = cols;
    m.data.assign(rows * cols, 0.0);
}

void validate_params_match(const std::vector<LayerSpec>& specs, const NetworkParams& params) {
    if (params.layers.size() != specs.size())
        throw config_error("parameter set has " + std::to_string(params.layers.size()) +
                           " layers but architecture has " + std::to_string(specs.size()));
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& l = params.layers[i];
        if (l.weights.rows != specs[i].out_dim || l.weights.cols != specs[i].in_dim ||
            l.bias.size() != specs[i].out_dim)
            throw config_error("layer " + std::to_string(i) + " parameters do not match its spec");
    }
}

} // namespace

NetworkParams init_params(const std::vector<LayerSpec>& specs, Rng& rng) {
    validate_arch(specs);
    NetworkParams params;
    params.layers.reserve(specs.size());
    for (const auto& s : specs) {
        const double a = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
        Layer layer{Matrix(s.out_dim, s.in_dim), Vector(s.out_dim, 0.0)};
        for (auto& w : layer.weights.data) w = -a + 2.0 * a * rng.uniform01();
        params.layers.push_back(std::move(layer));
    }
    return params;
}

Vector flatten(const NetworkParams& params) {
    std::size_t n = 0;
    for (const auto& l : params.layers) n += l.weights.data.size() + l.bias.size();
    Vector theta;
    theta.reserve(n);
    for (const auto& l : params.layers) {
        theta.insert(theta.end(), l.weights.data.begin(), l.weights.data.end());
        theta.insert(theta.end(), l.bias.begin(), l.bias.end());
    }
    return theta;
}

NetworkParams unflatten(const std::vector<LayerSpec>& specs, const Vector& theta) {
    validate_arch(specs);
    if (theta.size() != param_count(specs))
        throw config_error("flat parameter vector has " + std::to_string(theta.size()) +
                           " entries, architecture needs " + std::to_string(param_count(specs)));
    NetworkParams params;
    params.layers.reserve(specs.size());
    std::size_t off = 0;
    for (const auto& s : specs) {
        Layer layer{Matrix(s.out_dim, s.in_dim), Vector(s.out_dim)};
        std::memcpy(layer.weights.data.data(), theta.data() + off,
                    layer.weights.data.size() * sizeof(double));
        off += layer.weights.data.size();
        std::memcpy(layer.bias.data(), theta.data() + off, layer.bias.size() * sizeof(double));
        off += layer.bias.size();
        params.layers.push_back(std::move(layer));
    }
    return params;
}

Vector forward(const std::vector<LayerSpec>& specs, const NetworkParams& params,
               const Vector& x) {
    validate_arch(specs);
    validate_params_match(specs, params);
    if (x.size() != specs.front().in_dim)
        throw config_error("input has " + std::to_string(x.size()) + " entries, network expects " +
                           std::to_string(specs.front().in_dim));
    Vector a = x;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        Vector z = matvec(params.layers[i].weights, a);
        axpy(1.0, params.layers[i].bias, z);
        for (auto& v : z) v = activation_eval(specs[i].activation, v);
        a = std::move(z);
    }
    return a;
}

// --- batched engine -------------------------------------------------------

BatchEvaluator::BatchEvaluator(std::vector<LayerSpec> specs) : specs_(std::move(specs)) {
    validate_arch(specs_);
    std::size_t off = 0;
    for (const auto& s : specs_) {
        LayerView v{off, off + s.in_dim * s.out_dim, s.in_dim, s.out_dim, s.activation};
        off = v.b_off + s.out_dim;
        views_.push_back(v);
    }
    n_params_ = off;
    z_.resize(specs_.size());
    a_.resize(specs_.size());
    dz_.resize(specs_.size());
}

void BatchEvaluator::run_forward(const Vector& theta, const Matrix& x,
                                 const std::vector<Matrix>* masks) {
    if (theta.size() != n_params_)
        throw config_error("flat parameter vector has " + std::to_string(theta.size()) +
                           " entries, architecture needs " + std::to_string(n_params_));
    if (x.cols != specs_.front().in_dim)
        throw config_error("input batch has " + std::to_string(x.cols) +
                           " columns, network expects " + std::to_string(specs_.front().in_dim));
    if (masks && masks->size() != specs_.size() - 1)
        throw config_error("expected one dropout mask per non-output layer");

    const std::size_t n = x.rows;
    const Matrix* prev = &x;
    for (std::size_t l = 0; l < views_.size(); ++l) {
        const auto& v = views_[l];
        // z = prev * W^T + 1 b^T
        reset_matrix(scratch_t_, v.in, v.out);
        transpose_into(v.out, v.in, theta.data() + v.w_off, scratch_t_.data.data());
        reset_matrix(z_[l], n, v.out);
        gemm_accum(n, v.in, v.out, prev->data.data(), scratch_t_.data.data(), z_[l].data.data());
        const double* bias = theta.data() + v.b_off;
        for (std::size_t i = 0; i < n; ++i) {
            double* zi = z_[l].row(i);
            for (std::size_t j = 0; j < v.out; ++j) zi[j] += bias[j];
        }
        reset_matrix(a_[l], n, v.out);
        for (std::size_t i = 0; i < z_[l].data.size(); ++i)
            a_[l].data[i] = activation_eval(v.act, z_[l].data[i]);
        if (masks && l + 1 < views_.size()) {
            const Matrix& m = (*masks)[l];
            if (m.rows != n || m.cols != v.out)
                throw config_error("dropout mask " + std::to_string(l) + " has wrong shape");
            for (std::size_t i = 0; i < m.data.size(); ++i) a_[l].data[i] *= m.data[i];
        }
        prev = &a_[l];
    }
}

const Matrix& BatchEvaluator::forward(const Vector& theta, const Matrix& x,
                                      const std::vector<Matrix>* masks) {
    run_forward(theta, x, masks);
    return a_.back();
}

namespace {

double mse_from_pred(const Matrix& pred, const Matrix& y) {
    if (pred.rows != y.rows || pred.cols != y.cols)
        throw config_error("prediction and target batch shapes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double r = pred.data[i] - y.data[i];
        acc += r * r;
    }
    return acc / static_cast<double>(pred.rows);
}

} // namespace

double BatchEvaluator::loss(const Vector& theta, const Matrix& x, const Matrix& y,
                            const std::vector<Matrix>* masks) {
    run_forward(theta, x, masks);
    return mse_from_pred(a_.back(), y);
}

double BatchEvaluator::loss_grad(const Vector& theta, const Matrix& x, const Matrix& y,
                                 Vector& grad, const std::vector<Matrix>* masks) {
    run_forward(theta, x, masks);
    const double loss = mse_from_pred(a_.back(), y);
    const std::size_t n = x.rows;
    const std::size_t last = views_.size() - 1;

    grad.assign(n_params_, 0.0);

    // dz at the output layer: 2 (pred - y) / n, pushed through the activation.
    reset_matrix(dz_[last], n, views_[last].out);
    const double scale = 2.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < dz_[last].data.size(); ++i)
        dz_[last].data[i] = scale * (a_[last].data[i] - y.data[i]) *
                            activation_deriv(views_[last].act, z_[last].data[i]);

    for (std::size_t li = views_.size(); li-- > 0;) {
        const auto& v = views_[li];
        const Matrix& a_prev_m = (li == 0) ? x : a_[li - 1];

        // dW = dz^T * a_prev, db = column sums of dz
        reset_matrix(scratch_t_, v.out, n);
        transpose_into(n, v.out, dz_[li].data.data(), scratch_t_.data.data());
        gemm_accum(v.out, n, v.in, scratch_t_.data.data(), a_prev_m.data.data(),
                   grad.data() + v.w_off);
        double* db = grad.data() + v.b_off;
        for (std::size_t i = 0; i < n; ++i) {
            const double* dzi = dz_[li].row(i);
            for (std::size_t j = 0; j < v.out; ++j) db[j] += dzi[j];
        }

        if (li == 0) break;

        // dA_prev = dz * W, then dz_prev = dA_prev (.) mask (.) act'(z_prev)
        reset_matrix(dA_, n, v.in);
        gemm_accum(n, v.out, v.in, dz_[li].data.data(), theta.data() + v.w_off,
                   dA_.data.data());
        if (masks) {
            const Matrix& m = (*masks)[li - 1];
            for (std::size_t i = 0; i < dA_.data.size(); ++i) dA_.data[i] *= m.data[i];
        }
        reset_matrix(dz_[li - 1], n, v.in);
        const auto& act_prev = views_[li - 1].act;
        for (std::size_t i = 0; i < dA_.data.size(); ++i)
            dz_[li - 1].data[i] = dA_.data[i] * activation_deriv(act_prev, z_[li - 1].data[i]);
    }
    return loss;
}

double mse_loss(const std::vector<LayerSpec>& specs, const NetworkParams& params,
                const Dataset& data) {
    validate_params_match(specs, params);
    auto [x, y] = dataset_to_matrices(data);
    BatchEvaluator ev(specs);
    return ev.loss(flatten(params), x, y);
}

Vector backprop(const std::vector<LayerSpec>& specs, const NetworkParams& params,
                const Dataset& data) {
    validate_params_match(specs, params);
    auto [x, y] = dataset_to_matrices(data);
    BatchEvaluator ev(specs);
    Vector grad;
    ev.loss_grad(flatten(params), x, y, grad);
    return grad;
}

// --- autoencoder -----------------------------------------------------------

std::vector<LayerSpec> AutoencoderSpec::composed() const {
    if (encoder.empty() || decoder.empty())
        throw config_error("autoencoder needs non-empty encoder and decoder");
    if (encoder.back().out_dim != decoder.front().in_dim)
        throw config_error("encoder emits " + std::to_string(encoder.back().out_dim) +
                           " features but decoder expects " +
                           std::to_string(decoder.front().in_dim));
    std::vector<LayerSpec> all = encoder;
    all.insert(all.end(), decoder.begin(), decoder.end());
    validate_arch(all);
    return all;
}

std::size_t AutoencoderSpec::latent_dim() const {
    if (encoder.empty()) throw config_error("autoencoder needs non-empty encoder");
    return encoder.back().out_dim;
}

std::pair<Vector, Vector> autoencode_forward(const AutoencoderSpec& spec,
                                             const NetworkParams& params,
                                             const Vector& x) {
    const auto all = spec.composed();
    validate_params_match(all, params);
    if (x.size() != all.front().in_dim)
        throw config_error("input has " + std::to_string(x.size()) + " entries, network expects " +
                           std::to_string(all.front().in_dim));
    Vector a = x;
    Vector latent;
    for (std::size_t i = 0; i < all.size(); ++i) {
        Vector z = matvec(params.layers[i].weights, a);
        axpy(1.0, params.layers[i].bias, z);
        for (auto& v : z) v = activation_eval(all[i].activation, v);
        a = std::move(z);
        if (i + 1 == spec.encoder.size()) latent = a;
    }
    return {std::move(latent), std::move(a)};
}

// --- serialization ---------------------------------------------------------

namespace {

std::string activation_name(const ActivationKind& a) {
    switch (a.kind) {
        case Activation::ReLU: return "relu";
        case Activation::ELU: return "elu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    throw config_error("unknown activation kind");
}

ActivationKind activation_from_name(const std::string& name, double alpha) {
    if (name == "relu") return ActivationKind::relu();
    if (name == "elu") return ActivationKind::elu(alpha);
    if (name == "tanh") return ActivationKind::tanh();
    if (name == "identity") return ActivationKind::identity();
    throw input_error("unknown activation name: " + name);
}

} // namespace

nlohmann::json network_to_json(const std::vector<LayerSpec>& specs,
                               const NetworkParams& params) {
    validate_params_match(specs, params);
    nlohmann::json spec_arr = nlohmann::json::array();
    for (const auto& s : specs) {
        nlohmann::json layer{{"in", s.in_dim}, {"out", s.out_dim},
                             {"activation", activation_name(s.activation)}};
        if (s.activation.kind == Activation::ELU) layer["alpha"] = s.activation.alpha;
        spec_arr.push_back(std::move(layer));
    }
    return nlohmann::json{{"spec", std::move(spec_arr)}, {"flat_theta", flatten(params)}};
}

std::pair<std::vector<LayerSpec>, NetworkParams> network_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("spec") || !j.contains("flat_theta"))
        throw input_error("network json needs 'spec' and 'flat_theta'");
    std::vector<LayerSpec> specs;
    for (const auto& layer : j.at("spec")) {
        LayerSpec s;
        s.in_dim = layer.at("in").get<std::size_t>();
        s.out_dim = layer.at("out").get<std::size_t>();
        s.activation = activation_from_name(layer.at("activation").get<std::string>(),
                                            layer.value("alpha", 1.0));
        specs.push_back(s);
    }
    Vector theta = j.at("flat_theta").get<Vector>();
    NetworkParams params = unflatten(specs, theta);
    return {std::move(specs), std::move(params)};
}

} // namespace bfl1
