#include "bfl1/regularization.hpp"

#include <cmath>

#include "bfl1/errors.hpp"

namespace bfl1 {
namespace {

// Sign with s(0) = +1 (right-hand derivative of |.| at the kink).
inline double subgrad_sign(double x) { return x >= 0.0 ? 1.0 : -1.0; }

void require_weights(const RegStrategy& strategy, const RegState& state, std::size_t n) {
    if (!strategy.uses_weights()) return;
    if (state.weights.size() != n)
        throw config_error(reg_kind_name(strategy.kind) + ": state has " +
                           std::to_string(state.weights.size()) + " weights for " +
                           std::to_string(n) + " parameters");
}

void require_lf(const RegStrategy& strategy, std::size_t n) {
    if (!strategy.is_bifidelity()) return;
    if (strategy.theta_lf.size() != n)
        throw config_error(reg_kind_name(strategy.kind) + ": reference parameters have " +
                           std::to_string(strategy.theta_lf.size()) + " entries for " +
                           std::to_string(n) + " parameters");
}

} // namespace

std::string reg_kind_name(RegKind kind) {
    switch (kind) {
        case RegKind::None: return "none";
        case RegKind::L2: return "l2";
        case RegKind::Dropout: return "dropout";
        case RegKind::L1Standard: return "l1_standard";
        case RegKind::L1ReweightedHF: return "l1_reweighted_hf";
        case RegKind::L1BiFidelityDiff: return "l1_bifidelity_diff";
        case RegKind::L1BiFidelityWeighted: return "l1_bifidelity_weighted";
    }
    throw config_error("unknown regularization kind");
}

RegKind reg_kind_from_name(const std::string& name) {
    if (name == "none") return RegKind::None;
    if (name == "l2") return RegKind::L2;
    if (name == "dropout") return RegKind::Dropout;
    if (name == "l1_standard") return RegKind::L1Standard;
    if (name == "l1_reweighted_hf") return RegKind::L1ReweightedHF;
    if (name == "l1_bifidelity_diff") return RegKind::L1BiFidelityDiff;
    if (name == "l1_bifidelity_weighted") return RegKind::L1BiFidelityWeighted;
    throw config_error("unknown regularization kind: " + name);
}

RegStrategy RegStrategy::none() { return {}; }

RegStrategy RegStrategy::l2(double lambda) {
    RegStrategy s;
    s.kind = RegKind::L2;
    s.lambda = lambda;
    return s;
}

RegStrategy RegStrategy::dropout(double p) {
    RegStrategy s;
    s.kind = RegKind::Dropout;
    s.dropout_p = p;
    return s;
}

RegStrategy RegStrategy::l1(double lambda) {
    RegStrategy s;
    s.kind = RegKind::L1Standard;
    s.lambda = lambda;
    return s;
}

RegStrategy RegStrategy::l1_reweighted(double lambda, double eps_w) {
    RegStrategy s;
    s.kind = RegKind::L1ReweightedHF;
    s.lambda = lambda;
    s.eps_w = eps_w;
    return s;
}

RegStrategy RegStrategy::l1_bifidelity_diff(double lambda, Vector theta_lf) {
    RegStrategy s;
    s.kind = RegKind::L1BiFidelityDiff;
    s.lambda = lambda;
    s.theta_lf = std::move(theta_lf);
    return s;
}

RegStrategy RegStrategy::l1_bifidelity_weighted(double lambda, Vector theta_lf, double eps_w) {
    RegStrategy s;
    s.kind = RegKind::L1BiFidelityWeighted;
    s.lambda = lambda;
    s.eps_w = eps_w;
    s.theta_lf = std::move(theta_lf);
    return s;
}

void RegStrategy::validate(std::size_t n_params) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw config_error("regularization strength must be finite and >= 0");
    if (kind == RegKind::Dropout && !(dropout_p >= 0.0 && dropout_p < 1.0))
        throw config_error("dropout probability must lie in [0, 1)");
    if (uses_weights() && !(eps_w > 0.0))
        throw config_error("reweighting floor eps_w must be > 0");
    if (is_bifidelity() && theta_lf.size() != n_params)
        throw config_error("bi-fidelity strategy needs reference parameters of length " +
                           std::to_string(n_params) + ", got " +
                           std::to_string(theta_lf.size()));
}

RegState update_reweight_state(const RegStrategy& strategy, const Vector& theta_prev) {
    if (strategy.kind != RegKind::L1ReweightedHF)
        throw config_error("update_reweight_state only applies to " +
                           reg_kind_name(RegKind::L1ReweightedHF));
    if (!(strategy.eps_w > 0.0))
        throw config_error("reweighting floor eps_w must be > 0");
    RegState state;
    state.weights.resize(theta_prev.size());
    for (std::size_t i = 0; i < theta_prev.size(); ++i)
        state.weights[i] = 1.0 / (std::abs(theta_prev[i]) + strategy.eps_w);
    return state;
}

RegState bifidelity_weights(const Vector& theta_lf, double eps_w) {
    if (!(eps_w >= 0.0)) throw config_error("eps_w must be >= 0");
    RegState state;
    state.weights.resize(theta_lf.size());
    for (std::size_t i = 0; i < theta_lf.size(); ++i)
        state.weights[i] = 1.0 / (std::abs(theta_lf[i]) + eps_w);
    return state;
}

double penalty(const RegStrategy& strategy, const RegState& state, const Vector& theta) {
    require_lf(strategy, theta.size());
    require_weights(strategy, state, theta.size());
    switch (strategy.kind) {
        case RegKind::None:
        case RegKind::Dropout:
            return 0.0;
        case RegKind::L2:
            return strategy.lambda * l2_norm(theta);
        case RegKind::L1Standard:
            return strategy.lambda * l1_norm(theta);
        case RegKind::L1ReweightedHF:
        case RegKind::L1BiFidelityWeighted: {
            double acc = 0.0;
            for (std::size_t i = 0; i < theta.size(); ++i)
                acc += state.weights[i] * std::abs(theta[i]);
            return strategy.lambda * acc;
        }
        case RegKind::L1BiFidelityDiff: {
            double acc = 0.0;
            for (std::size_t i = 0; i < theta.size(); ++i)
                acc += std::abs(theta[i] - strategy.theta_lf[i]);
            return strategy.lambda * acc;
        }
    }
    throw config_error("unknown regularization kind");
}

Vector subgradient(const RegStrategy& strategy, const RegState& state, const Vector& theta) {
    require_lf(strategy, theta.size());
    require_weights(strategy, state, theta.size());
    Vector g(theta.size(), 0.0);
    switch (strategy.kind) {
        case RegKind::None:
        case RegKind::Dropout:
            return g;
        case RegKind::L2: {
            const double nrm = l2_norm(theta);
            if (nrm == 0.0) return g;
            for (std::size_t i = 0; i < theta.size(); ++i)
                g[i] = strategy.lambda * theta[i] / nrm;
            return g;
        }
        case RegKind::L1Standard:
            for (std::size_t i = 0; i < theta.size(); ++i)
                g[i] = strategy.lambda * subgrad_sign(theta[i]);
            return g;
        case RegKind::L1ReweightedHF:
        case RegKind::L1BiFidelityWeighted:
            for (std::size_t i = 0; i < theta.size(); ++i)
                g[i] = strategy.lambda * state.weights[i] * subgrad_sign(theta[i]);
            return g;
        case RegKind::L1BiFidelityDiff:
            for (std::size_t i = 0; i < theta.size(); ++i)
                g[i] = strategy.lambda * subgrad_sign(theta[i] - strategy.theta_lf[i]);
            return g;
    }
    throw config_error("unknown regularization kind");
}

Vector apply_dropout(const Vector& layer_output, double p, Rng& rng, bool training) {
    if (!(p >= 0.0 && p < 1.0))
        throw config_error("dropout probability must lie in [0, 1)");
    if (!training) return layer_output;
    Vector out(layer_output.size());
    const double keep_scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < layer_output.size(); ++i)
        out[i] = rng.uniform01() < p ? 0.0 : layer_output[i] * keep_scale;
    return out;
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double p, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0))
        throw config_error("dropout probability must lie in [0, 1)");
    Matrix m(rows, cols);
    const double keep_scale = 1.0 / (1.0 - p);
    for (auto& v : m.data) v = rng.uniform01() < p ? 0.0 : keep_scale;
    return m;
}

} // namespace bfl1
