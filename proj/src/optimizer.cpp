#include "bfl1/optimizer.hpp"

#include <cmath>
#include <string>

#include "bfl1/errors.hpp"

namespace bfl1 {

void AdamConfig::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta))
        throw config_error("adam: step size must be finite and > 0");
    if (!(beta_m >= 0.0 && beta_m < 1.0))
        throw config_error("adam: beta_m must lie in [0, 1)");
    if (!(beta_v >= 0.0 && beta_v < 1.0))
        throw config_error("adam: beta_v must lie in [0, 1)");
    if (!(eps > 0.0))
        throw config_error("adam: eps must be > 0");
}

Vector sgd_step(const Vector& theta, const Vector& g, double eta_k) {
    if (theta.size() != g.size())
        throw config_error("sgd_step: parameter and gradient sizes differ");
    Vector out = theta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= eta_k * g[i];
    return out;
}

void adam_step_inplace(Vector& theta, const Vector& g, const AdamConfig& config,
                       AdamState& state) {
    config.validate();
    if (state.m.empty() && state.v.empty() && state.k == 0) {
        state.m.assign(theta.size(), 0.0);
        state.v.assign(theta.size(), 0.0);
    }
    if (theta.size() != g.size() || theta.size() != state.m.size() ||
        theta.size() != state.v.size())
        throw config_error("adam_step: parameter, gradient and state sizes differ");

    state.k += 1;
    const double bm = config.beta_m;
    const double bv = config.beta_v;
    const double m_corr = 1.0 - std::pow(bm, static_cast<double>(state.k));
    const double v_corr = 1.0 - std::pow(bv, static_cast<double>(state.k));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        state.m[i] = bm * state.m[i] + (1.0 - bm) * g[i];
        state.v[i] = bv * state.v[i] + (1.0 - bv) * g[i] * g[i];
        const double m_hat = state.m[i] / m_corr;
        const double v_hat = state.v[i] / v_corr;
        theta[i] -= config.eta * m_hat / (std::sqrt(v_hat) + config.eps);
    }
}

std::pair<Vector, AdamState> adam_step(const Vector& theta, const Vector& g,
                                       const AdamConfig& config, AdamState state) {
    Vector out = theta;
    adam_step_inplace(out, g, config, state);
    return {std::move(out), std::move(state)};
}

Vector total_subgradient(const Vector& loss_grad, const Vector& reg_subgrad) {
    if (loss_grad.size() != reg_subgrad.size())
        throw config_error("total_subgradient: size mismatch " +
                           std::to_string(loss_grad.size()) + " vs " +
                           std::to_string(reg_subgrad.size()));
    Vector out = loss_grad;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += reg_subgrad[i];
    return out;
}

} // namespace bfl1
