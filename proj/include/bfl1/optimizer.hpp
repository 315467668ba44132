#pragma once

#include <cstdint>
#include <utility>

#include "bfl1/linalg.hpp"

namespace bfl1 {

struct AdamConfig {
    double eta = 1e-4;    // step size
    double beta_m = 0.9;  // first-moment decay
    double beta_v = 0.999; // second-moment decay
    double eps = 1e-8;    // added inside the denominator: sqrt(v_hat) + eps

    void validate() const;
};

struct AdamState {
    Vector m;
    Vector v;
    std::uint64_t k = 0; // completed steps; bias correction uses k after increment

    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// theta - eta_k * g
Vector sgd_step(const Vector& theta, const Vector& g, double eta_k);

// One Adam update:
//   m <- b_m m + (1-b_m) g,   v <- b_v v + (1-b_v) g.g
//   m_hat = m / (1 - b_m^k),  v_hat = v / (1 - b_v^k)   (k counts from 1)
//   theta <- theta - eta * m_hat / (sqrt(v_hat) + eps)
void adam_step_inplace(Vector& theta, const Vector& g, const AdamConfig& config,
                       AdamState& state);

std::pair<Vector, AdamState> adam_step(const Vector& theta, const Vector& g,
                                       const AdamConfig& config, AdamState state);

// Elementwise sum of the data-loss gradient and the penalty subgradient.
Vector total_subgradient(const Vector& loss_grad, const Vector& reg_subgrad);

} // namespace bfl1
