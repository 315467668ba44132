#pragma once

#include <cstddef>
#include <string>

#include "bfl1/linalg.hpp"
#include "bfl1/rng.hpp"

namespace bfl1 {

enum class RegKind {
    None,
    L2,
    Dropout,
    L1Standard,
    L1ReweightedHF,
    L1BiFidelityDiff,
    L1BiFidelityWeighted,
};

std::string reg_kind_name(RegKind kind);
RegKind reg_kind_from_name(const std::string& name);

struct RegStrategy {
    RegKind kind = RegKind::None;
    double lambda = 0.0;
    double eps_w = 1e-5;    // reweighting floor for the weighted kinds
    double dropout_p = 0.0; // drop probability
    Vector theta_lf;        // reference parameters for the bi-fidelity kinds

    static RegStrategy none();
    static RegStrategy l2(double lambda);
    static RegStrategy dropout(double p);
    static RegStrategy l1(double lambda);
    static RegStrategy l1_reweighted(double lambda, double eps_w = 1e-5);
    static RegStrategy l1_bifidelity_diff(double lambda, Vector theta_lf);
    static RegStrategy l1_bifidelity_weighted(double lambda, Vector theta_lf,
                                              double eps_w = 1e-5);

    bool is_bifidelity() const {
        return kind == RegKind::L1BiFidelityDiff || kind == RegKind::L1BiFidelityWeighted;
    }
    bool uses_weights() const {
        return kind == RegKind::L1ReweightedHF || kind == RegKind::L1BiFidelityWeighted;
    }

    // Checks hyperparameters and, where applicable, that theta_lf matches the
    // parameter count.
    void validate(std::size_t n_params) const;
};

// Per-coordinate weights for the weighted kinds; empty for the others.
struct RegState {
    Vector weights;
};

// Weights 1 / (|theta_prev_i| + eps_w), refreshed each outer iteration of the
// reweighted scheme. Only meaningful for L1ReweightedHF.
RegState update_reweight_state(const RegStrategy& strategy, const Vector& theta_prev);

// Fixed weights 1 / (|theta_lf_i| + eps_w).
RegState bifidelity_weights(const Vector& theta_lf, double eps_w);

// Penalty value added to the data loss. Dropout and None contribute zero.
double penalty(const RegStrategy& strategy, const RegState& state, const Vector& theta);

// Subgradient of the penalty. Sign convention at zero: s(0) = +1, so the
// entry for a zero coordinate is +lambda (times its weight, if any). The l2
// penalty is non-smooth only at theta = 0, where the zero vector is returned.
Vector subgradient(const RegStrategy& strategy, const RegState& state, const Vector& theta);

// Inverted dropout on one layer output: entries are zeroed with probability p
// and survivors are scaled by 1/(1-p). When training is false the input is
// returned unchanged and no random draws are consumed.
Vector apply_dropout(const Vector& layer_output, double p, Rng& rng, bool training);

// Batched mask with entries in {0, 1/(1-p)}, drawn row-major.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double p, Rng& rng);

} // namespace bfl1
