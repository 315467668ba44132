#pragma once

#include <optional>
#include <vector>

#include "bfl1/network.hpp"

namespace bfl1 {

// Per-layer norms of a flat parameter vector. "Layer j" covers that layer's
// weight matrix and its bias. Optional fields are filled when the reference
// parameters / weights they need were supplied.
struct LayerNorms {
    double l1 = 0.0;      // sum of |theta_i| over the layer
    double max_abs = 0.0; // max |theta_i| over the layer
    std::optional<double> l1_weighted; // sum of w_i |theta_i|
    std::optional<double> l1_diff;     // sum of |theta_i - theta_lf_i|
    std::optional<double> l1_lf;       // sum of |theta_lf_i|
    std::optional<double> max_abs_lf;  // max |theta_lf_i|
};

struct LayerNormReport {
    std::vector<LayerNorms> layers;
    bool has_lf = false;
    bool has_weights = false;
};

LayerNormReport layer_l1_norms(const std::vector<LayerSpec>& specs, const Vector& theta,
                               const Vector* theta_lf = nullptr,
                               const Vector* weights = nullptr);

// Products over layers j of the per-layer growth factors:
//   k_std_hf = prod 2 L_j
//   k_wgt_hf = prod 2 L_w,j (max|theta_j| + eps_w)
//   k_std_bf = prod 2 (L_diff,j + L_lf,j)
//   k_wgt_bf = prod 2 L_w,j (max|theta_lf,j| + eps_w)
// Constants whose inputs were not in the report stay unset.
struct KReport {
    std::optional<double> k_std_hf;
    std::optional<double> k_wgt_hf;
    std::optional<double> k_std_bf;
    std::optional<double> k_wgt_bf;
};

KReport k_constants(const LayerNormReport& report, double eps_w);

// Unwraps one constant by name ("std_hf", "wgt_hf", "std_bf", "wgt_bf");
// throws config_error if its inputs were missing from the report.
double require_k(const KReport& report, const std::string& which);

} // namespace bfl1
