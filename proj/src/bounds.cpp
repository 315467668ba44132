#include "bfl1/bounds.hpp"

#include <cmath>
#include <string>

namespace bfl1 {

LayerNormReport layer_l1_norms(const std::vector<LayerSpec>& specs, const Vector& theta,
                               const Vector* theta_lf, const Vector* weights) {
    validate_arch(specs);
    const std::size_t n = param_count(specs);
    if (theta.size() != n)
        throw config_error("layer_l1_norms: flat parameter vector has " +
                           std::to_string(theta.size()) + " entries, architecture needs " +
                           std::to_string(n));
    if (theta_lf && theta_lf->size() != n)
        throw config_error("layer_l1_norms: reference parameters have wrong length");
    if (weights && weights->size() != n)
        throw config_error("layer_l1_norms: weight vector has wrong length");

    LayerNormReport report;
    report.has_lf = theta_lf != nullptr;
    report.has_weights = weights != nullptr;

    std::size_t off = 0;
    for (const auto& s : specs) {
        const std::size_t len = s.out_dim * (s.in_dim + 1);
        LayerNorms norms;
        double l1w = 0.0, l1d = 0.0, l1lf = 0.0, maxlf = 0.0;
        for (std::size_t i = off; i < off + len; ++i) {
            const double a = std::abs(theta[i]);
            norms.l1 += a;
            norms.max_abs = std::max(norms.max_abs, a);
            if (weights) l1w += (*weights)[i] * a;
            if (theta_lf) {
                l1d += std::abs(theta[i] - (*theta_lf)[i]);
                l1lf += std::abs((*theta_lf)[i]);
                maxlf = std::max(maxlf, std::abs((*theta_lf)[i]));
            }
        }
        if (weights) norms.l1_weighted = l1w;
        if (theta_lf) {
            norms.l1_diff = l1d;
            norms.l1_lf = l1lf;
            norms.max_abs_lf = maxlf;
        }
        report.layers.push_back(norms);
        off += len;
    }
    return report;
}

KReport k_constants(const LayerNormReport& report, double eps_w) {
    if (report.layers.empty()) throw config_error("k_constants: empty norm report");
    if (!(eps_w > 0.0)) throw config_error("k_constants: eps_w must be > 0");

    KReport k;
    double std_hf = 1.0;
    for (const auto& l : report.layers) std_hf *= 2.0 * l.l1;
    k.k_std_hf = std_hf;

    if (report.has_weights) {
        double wgt_hf = 1.0;
        for (const auto& l : report.layers) wgt_hf *= 2.0 * *l.l1_weighted * (l.max_abs + eps_w);
        k.k_wgt_hf = wgt_hf;
    }
    if (report.has_lf) {
        double std_bf = 1.0;
        for (const auto& l : report.layers) std_bf *= 2.0 * (*l.l1_diff + *l.l1_lf);
        k.k_std_bf = std_bf;
    }
    if (report.has_weights && report.has_lf) {
        double wgt_bf = 1.0;
        for (const auto& l : report.layers) wgt_bf *= 2.0 * *l.l1_weighted * (*l.max_abs_lf + eps_w);
        k.k_wgt_bf = wgt_bf;
    }
    return k;
}

double require_k(const KReport& report, const std::string& which) {
    const std::optional<double>* slot = nullptr;
    if (which == "std_hf") slot = &report.k_std_hf;
    else if (which == "wgt_hf") slot = &report.k_wgt_hf;
    else if (which == "std_bf") slot = &report.k_std_bf;
    else if (which == "wgt_bf") slot = &report.k_wgt_bf;
    else throw config_error("unknown constant name: " + which);
    if (!slot->has_value())
        throw config_error("constant " + which +
                           " unavailable: norm report lacks the inputs it needs "
                           "(reference parameters and/or weights)");
    return **slot;
}

} // namespace bfl1
