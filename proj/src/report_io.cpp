#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "bfl1/harness.hpp"

namespace bfl1 {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw config_error(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key))
            throw config_error(where + ": unknown key '" + key + "'");
    }
}

std::string activation_label(const ActivationKind& a) {
    switch (a.kind) {
        case Activation::ReLU: return "relu";
        case Activation::ELU: return "elu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    throw config_error("unknown activation kind");
}

ActivationKind activation_from_label(const std::string& name, double alpha) {
    if (name == "relu") return ActivationKind::relu();
    if (name == "elu") return ActivationKind::elu(alpha);
    if (name == "tanh") return ActivationKind::tanh();
    if (name == "identity") return ActivationKind::identity();
    throw config_error("unknown activation name: " + name);
}

json arch_to_json(const std::vector<LayerSpec>& arch) {
    if (arch.empty()) throw config_error("empty architecture");
    json hidden = json::array();
    const ActivationKind* hidden_act = nullptr;
    for (std::size_t i = 0; i + 1 < arch.size(); ++i) {
        hidden.push_back(arch[i].out_dim);
        if (!hidden_act) hidden_act = &arch[i].activation;
        else if (!(*hidden_act == arch[i].activation))
            throw config_error("config arch expects one shared hidden activation");
    }
    json out{{"input", arch.front().in_dim},
             {"hidden", std::move(hidden)},
             {"output", arch.back().out_dim},
             {"hidden_activation",
              hidden_act ? activation_label(*hidden_act) : std::string("elu")},
             {"output_activation", activation_label(arch.back().activation)}};
    double alpha = 1.0;
    if (hidden_act && hidden_act->kind == Activation::ELU) alpha = hidden_act->alpha;
    else if (arch.back().activation.kind == Activation::ELU) alpha = arch.back().activation.alpha;
    out["elu_alpha"] = alpha;
    return out;
}

std::vector<LayerSpec> arch_from_json(const json& j) {
    check_keys(j, {"input", "hidden", "output", "hidden_activation", "output_activation",
                   "elu_alpha"},
               "arch");
    const auto input = j.at("input").get<std::size_t>();
    const auto output = j.at("output").get<std::size_t>();
    const double alpha = j.value("elu_alpha", 1.0);
    const ActivationKind hidden_act =
        activation_from_label(j.value("hidden_activation", std::string("elu")), alpha);
    const ActivationKind output_act =
        activation_from_label(j.value("output_activation", std::string("identity")), alpha);
    std::vector<LayerSpec> arch;
    std::size_t prev = input;
    if (j.contains("hidden"))
        for (const auto& h : j.at("hidden")) {
            arch.push_back({prev, h.get<std::size_t>(), hidden_act});
            prev = arch.back().out_dim;
        }
    arch.push_back({prev, output, output_act});
    validate_arch(arch);
    return arch;
}

json strategy_plan_to_json(const StrategyPlan& plan) {
    json out{{"kind", reg_kind_name(plan.kind)}};
    if (plan.kind == RegKind::Dropout) {
        out["dropout_p"] = plan.dropout_p;
    } else if (plan.kind != RegKind::None) {
        out["lambda_grid"] = plan.lambdas;
    }
    if (plan.kind == RegKind::L1ReweightedHF || plan.kind == RegKind::L1BiFidelityWeighted)
        out["eps_w"] = plan.eps_w;
    return out;
}

StrategyPlan strategy_plan_from_json(const json& j) {
    check_keys(j, {"kind", "lambda_grid", "dropout_p", "eps_w"}, "strategy");
    StrategyPlan plan;
    plan.kind = reg_kind_from_name(j.at("kind").get<std::string>());
    if (j.contains("lambda_grid")) {
        if (plan.kind == RegKind::None || plan.kind == RegKind::Dropout)
            throw config_error("strategy " + reg_kind_name(plan.kind) +
                               " does not take a lambda grid");
        plan.lambdas = j.at("lambda_grid").get<std::vector<double>>();
    }
    if (j.contains("dropout_p")) {
        if (plan.kind != RegKind::Dropout)
            throw config_error("dropout_p only applies to the dropout strategy");
        plan.dropout_p = j.at("dropout_p").get<double>();
    }
    if (j.contains("eps_w")) plan.eps_w = j.at("eps_w").get<double>();
    return plan;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_edge(double v) {
    if (std::isinf(v)) return "inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

json opt_to_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

} // namespace

nlohmann::json experiment_spec_to_json(const ExperimentSpec& spec) {
    json strategies = json::array();
    for (const auto& plan : spec.strategies) strategies.push_back(strategy_plan_to_json(plan));
    json j{
        {"problem", problem_name(spec.problem)},
        {"arch", arch_to_json(spec.arch)},
        {"strategies", std::move(strategies)},
        {"counts",
         {{"N_l", spec.n_lo},
          {"N_h", spec.n_hi},
          {"N_val", spec.n_val},
          {"R", spec.replications},
          {"inits", spec.inits}}},
        {"optimizer",
         {{"eta", spec.adam.eta},
          {"beta_m", spec.adam.beta_m},
          {"beta_v", spec.adam.beta_v},
          {"eps", spec.adam.eps},
          {"iters", spec.iters},
          {"eval_every", spec.eval_every},
          {"batch_size", spec.batch_size}}},
        {"lofi",
         {{"lambda", spec.lofi_lambda},
          {"iters", spec.lofi_iters},
          {"inits", spec.lofi_inits},
          {"batch_size", spec.lofi_batch},
          {"share", spec.share_lofi}}},
        {"data",
         {{"beam_n_elems", spec.data.beam_n_elems},
          {"nozzle_grid_lo", spec.data.nozzle_grid_lo},
          {"nozzle_grid_hi", spec.data.nozzle_grid_hi}}},
        {"seed", spec.seed},
        {"scale", spec.scale},
    };
    return j;
}

ExperimentSpec experiment_spec_from_json(const nlohmann::json& j) {
    check_keys(j, {"problem", "arch", "strategies", "counts", "optimizer", "lofi", "data",
                   "seed", "scale"},
               "config");
    ExperimentSpec spec;
    spec.problem = problem_from_name(j.at("problem").get<std::string>());
    spec.arch = arch_from_json(j.at("arch"));

    spec.strategies.clear();
    for (const auto& s : j.at("strategies"))
        spec.strategies.push_back(strategy_plan_from_json(s));

    const json& counts = j.at("counts");
    check_keys(counts, {"N_l", "N_h", "N_val", "R", "inits"}, "counts");
    spec.n_lo = counts.at("N_l").get<std::size_t>();
    spec.n_hi = counts.at("N_h").get<std::size_t>();
    spec.n_val = counts.at("N_val").get<std::size_t>();
    spec.replications = counts.at("R").get<std::size_t>();
    spec.inits = counts.at("inits").get<std::size_t>();

    const json& opt = j.at("optimizer");
    check_keys(opt, {"eta", "beta_m", "beta_v", "eps", "iters", "eval_every", "batch_size"},
               "optimizer");
    spec.adam.eta = opt.value("eta", spec.adam.eta);
    spec.adam.beta_m = opt.value("beta_m", spec.adam.beta_m);
    spec.adam.beta_v = opt.value("beta_v", spec.adam.beta_v);
    spec.adam.eps = opt.value("eps", spec.adam.eps);
    spec.iters = opt.at("iters").get<std::size_t>();
    spec.eval_every = opt.value("eval_every", std::size_t{1});
    spec.batch_size = opt.value("batch_size", std::size_t{0});

    if (j.contains("lofi")) {
        const json& lofi = j.at("lofi");
        check_keys(lofi, {"lambda", "iters", "inits", "batch_size", "share"}, "lofi");
        spec.lofi_lambda = lofi.value("lambda", spec.lofi_lambda);
        spec.lofi_iters = lofi.value("iters", spec.lofi_iters);
        spec.lofi_inits = lofi.value("inits", spec.lofi_inits);
        spec.lofi_batch = lofi.value("batch_size", spec.lofi_batch);
        spec.share_lofi = lofi.value("share", spec.share_lofi);
    }
    if (j.contains("data")) {
        const json& data = j.at("data");
        check_keys(data, {"beam_n_elems", "nozzle_grid_lo", "nozzle_grid_hi"}, "data");
        spec.data.beam_n_elems = data.value("beam_n_elems", spec.data.beam_n_elems);
        spec.data.nozzle_grid_lo = data.value("nozzle_grid_lo", spec.data.nozzle_grid_lo);
        spec.data.nozzle_grid_hi = data.value("nozzle_grid_hi", spec.data.nozzle_grid_hi);
    }
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.scale = j.value("scale", std::string("desk"));
    return spec;
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw config_error("override must look like path.to.key=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    std::vector<std::string> tokens;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        tokens.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    for (const auto& t : tokens)
        if (t.empty()) throw config_error("override has an empty path segment: " + assignment);

    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw; // bare strings are allowed unquoted
    }

    json* cur = &config;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        const std::string& tok = tokens[i];
        if (cur->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(tok);
            } catch (const std::exception&) {
                throw config_error("override path segment '" + tok + "' is not an array index");
            }
            if (idx >= cur->size())
                throw config_error("override index " + tok + " out of range");
            cur = &(*cur)[idx];
        } else {
            cur = &(*cur)[tok];
        }
    }
    const std::string& last = tokens.back();
    if (cur->is_array()) {
        std::size_t idx = 0;
        try {
            idx = std::stoul(last);
        } catch (const std::exception&) {
            throw config_error("override path segment '" + last + "' is not an array index");
        }
        if (idx >= cur->size()) throw config_error("override index " + last + " out of range");
        (*cur)[idx] = value;
    } else {
        (*cur)[last] = value;
    }
}

namespace {

json k_to_json(const KReport& k) {
    return json{{"std_hf", opt_to_json(k.k_std_hf)},
                {"wgt_hf", opt_to_json(k.k_wgt_hf)},
                {"std_bf", opt_to_json(k.k_std_bf)},
                {"wgt_bf", opt_to_json(k.k_wgt_bf)}};
}

json norms_to_json(const LayerNormReport& norms) {
    json layers = json::array();
    for (const auto& n : norms.layers) {
        json l{{"l1", n.l1}, {"max_abs", n.max_abs}};
        if (n.l1_weighted) l["l1_weighted"] = *n.l1_weighted;
        if (n.l1_diff) l["l1_diff"] = *n.l1_diff;
        if (n.l1_lf) l["l1_lf"] = *n.l1_lf;
        if (n.max_abs_lf) l["max_abs_lf"] = *n.max_abs_lf;
        layers.push_back(std::move(l));
    }
    return json{{"layers", std::move(layers)}};
}

json rep_to_json(const ReplicationResult& r) {
    json j{{"replication", r.replication},
           {"lambda", r.lambda},
           {"failed", r.failed}};
    if (r.failed) {
        j["eps_v"] = nullptr;
        j["diverged_inits"] = r.diverged_inits;
        return j;
    }
    j["eps_v"] = r.eps_v;
    j["best_init"] = r.best_init;
    j["best_iter"] = r.best_iter;
    j["final_loss"] = r.final_loss;
    j["diverged_inits"] = r.diverged_inits;
    j["small_frac"] = r.small_frac;
    j["k"] = k_to_json(r.k);
    j["layer_norms"] = norms_to_json(r.norms);
    j["hist"] = r.hist;
    return j;
}

// The canonical constant each strategy's networks support.
const char* k_slot_for(RegKind kind) {
    switch (kind) {
        case RegKind::L1Standard: return "std_hf";
        case RegKind::L1ReweightedHF: return "wgt_hf";
        case RegKind::L1BiFidelityDiff: return "std_bf";
        case RegKind::L1BiFidelityWeighted: return "wgt_bf";
        default: return nullptr;
    }
}

const std::optional<double>& k_field(const KReport& k, const std::string& slot) {
    if (slot == "std_hf") return k.k_std_hf;
    if (slot == "wgt_hf") return k.k_wgt_hf;
    if (slot == "std_bf") return k.k_std_bf;
    return k.k_wgt_bf;
}

} // namespace

nlohmann::json report_to_json(const ExperimentReport& report) {
    json strategies = json::array();
    for (const auto& sr : report.strategies) {
        json grid = json::array();
        for (const auto& g : sr.grid) {
            grid.push_back({{"lambda", g.lambda},
                            {"mean_eps_v", std::isfinite(g.mean_eps_v)
                                               ? json(g.mean_eps_v)
                                               : json(nullptr)},
                            {"failed_reps", g.failed_reps}});
        }
        json reps = json::array();
        for (const auto& r : sr.reps) reps.push_back(rep_to_json(r));
        json s{{"name", sr.name},
               {"lambda_star", sr.lambda_star},
               {"grid", std::move(grid)},
               {"replications", std::move(reps)},
               {"failed_reps", sr.failed_reps},
               {"all_failed", sr.all_failed}};
        if (!sr.all_failed) {
            s["eps_v_mean"] = sr.eps_v_mean;
            s["eps_v_std"] = sr.eps_v_std;
            s["small_frac_mean"] = sr.small_frac_mean;
        } else {
            s["eps_v_mean"] = nullptr;
            s["eps_v_std"] = nullptr;
            s["small_frac_mean"] = nullptr;
        }
        if (sr.plan.kind == RegKind::Dropout) s["dropout_p"] = sr.plan.dropout_p;
        if (sr.plan.kind == RegKind::L1BiFidelityDiff && sr.plan.lambdas.size() > 1)
            s["diff_norm_inversions"] = sr.diff_norm_inversions;
        strategies.push_back(std::move(s));
    }

    // One summary entry per constant, taken from the strategy whose training
    // scheme that constant describes.
    json ksum = json::object();
    for (const char* slot : {"std_hf", "wgt_hf", "std_bf", "wgt_bf"}) ksum[slot] = nullptr;
    for (const auto& sr : report.strategies) {
        const char* slot = k_slot_for(sr.plan.kind);
        if (!slot || sr.all_failed) continue;
        json values = json::array();
        double acc = 0.0;
        std::size_t count = 0;
        for (const auto& r : sr.reps) {
            if (r.failed) {
                values.push_back(nullptr);
                continue;
            }
            const auto& v = k_field(r.k, slot);
            values.push_back(opt_to_json(v));
            if (v) {
                acc += *v;
                ++count;
            }
        }
        ksum[slot] = json{{"strategy", sr.name},
                          {"mean", count ? json(acc / static_cast<double>(count)) : json(nullptr)},
                          {"values", std::move(values)}};
    }

    json lofi{{"trained", report.lofi.trained}, {"shared", report.lofi.shared}};
    lofi["final_loss"] = report.lofi.final_loss;
    lofi["init_index"] = report.lofi.init_index;

    return json{{"config", experiment_spec_to_json(report.spec)},
                {"lofi", std::move(lofi)},
                {"strategies", std::move(strategies)},
                {"k_summary", std::move(ksum)}};
}

std::string report_flat_csv(const ExperimentReport& report) {
    std::string out =
        "strategy,lambda,replication,failed,eps_v,best_init,best_iter,final_loss,"
        "diverged_inits,small_frac\n";
    for (const auto& sr : report.strategies) {
        for (const auto& r : sr.reps) {
            out += sr.name;
            out += ',';
            out += fmt(r.lambda);
            out += ',';
            out += std::to_string(r.replication);
            out += ',';
            out += r.failed ? "1" : "0";
            out += ',';
            out += r.failed ? "nan" : fmt(r.eps_v);
            out += ',';
            out += std::to_string(r.best_init);
            out += ',';
            out += std::to_string(r.best_iter);
            out += ',';
            out += r.failed ? "nan" : fmt(r.final_loss);
            out += ',';
            out += std::to_string(r.diverged_inits);
            out += ',';
            out += r.failed ? "nan" : fmt(r.small_frac);
            out += '\n';
        }
    }
    return out;
}

std::string report_histogram_csv(const ExperimentReport& report) {
    std::string out = "strategy,replication,bin_lo,bin_hi,count\n";
    for (const auto& sr : report.strategies) {
        for (const auto& r : sr.reps) {
            if (r.failed) continue;
            for (std::size_t b = 0; b < r.hist.size(); ++b) {
                out += sr.name;
                out += ',';
                out += std::to_string(r.replication);
                out += ',';
                out += fmt_edge(kSparsityBinEdges[b]);
                out += ',';
                out += fmt_edge(kSparsityBinEdges[b + 1]);
                out += ',';
                out += std::to_string(r.hist[b]);
                out += '\n';
            }
        }
    }
    return out;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
        if (ec) throw input_error("cannot create directory for " + path + ": " + ec.message());
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw input_error("cannot open for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw input_error("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw input_error("cannot rename " + tmp.string() + " -> " + path + ": " + ec.message());
}

} // namespace bfl1
