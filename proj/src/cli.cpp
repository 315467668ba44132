#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "bfl1/cli.hpp"
#include "bfl1/harness.hpp"

namespace bfl1 {
namespace {

constexpr const char* kVersion = "0.1.0";

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw input_error(path + ": " + e.what());
    }
}

std::string utc_now_string() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// report.json is the deterministic artifact; wall-clock facts go to the
// sidecar so byte comparison of reports stays meaningful.
void write_report_bundle(const ExperimentReport& report, const std::string& out_dir,
                         double seconds, std::size_t jobs) {
    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    const fs::path report_path = dir / "report.json";
    write_text_atomic(report_path.string(), report_to_json(report).dump(2) + "\n");
    write_text_atomic((dir / "report_flat.csv").string(), report_flat_csv(report));
    write_text_atomic((dir / "report_hist.csv").string(), report_histogram_csv(report));

    nlohmann::json meta{{"runtime_seconds", seconds},
                        {"jobs", jobs},
                        {"written_at", utc_now_string()}};
    write_text_atomic((dir / "report.meta.json").string(), meta.dump(2) + "\n");
    std::cout << fs::absolute(report_path).string() << "\n";
}

void run_experiment_json(nlohmann::json config, const std::vector<std::string>& overrides,
                         const std::string& out_dir, std::size_t jobs) {
    for (const auto& assignment : overrides) apply_override(config, assignment);
    ExperimentSpec spec = experiment_spec_from_json(config);
    spec.jobs = jobs;

    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentReport report = run_replications(spec);
    const double seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    write_report_bundle(report, out_dir, seconds, jobs);
}

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"training with l1-regularization toward low-fidelity surrogates"};
    app.require_subcommand(1);

    // generate-data <problem>
    std::string gen_problem;
    std::size_t gen_n_lo = 0, gen_n_hi = 0, gen_n_val = 0;
    std::uint64_t gen_seed = 0;
    std::string gen_out = ".";
    DatasetOptions gen_opts;
    auto* gen = app.add_subcommand("generate-data", "draw bi-fidelity datasets and write CSVs");
    gen->add_option("problem", gen_problem, "beam or nozzle")->required();
    gen->add_option("--n-lo", gen_n_lo, "low-fidelity sample count")->required();
    gen->add_option("--n-hi", gen_n_hi, "high-fidelity sample count")->required();
    gen->add_option("--n-val", gen_n_val, "validation sample count")->required();
    gen->add_option("--seed", gen_seed, "root RNG seed")->capture_default_str();
    gen->add_option("--out-dir", gen_out, "output directory")->capture_default_str();
    gen->add_option("--beam-elems", gen_opts.beam_n_elems, "beam high-fidelity elements")->capture_default_str();
    gen->add_option("--grid-lo", gen_opts.nozzle_grid_lo, "nozzle coarse grid points")->capture_default_str();
    gen->add_option("--grid-hi", gen_opts.nozzle_grid_hi, "nozzle fine grid points")->capture_default_str();
    bool gen_bundle = false;
    gen->add_flag("--bundle", gen_bundle, "also write a single JSON bundle with meta");

    // train / sweep --config
    std::string cfg_path;
    std::vector<std::string> overrides;
    std::string out_dir = ".";
    std::size_t jobs = 1;
    auto add_run_options = [&](CLI::App* cmd, bool takes_config) {
        if (takes_config)
            cmd->add_option("--config", cfg_path, "experiment config JSON")
                ->required()
                ->check(CLI::ExistingFile);
        cmd->add_option("--set", overrides, "dotted.path=value config override")->type_size(1);
        cmd->add_option("--out-dir", out_dir, "output directory")->capture_default_str();
        cmd->add_option("--jobs", jobs, "parallel replication workers")
            ->capture_default_str()
            ->check(CLI::Range(std::size_t{1}, std::size_t{1024}));
    };
    auto* train = app.add_subcommand(
        "train", "run a config whose strategies each carry a single lambda");
    add_run_options(train, true);
    auto* sweep = app.add_subcommand(
        "sweep", "run a config with lambda grids and per-strategy selection");
    add_run_options(sweep, true);

    // reproduce <problem>
    std::string rep_problem, rep_scale = "desk";
    std::uint64_t rep_seed = 0;
    auto* rep = app.add_subcommand("reproduce", "run a built-in study end to end");
    rep->add_option("problem", rep_problem, "beam or nozzle")->required();
    rep->add_option("--scale", rep_scale, "desk or paper")->capture_default_str();
    rep->add_option("--seed", rep_seed, "root RNG seed")->required();
    add_run_options(rep, false);

    // bounds-report --params
    std::string bp_params, bp_lf, bp_out;
    double bp_eps_w = 1e-5;
    auto* bounds = app.add_subcommand("bounds-report",
                                      "layer norms and growth constants of a parameter dump");
    bounds->add_option("--params", bp_params, "network dump JSON")
        ->required()
        ->check(CLI::ExistingFile);
    bounds->add_option("--theta-lf", bp_lf, "low-fidelity network dump JSON")
        ->check(CLI::ExistingFile);
    bounds->add_option("--eps-w", bp_eps_w, "reweighting floor")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    bounds->add_option("--out", bp_out, "write the JSON here instead of stdout");

    auto* version = app.add_subcommand("version", "print the version and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, std::cout, std::cerr);
        return code == 0 ? 0 : 1;
    }

    if (app.got_subcommand(version)) {
        std::cout << "bfl1 " << kVersion << "\n";
        return 0;
    }

    if (app.got_subcommand(gen)) {
        const Problem problem = problem_from_name(gen_problem);
        const auto sets = generate_bifidelity_dataset(problem, gen_n_lo, gen_n_hi, gen_n_val,
                                                      Rng(gen_seed), gen_opts);
        namespace fs = std::filesystem;
        const fs::path dir(gen_out);
        std::error_code ec;
        fs::create_directories(dir, ec);
        const std::string stem = problem_name(problem);
        for (const auto& [tag, data] :
             {std::pair<const char*, const Dataset*>{"lo", &sets.lo},
              {"hi", &sets.hi},
              {"val", &sets.val}}) {
            const fs::path path = dir / (stem + "_" + tag + ".csv");
            write_dataset_csv(path.string(), *data, problem);
            std::cout << fs::absolute(path).string() << "\n";
        }
        if (gen_bundle) {
            const fs::path path = dir / (stem + "_bundle.json");
            write_text_atomic(path.string(), dataset_bundle_to_json(sets).dump(2) + "\n");
            std::cout << fs::absolute(path).string() << "\n";
        }
        return 0;
    }

    if (app.got_subcommand(train) || app.got_subcommand(sweep)) {
        nlohmann::json config = load_json_file(cfg_path);
        if (app.got_subcommand(train)) {
            // train means "this exact configuration": grids belong to sweep.
            ExperimentSpec probe = experiment_spec_from_json(config);
            for (const auto& plan : probe.strategies)
                if (plan.kind != RegKind::None && plan.kind != RegKind::Dropout &&
                    plan.lambdas.size() != 1)
                    throw config_error("train expects one lambda per strategy; '" +
                                       reg_kind_name(plan.kind) +
                                       "' has a grid (use sweep)");
        }
        run_experiment_json(std::move(config), overrides, out_dir, jobs);
        return 0;
    }

    if (app.got_subcommand(rep)) {
        const Problem problem = problem_from_name(rep_problem);
        const Scale scale = scale_from_name(rep_scale);
        const ExperimentSpec base = problem == Problem::Beam
                                        ? beam_experiment(scale, rep_seed)
                                        : nozzle_experiment(scale, rep_seed);
        run_experiment_json(experiment_spec_to_json(base), overrides, out_dir, jobs);
        return 0;
    }

    if (app.got_subcommand(bounds)) {
        const auto [specs, params] = network_from_json(load_json_file(bp_params));
        const Vector theta = flatten(params);

        Vector theta_lf;
        if (!bp_lf.empty()) {
            const auto [lf_specs, lf_params] = network_from_json(load_json_file(bp_lf));
            if (!(lf_specs == specs))
                throw input_error("--theta-lf architecture differs from --params");
            theta_lf = flatten(lf_params);
        }

        // wgt_hf weighs theta by its own magnitudes; wgt_bf by the
        // low-fidelity ones. Two norm passes keep the two weightings apart.
        const Vector self_weights = bifidelity_weights(theta, bp_eps_w).weights;
        const LayerNormReport norms = layer_l1_norms(
            specs, theta, theta_lf.empty() ? nullptr : &theta_lf, &self_weights);
        KReport k = k_constants(norms, bp_eps_w);
        if (!theta_lf.empty()) {
            const Vector lf_weights = bifidelity_weights(theta_lf, bp_eps_w).weights;
            const LayerNormReport lf_norms =
                layer_l1_norms(specs, theta, &theta_lf, &lf_weights);
            k.k_wgt_bf = k_constants(lf_norms, bp_eps_w).k_wgt_bf;
        }

        nlohmann::json out{{"eps_w", bp_eps_w},
                           {"k",
                            {{"std_hf", k.k_std_hf ? nlohmann::json(*k.k_std_hf) : nullptr},
                             {"wgt_hf", k.k_wgt_hf ? nlohmann::json(*k.k_wgt_hf) : nullptr},
                             {"std_bf", k.k_std_bf ? nlohmann::json(*k.k_std_bf) : nullptr},
                             {"wgt_bf", k.k_wgt_bf ? nlohmann::json(*k.k_wgt_bf) : nullptr}}}};
        nlohmann::json layers = nlohmann::json::array();
        for (const auto& n : norms.layers) {
            nlohmann::json l{{"l1", n.l1}, {"max_abs", n.max_abs}};
            if (n.l1_weighted) l["l1_weighted"] = *n.l1_weighted;
            if (n.l1_diff) l["l1_diff"] = *n.l1_diff;
            if (n.l1_lf) l["l1_lf"] = *n.l1_lf;
            if (n.max_abs_lf) l["max_abs_lf"] = *n.max_abs_lf;
            layers.push_back(std::move(l));
        }
        out["layer_norms"] = std::move(layers);

        const std::string text = out.dump(2) + "\n";
        if (bp_out.empty()) {
            std::cout << text;
        } else {
            write_text_atomic(bp_out, text);
            std::cout << std::filesystem::absolute(bp_out).string() << "\n";
        }
        return 0;
    }

    return 1; // unreachable: require_subcommand(1)
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    try {
        return dispatch(argc, argv);
    } catch (const divergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace bfl1
