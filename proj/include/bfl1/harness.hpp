#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bfl1/bounds.hpp"
#include "bfl1/models.hpp"
#include "bfl1/network.hpp"
#include "bfl1/optimizer.hpp"
#include "bfl1/regularization.hpp"

namespace bfl1 {

// || stacked(y_true - y_pred) ||_2 / || stacked(y_true) ||_2
double relative_rmse(const std::vector<Vector>& y_true, const std::vector<Vector>& y_pred);

// Affine per-coordinate transform x -> (x - mean) / scale. Scales below
// 1e-12 are replaced by 1 so constant coordinates pass through centered.
struct Standardizer {
    Vector x_mean, x_scale, y_mean, y_scale;

    static Standardizer identity(std::size_t dx, std::size_t dy);
    // Beam inputs use the analytic moments of their sampling ranges; output
    // statistics come from ref (mean and population std of each column).
    static Standardizer beam(const Dataset& ref);

    Dataset apply(const Dataset& data) const;
    Matrix apply_x(const Matrix& x) const;
    void unstandardize_y_rows(Matrix& y) const;
};

struct TrainConfig {
    std::vector<LayerSpec> arch;
    RegStrategy strategy;
    AdamConfig adam;
    std::size_t iters = 5000;
    std::size_t eval_every = 1; // validation cadence in iterations
    std::size_t batch_size = 0; // 0 = full batch; otherwise drawn uniformly per iteration
};

struct TrainResult {
    Vector best_theta;
    double best_eps_v = 0.0;
    std::size_t best_iter = 0;
    double final_loss = 0.0;     // data term at the last completed iteration
    std::vector<std::size_t> eval_iters;
    std::vector<double> eps_trace;
    bool diverged = false;       // loss became non-finite; training aborted
    RegState final_state;        // reweighting state after the last iteration
};

// Subgradient descent with Adam. eval maps a flat parameter vector to the
// validation error; it is called on the initial parameters and then every
// eval_every iterations, and the best iterate seen is kept. When eval is
// empty the last iterate wins instead. rng feeds dropout masks and
// mini-batch draws only.
TrainResult train(const TrainConfig& config, const Dataset& train_data,
                  const std::function<double(const Vector&)>& eval,
                  const Vector& theta_init, Rng rng);

struct LofiResult {
    Vector theta;
    double final_loss = 0.0;
    std::size_t init_index = 0;
    std::size_t diverged_inits = 0;
};

// Trains `inits` candidate networks on the low-fidelity set and keeps the
// one with the lowest final training loss. batch = 0 trains full-batch,
// otherwise each iteration draws that many samples. Throws divergence_error
// if every initialization diverges.
LofiResult train_lofi_network(const std::vector<LayerSpec>& arch, const Dataset& lo_data,
                              double lambda, const AdamConfig& adam, std::size_t iters,
                              std::size_t inits, std::size_t batch, const Rng& rng);

struct divergence_error : std::runtime_error {
    explicit divergence_error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- experiment orchestration ------------------------------------------------

struct StrategyPlan {
    RegKind kind = RegKind::None;
    std::vector<double> lambdas{0.0}; // ignored by none/dropout
    double dropout_p = 0.6;
    double eps_w = 1e-5;
};

struct ExperimentSpec {
    Problem problem = Problem::Beam;
    std::vector<LayerSpec> arch;
    std::vector<StrategyPlan> strategies;
    std::size_t n_lo = 250, n_hi = 3, n_val = 50;
    std::size_t replications = 10, inits = 10;
    AdamConfig adam;
    std::size_t iters = 5000, eval_every = 1, batch_size = 0;
    double lofi_lambda = 0.01;
    std::size_t lofi_iters = 5000, lofi_inits = 3, lofi_batch = 0;
    bool share_lofi = false; // one low-fidelity network reused by every replication
    DatasetOptions data;
    std::uint64_t seed = 0;
    std::string scale = "desk";
    std::size_t jobs = 1;
};

enum class Scale { Desk, Paper };
Scale scale_from_name(const std::string& name);

ExperimentSpec beam_experiment(Scale scale, std::uint64_t seed);
ExperimentSpec nozzle_experiment(Scale scale, std::uint64_t seed);

// Histogram of |theta|: first bin [0, 1e-10), then one bin per decade up to
// [1e-1, 1), last bin [1, inf).
std::vector<std::size_t> sparsity_histogram(const Vector& theta);
extern const std::vector<double> kSparsityBinEdges; // 12 bins, 13 edges (last = inf)

// Fraction of parameters with |theta_i| < threshold.
double small_fraction(const Vector& theta, double threshold = 1e-3);

struct ReplicationResult {
    std::size_t replication = 0;
    double lambda = 0.0;
    bool failed = false; // every initialization diverged
    double eps_v = 0.0;
    std::size_t best_init = 0;
    std::size_t best_iter = 0;
    double final_loss = 0.0;
    std::size_t diverged_inits = 0;
    KReport k;
    LayerNormReport norms;
    double small_frac = 0.0;
    std::vector<std::size_t> hist;
};

struct LambdaScore {
    double lambda = 0.0;
    double mean_eps_v = 0.0; // over replications that produced a result
    std::size_t failed_reps = 0;
};

// Picks the grid entry with the fewest failed replications, then the lowest
// mean_eps_v, then (for ties within 1e-12 relative) the larger lambda.
// Entries where every replication failed are skipped; if that leaves
// nothing, nullopt.
std::optional<std::size_t> select_lambda(const std::vector<LambdaScore>& scores);

struct StrategyReport {
    StrategyPlan plan;
    std::string name;
    double lambda_star = 0.0;
    std::vector<LambdaScore> grid;
    std::vector<ReplicationResult> reps; // at lambda_star
    double eps_v_mean = 0.0, eps_v_std = 0.0;
    double small_frac_mean = 0.0;
    std::size_t failed_reps = 0;
    bool all_failed = false;
    // Count of increases in mean final ||theta - theta_lf||_1 across an
    // upward lambda sweep (anchored-l1 strategies only; one is tolerated).
    std::size_t diff_norm_inversions = 0;
};

struct LofiSummary {
    bool trained = false;
    bool shared = false;
    std::vector<double> final_loss;       // per replication (one entry when shared)
    std::vector<std::size_t> init_index;
};

struct ExperimentReport {
    ExperimentSpec spec;
    LofiSummary lofi;
    std::vector<StrategyReport> strategies;
};

// Runs the full protocol: datasets per replication, optional low-fidelity
// training, the lambda grid per strategy, and aggregation. Deterministic for
// a fixed spec (including seed), independent of jobs.
ExperimentReport run_replications(const ExperimentSpec& spec);

// --- config and report serialization -----------------------------------------

nlohmann::json experiment_spec_to_json(const ExperimentSpec& spec);
// Strict: unknown keys anywhere raise config_error.
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);

// Applies "dotted.path=value" overrides onto a config json; values parse as
// json when possible, else as strings.
void apply_override(nlohmann::json& config, const std::string& assignment);

nlohmann::json report_to_json(const ExperimentReport& report);
std::string report_flat_csv(const ExperimentReport& report);
std::string report_histogram_csv(const ExperimentReport& report);

// Writes via a temp file in the same directory plus atomic rename.
void write_text_atomic(const std::string& path, const std::string& content);

} // namespace bfl1
