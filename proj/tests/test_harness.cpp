#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "bfl1/harness.hpp"

using namespace bfl1;

namespace {

// y = sin(2x) on [-1, 1], a small smooth target the 1-8-1 net below can fit.
Dataset sine_data(std::size_t n, Rng& rng) {
    Dataset data;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = 2.0 * rng.uniform01() - 1.0;
        data.push_back({{x}, {std::sin(2.0 * x)}});
    }
    return data;
}

std::vector<LayerSpec> tiny_arch() {
    return {{1, 8, ActivationKind::elu()}, {8, 1, ActivationKind::identity()}};
}

TrainConfig tiny_config() {
    TrainConfig c;
    c.arch = tiny_arch();
    c.strategy = RegStrategy::none();
    c.adam.eta = 1e-2;
    c.iters = 300;
    return c;
}

std::function<double(const Vector&)> make_eval(const std::vector<LayerSpec>& arch,
                                               const Dataset& val, double scale = 1.0) {
    return [arch, &val, scale](const Vector& theta) {
        const NetworkParams p = unflatten(arch, theta);
        std::vector<Vector> truth, pred;
        for (const auto& s : val) {
            truth.push_back(s.y);
            pred.push_back(forward(arch, p, s.x));
        }
        return scale * relative_rmse(truth, pred);
    };
}

} // namespace

TEST_CASE("relative_rmse is the stacked norm ratio") {
    const std::vector<Vector> truth = {{3.0, 0.0}, {4.0, 0.0}};
    const std::vector<Vector> same = truth;
    CHECK(relative_rmse(truth, same) == 0.0);

    const std::vector<Vector> off = {{3.0, 1.0}, {4.0, -1.0}};
    // error norm sqrt(2), truth norm 5
    CHECK(relative_rmse(truth, off) == doctest::Approx(std::sqrt(2.0) / 5.0));

    CHECK_THROWS_AS(relative_rmse(truth, {{1.0}}), config_error);
}

TEST_CASE("beam standardizer uses analytic input moments") {
    Rng rng(5);
    Dataset ref = generate_beam_samples(50, rng, false, 200);
    const Standardizer st = Standardizer::beam(ref);

    CHECK(st.x_mean[0] == doctest::Approx(10.0));
    CHECK(st.x_mean[1] == doctest::Approx(1.0));
    CHECK(st.x_scale[0] == doctest::Approx(2.0 / std::sqrt(12.0)));
    CHECK(st.x_scale[1] == doctest::Approx(0.2 / std::sqrt(12.0)));

    // standardized outputs have zero mean and unit population variance
    const Dataset out = st.apply(ref);
    double mean = 0.0, var = 0.0;
    for (const auto& s : out) mean += s.y[0];
    mean /= static_cast<double>(out.size());
    for (const auto& s : out) var += (s.y[0] - mean) * (s.y[0] - mean);
    var /= static_cast<double>(out.size());
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0));

    // unstandardize inverts the output map
    Matrix y(1, 1);
    y(0, 0) = out[0].y[0];
    Matrix y2 = y;
    st.unstandardize_y_rows(y2);
    CHECK(y2(0, 0) == doctest::Approx(ref[0].y[0]));
}

TEST_CASE("identity standardizer passes data through") {
    const Standardizer st = Standardizer::identity(2, 3);
    Dataset data = {{{1.0, 2.0}, {3.0, 4.0, 5.0}}};
    const Dataset out = st.apply(data);
    CHECK(out[0].x == data[0].x);
    CHECK(out[0].y == data[0].y);
}

TEST_CASE("training reduces the loss on a smooth target") {
    Rng rng(100);
    const Dataset data = sine_data(64, rng);
    TrainConfig c = tiny_config();

    Rng init_rng = rng.split(1);
    const Vector theta0 = flatten(init_params(c.arch, init_rng));
    const double loss0 = mse_loss(c.arch, unflatten(c.arch, theta0), data);

    const TrainResult res = train(c, data, {}, theta0, rng.split(2));
    CHECK_FALSE(res.diverged);
    CHECK(res.final_loss < 0.2 * loss0);
    // empty eval means the last iterate is kept and no error is defined
    CHECK(std::isnan(res.best_eps_v));
}

TEST_CASE("the best evaluation iterate is kept, not the last") {
    Rng rng(101);
    const Dataset data = sine_data(64, rng);
    Dataset val = sine_data(32, rng);
    TrainConfig c = tiny_config();
    c.adam.eta = 5e-2; // deliberately twitchy so the trace is non-monotone
    c.iters = 120;

    Rng init_rng = rng.split(1);
    const Vector theta0 = flatten(init_params(c.arch, init_rng));
    const auto eval = make_eval(c.arch, val);
    const TrainResult res = train(c, data, eval, theta0, rng.split(2));

    REQUIRE(res.eval_iters.size() == res.eps_trace.size());
    double best = res.eps_trace[0];
    for (double e : res.eps_trace) best = std::min(best, e);
    CHECK(res.best_eps_v == doctest::Approx(best));
    CHECK(eval(res.best_theta) == doctest::Approx(res.best_eps_v));
}

TEST_CASE("best_iter is invariant to positive scaling of the metric") {
    Rng rng(102);
    const Dataset data = sine_data(64, rng);
    Dataset val = sine_data(32, rng);
    TrainConfig c = tiny_config();
    c.iters = 90;

    Rng init_rng = rng.split(1);
    const Vector theta0 = flatten(init_params(c.arch, init_rng));

    const TrainResult a = train(c, data, make_eval(c.arch, val, 1.0), theta0, rng.split(2));
    const TrainResult b = train(c, data, make_eval(c.arch, val, 37.5), theta0, rng.split(2));
    CHECK(a.best_iter == b.best_iter);
    CHECK(b.best_eps_v == doctest::Approx(37.5 * a.best_eps_v));
}

TEST_CASE("eval cadence hits iteration 0, multiples, and the final iterate") {
    Rng rng(103);
    const Dataset data = sine_data(16, rng);
    Dataset val = sine_data(8, rng);
    TrainConfig c = tiny_config();
    c.iters = 25;
    c.eval_every = 10;

    Rng init_rng = rng.split(1);
    const Vector theta0 = flatten(init_params(c.arch, init_rng));
    const TrainResult res = train(c, data, make_eval(c.arch, val), theta0, rng.split(2));
    CHECK(res.eval_iters == std::vector<std::size_t>{0, 10, 20, 25});
}

TEST_CASE("an exploding configuration is reported as diverged") {
    Rng rng(104);
    const Dataset data = sine_data(16, rng);
    TrainConfig c = tiny_config();
    c.adam.eta = 1e280; // guaranteed overflow within a few steps
    c.iters = 50;

    Rng init_rng = rng.split(1);
    const Vector theta0 = flatten(init_params(c.arch, init_rng));
    const TrainResult res = train(c, data, {}, theta0, rng.split(2));
    CHECK(res.diverged);
}

TEST_CASE("mini-batching and dropout stay finite and deterministic") {
    Rng rng(105);
    const Dataset data = sine_data(64, rng);
    TrainConfig c = tiny_config();
    c.batch_size = 8;
    c.strategy = RegStrategy::dropout(0.4);
    c.iters = 150;

    Rng init_rng = rng.split(1);
    const Vector theta0 = flatten(init_params(c.arch, init_rng));
    const TrainResult a = train(c, data, {}, theta0, rng.split(2));
    const TrainResult b = train(c, data, {}, theta0, rng.split(2));
    CHECK_FALSE(a.diverged);
    CHECK(a.best_theta == b.best_theta); // same train stream, same path
}

TEST_CASE("low-fidelity trainer keeps the lowest-loss initialization") {
    Rng rng(106);
    const Dataset data = sine_data(64, rng);
    const LofiResult res =
        train_lofi_network(tiny_arch(), data, 1e-4, AdamConfig{1e-2, 0.9, 0.999, 1e-8},
                           250, 3, 0, rng.split(9));
    CHECK(res.diverged_inits == 0);
    CHECK(res.theta.size() == param_count(tiny_arch()));
    CHECK(std::isfinite(res.final_loss));
    CHECK(res.init_index < 3);
}

TEST_CASE("select_lambda prefers fewer failures, then mean, then larger lambda") {
    std::vector<LambdaScore> scores(3);
    scores[0] = {1e-4, 0.5, 0};
    scores[1] = {1e-3, 0.2, 0};
    scores[2] = {1e-2, 0.1, 2};
    CHECK(select_lambda(scores).value() == 1); // fewest failures first

    scores[2].failed_reps = 0;
    CHECK(select_lambda(scores).value() == 2); // now the lowest mean wins

    // exact tie: the larger lambda is preferred
    scores[1].mean_eps_v = 0.1;
    CHECK(select_lambda(scores).value() == 2);
    std::swap(scores[1].lambda, scores[2].lambda);
    CHECK(select_lambda(scores).value() == 1);

    // entries whose replications all failed are skipped entirely
    std::vector<LambdaScore> dead(2);
    dead[0] = {1e-4, std::numeric_limits<double>::infinity(), 3};
    dead[1] = {1e-3, std::numeric_limits<double>::infinity(), 3};
    // failed_reps == R is signalled by a non-finite mean
    CHECK_FALSE(select_lambda({}).has_value());
}

TEST_CASE("sparsity histogram bins by decade and sums to the size") {
    const Vector theta = {0.0, 1e-11, 5e-10, 2e-4, 0.5, 3.0};
    const auto hist = sparsity_histogram(theta);
    REQUIRE(hist.size() == kSparsityBinEdges.size() - 1);

    std::size_t total = 0;
    for (auto c : hist) total += c;
    CHECK(total == theta.size());

    CHECK(hist.front() == 2);  // 0 and 1e-11 in [0, 1e-10)
    CHECK(hist.back() == 1);   // 3.0 in [1, inf)

    CHECK(small_fraction(theta, 1e-3) == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("experiment spec survives a json round-trip") {
    const ExperimentSpec spec = beam_experiment(Scale::Desk, 7);
    const nlohmann::json j = experiment_spec_to_json(spec);
    const ExperimentSpec back = experiment_spec_from_json(j);
    CHECK(experiment_spec_to_json(back) == j);
    CHECK(back.problem == spec.problem);
    CHECK(back.arch == spec.arch);
    CHECK(back.seed == spec.seed);
    CHECK(back.strategies.size() == spec.strategies.size());
    CHECK(back.n_lo == spec.n_lo);
}

TEST_CASE("unknown config keys are rejected by name") {
    nlohmann::json j = experiment_spec_to_json(beam_experiment(Scale::Desk, 7));
    j["optimizer"]["momentum"] = 0.9;
    try {
        experiment_spec_from_json(j);
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("momentum") != std::string::npos);
    }
}

TEST_CASE("apply_override writes dotted paths with json-typed values") {
    nlohmann::json j = experiment_spec_to_json(beam_experiment(Scale::Desk, 7));
    apply_override(j, "optimizer.eta=0.5");
    CHECK(j["optimizer"]["eta"] == 0.5);
    apply_override(j, "counts.R=3");
    CHECK(j["counts"]["R"] == 3);
    apply_override(j, "problem=nozzle");
    CHECK(j["problem"] == "nozzle");
    apply_override(j, "strategies.0.kind=l2");
    CHECK(j["strategies"][0]["kind"] == "l2");

    CHECK_THROWS_AS(apply_override(j, "novalue"), config_error);
    CHECK_THROWS_AS(apply_override(j, "strategies.99.kind=l2"), config_error);
}

TEST_CASE("a tiny beam study aggregates consistently") {
    ExperimentSpec spec = beam_experiment(Scale::Desk, 11);
    spec.replications = 3;
    spec.inits = 2;
    spec.iters = 60;
    spec.lofi_iters = 60;
    spec.lofi_inits = 1;
    spec.n_lo = 40;
    spec.n_val = 10;
    spec.strategies = {StrategyPlan{RegKind::None, {0.0}, 0.6, 1e-5},
                       StrategyPlan{RegKind::L1BiFidelityDiff, {1e-4, 1e-3}, 0.6, 1e-5}};

    const ExperimentReport report = run_replications(spec);
    REQUIRE(report.strategies.size() == 2);
    CHECK(report.lofi.trained);
    REQUIRE(report.lofi.final_loss.size() == 3); // one network per replication

    for (const auto& sr : report.strategies) {
        REQUIRE(sr.reps.size() == 3);
        CHECK_FALSE(sr.all_failed);

        // mean/std recomputed from the stored replications match the report
        double mean = 0.0;
        std::size_t n = 0;
        for (const auto& r : sr.reps)
            if (!r.failed) {
                mean += r.eps_v;
                ++n;
            }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& r : sr.reps)
            if (!r.failed) var += (r.eps_v - mean) * (r.eps_v - mean);
        var /= static_cast<double>(n);
        CHECK(sr.eps_v_mean == doctest::Approx(mean).epsilon(1e-12));
        CHECK(sr.eps_v_std == doctest::Approx(std::sqrt(var)).epsilon(1e-12));

        // every histogram covers the whole parameter vector
        for (const auto& r : sr.reps) {
            std::size_t total = 0;
            for (auto c : r.hist) total += c;
            CHECK(total == param_count(spec.arch));
        }
    }

    // the bi-fidelity strategy carries its growth constant, the baseline
    // carries the standard one
    CHECK(report.strategies[1].reps[0].k.k_std_bf.has_value());
    CHECK(report.strategies[0].reps[0].k.k_std_hf.has_value());

    // flat CSV: header + (1 + 3) strategies... one row per replication each
    const std::string csv = report_flat_csv(report);
    std::size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 1 + 2 * 3);

    const std::string hist_csv = report_histogram_csv(report);
    std::size_t hist_lines = 0;
    for (char ch : hist_csv)
        if (ch == '\n') ++hist_lines;
    CHECK(hist_lines == 1 + 2 * 3 * (kSparsityBinEdges.size() - 1));

    // the json form reflects the selected lambda per strategy
    const nlohmann::json j = report_to_json(report);
    CHECK(j["strategies"][1]["grid"].size() == 2);
    CHECK(j["strategies"][1]["lambda_star"] ==
          report.strategies[1].lambda_star);

    // multi-point anchored sweeps carry the monotonicity flag (advisory, so
    // only the schema is pinned here)
    REQUIRE(j["strategies"][1].contains("diff_norm_inversions"));
    // a two-point grid has a single adjacent pair, so at most one inversion
    CHECK(j["strategies"][1]["diff_norm_inversions"].get<std::size_t>() <= 1);
}

TEST_CASE("replication results do not depend on the batch they run in") {
    ExperimentSpec spec = beam_experiment(Scale::Desk, 13);
    spec.inits = 1;
    spec.iters = 40;
    spec.lofi_iters = 40;
    spec.lofi_inits = 1;
    spec.n_lo = 20;
    spec.n_val = 8;
    spec.strategies = {StrategyPlan{RegKind::L1Standard, {1e-3}, 0.6, 1e-5}};

    ExperimentSpec solo = spec;
    solo.replications = 1;
    ExperimentSpec batch = spec;
    batch.replications = 3;

    const ExperimentReport a = run_replications(solo);
    const ExperimentReport b = run_replications(batch);
    CHECK(a.strategies[0].reps[0].eps_v ==
          doctest::Approx(b.strategies[0].reps[0].eps_v).epsilon(1e-15));

    // and the jobs count changes nothing
    ExperimentSpec wide = batch;
    wide.jobs = 3;
    const ExperimentReport c = run_replications(wide);
    CHECK(report_to_json(c) == report_to_json(b));
}

TEST_CASE("built-in experiment definitions have the documented shape") {
    const ExperimentSpec beam = beam_experiment(Scale::Desk, 1);
    CHECK(beam.problem == Problem::Beam);
    CHECK(beam.n_lo == 250);
    CHECK(beam.n_hi == 3);
    CHECK(beam.replications == 10);
    CHECK(beam.inits == 10);
    CHECK(beam.iters == 5000);
    CHECK(param_count(beam.arch) == 541);
    REQUIRE(beam.strategies.size() == 7); // none, l2, dropout, four l1 kinds

    const ExperimentSpec paper = beam_experiment(Scale::Paper, 1);
    CHECK(paper.iters == 30000);
    CHECK(paper.replications == 50);
    CHECK(nozzle_experiment(Scale::Paper, 1).iters == 5000);

    const ExperimentSpec noz = nozzle_experiment(Scale::Desk, 1);
    CHECK(noz.problem == Problem::Nozzle);
    CHECK(noz.n_hi == 50);
    CHECK(noz.n_lo == 400);
    // autoencoder 1048 -> 128-64-16 -> 16-64-128 -> 1048
    CHECK(noz.arch.front().in_dim == 1048);
    CHECK(noz.arch.back().out_dim == 1048);
    bool has_16_16 = false;
    for (const auto& l : noz.arch)
        if (l.in_dim == 16 && l.out_dim == 16) has_16_16 = true;
    CHECK(has_16_16);
    CHECK(noz.arch.back().activation.kind == Activation::Tanh);
}

TEST_CASE("scale names parse and reject typos") {
    CHECK(scale_from_name("desk") == Scale::Desk);
    CHECK(scale_from_name("paper") == Scale::Paper);
    CHECK_THROWS_AS(scale_from_name("huge"), config_error);
}
