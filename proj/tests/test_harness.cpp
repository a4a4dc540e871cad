#include <doctest.h>

#include <cmath>
#include <random>

#include "survkit/harness.hpp"

using namespace survkit;

namespace {

/// Small synthetic cohort whose CDC feature carries the hazard signal while
/// the GEN feature is pure noise. Modalities are reassigned after synthesis
/// so feature-set selection has something to distinguish.
SurvivalDataset two_modality_cohort(int n, std::uint64_t seed) {
    auto ds = synthesize_cox(n, Eigen::Vector2d(1.5, 0.0), 0.15, 0.05,
                             Nonlinearity::Linear, seed);
    ds.schema[0] = {"signal", Modality::CDC, FeatureKind::Continuous};
    ds.schema[1] = {"noise", Modality::GEN, FeatureKind::Continuous};
    return ds;
}

NetworkConfig small_linear_config(std::uint64_t seed) {
    NetworkConfig cfg;
    cfg.hidden_layers = 0;
    cfg.dropout = 0.0;
    cfg.weight_decay = 0.0;
    cfg.batch_size = 64;
    cfg.initial_lr = 0.15;
    cfg.max_epochs = 31;  // full cycles 1 + 2 + 4 + 8 + 16
    cfg.early_stop_patience = 10;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("feature set names are canonical") {
    CHECK(feature_set_name({Modality::GEN}) == "GEN");
    CHECK(feature_set_name({Modality::CDC, Modality::GEN}) == "GEN+CDC");
    CHECK(feature_set_name({Modality::MRI, Modality::CDC, Modality::GEN}) ==
          "GEN+MRI+CDC");
    CHECK(feature_set_from_name("GEN+CDC") ==
          std::set<Modality>{Modality::GEN, Modality::CDC});
    CHECK(feature_set_from_name("CDC+GEN") ==
          std::set<Modality>{Modality::GEN, Modality::CDC});
    CHECK_THROWS_AS(feature_set_from_name("GEN+XYZ"), DataError);
}

TEST_CASE("resolved seeds are distinct and derived from the network seed") {
    ExperimentPlan plan;
    plan.n_splits = 5;
    plan.network.seed = 42;
    auto seeds = plan.resolved_seeds();
    REQUIRE(seeds.size() == 5);
    std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
    CHECK(uniq.size() == 5);

    plan.seeds = {1, 2, 2};
    plan.n_splits = 3;
    CHECK_THROWS_AS(plan.resolved_seeds(), std::invalid_argument);
}

TEST_CASE("run_split produces scores, curves and reusable artifacts") {
    auto ds = two_modality_cohort(300, 301);
    ExperimentPlan plan;
    plan.network = small_linear_config(3);
    plan.n_splits = 1;

    FittedSplit fitted;
    auto out = run_split(plan, ds, /*seed=*/17, &fitted);

    CHECK(out.ctd > 0.6);  // strong single-feature signal
    CHECK(out.ibs >= 0.0);
    CHECK(out.ibs < 0.25);
    CHECK(out.ibs_t1 < out.ibs_t2);
    CHECK(out.ibs_t2 == plan.horizon_years);
    REQUIRE(out.test_ids.size() == out.test_curves.size());
    CHECK(!out.test_ids.empty());
    for (const auto& c : out.test_curves) {
        CHECK(c.value_before_first == 1.0);
        for (double v : c.values) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }

    // Artifacts reproduce the test predictions end to end.
    auto risks = predict_risk(fitted.state, fitted.plan, fitted.test);
    CHECK(static_cast<std::size_t>(risks.size()) == out.test_ids.size());
    auto s0 = survival_curve(cumulative_hazard(fitted.baseline, risks[0]));
    CHECK(s0.eval(5.0) == doctest::Approx(out.test_curves[0].eval(5.0)));

    // Same seed, same outcome; different seed, different test fold.
    auto out2 = run_split(plan, ds, 17);
    CHECK(out2.ctd == out.ctd);
    CHECK(out2.test_ids == out.test_ids);
    auto out3 = run_split(plan, ds, 18);
    CHECK(out3.test_ids != out.test_ids);
}

TEST_CASE("experiments separate a signal feature set from a noise one") {
    auto ds = two_modality_cohort(320, 311);
    ExperimentPlan plan;
    plan.network = small_linear_config(5);
    plan.n_splits = 10;
    plan.feature_sets = {{Modality::CDC}, {Modality::GEN}};

    auto results = run_feature_set_experiments(plan, ds, /*jobs=*/2);
    REQUIRE(results.per_set.size() == 2);
    const auto& cdc = results.per_set[0].name == "CDC" ? results.per_set[0]
                                                       : results.per_set[1];
    const auto& gen = results.per_set[0].name == "GEN" ? results.per_set[0]
                                                       : results.per_set[1];
    CHECK(cdc.ctd.mean() > 0.65);
    CHECK(gen.ctd.mean() < 0.6);

    // Matched splits give the paired test real power here.
    auto key = results.ctd_tests.count("CDC|GEN") ? "CDC|GEN" : "GEN|CDC";
    REQUIRE(results.ctd_tests.count(key) == 1);
    CHECK(results.ctd_tests.at(key).p < 0.05);

    // Same seeds across feature sets: split k of both sets holds the same
    // subjects, which is what makes the t-test paired.
    REQUIRE(cdc.splits.size() == gen.splits.size());
    for (std::size_t k = 0; k < cdc.splits.size(); ++k)
        CHECK(cdc.splits[k].test_ids == gen.splits[k].test_ids);
}

TEST_CASE("experiment results are byte-identical across reruns") {
    auto ds = two_modality_cohort(150, 321);
    ExperimentPlan plan;
    plan.network = small_linear_config(7);
    plan.n_splits = 3;
    plan.feature_sets = {{Modality::CDC}, {Modality::GEN, Modality::CDC}};

    auto r1 = run_feature_set_experiments(plan, ds, 1);
    auto r2 = run_feature_set_experiments(plan, ds, 2);  // jobs must not matter
    CHECK(r1.manifest_json(plan) == r2.manifest_json(plan));
}

TEST_CASE("test labels never influence the fitted artifacts") {
    auto ds = two_modality_cohort(200, 331);
    ExperimentPlan plan;
    plan.network = small_linear_config(9);

    FittedSplit fitted;
    auto out = run_split(plan, ds, 23, &fitted);

    // Perturb the durations of exactly the held-out subjects and rerun:
    // the trained weights and baseline must not move.
    std::set<std::string> test_ids(out.test_ids.begin(), out.test_ids.end());
    auto poisoned = ds;
    for (auto& s : poisoned.subjects)
        if (test_ids.count(s.id)) s.duration += 0.123;

    FittedSplit fitted2;
    run_split(plan, poisoned, 23, &fitted2);
    for (std::size_t l = 0; l < fitted.state.linear.size(); ++l) {
        CHECK((fitted.state.linear[l].W - fitted2.state.linear[l].W)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }
    REQUIRE(fitted.baseline.increments.size() == fitted2.baseline.increments.size());
    for (std::size_t k = 0; k < fitted.baseline.increments.size(); ++k)
        CHECK(fitted.baseline.increments[k] == fitted2.baseline.increments[k]);
}

TEST_CASE("hyperparameter search basics") {
    auto ds = two_modality_cohort(150, 341);

    SUBCASE("singleton grid returns that candidate") {
        SearchSpace space;
        space.hidden_layers = {0};
        space.nodes_per_layer = {1};
        space.dropout = {0.0};
        space.weight_decay = {0.0};
        space.batch_size = {32};
        space.base = small_linear_config(11);
        space.base.max_epochs = 3;
        auto best = hyperparameter_search(space, ds, ImputePolicy::OutOfRangeMax3,
                                          /*n_splits=*/2);
        CHECK(best.hidden_layers == 0);
        CHECK(best.batch_size == 32);
    }
    SUBCASE("an absurd learning rate loses to a sane one") {
        // Same architecture twice; only weight decay differs wildly, which
        // under the shared seeds makes the heavily regularized model
        // strictly worse on validation loss.
        SearchSpace space;
        space.hidden_layers = {0};
        space.nodes_per_layer = {1};
        space.dropout = {0.0};
        space.weight_decay = {0.0, 1e4};
        space.batch_size = {64};
        space.base = small_linear_config(13);
        space.base.max_epochs = 10;
        auto best = hyperparameter_search(space, ds, ImputePolicy::OutOfRangeMax3, 3);
        CHECK(best.weight_decay == 0.0);
    }
}

TEST_CASE("prune-retrain drops noise features and keeps the score") {
    // Four features: two signals, two pure noise. After pruning, retraining
    // on the kept subset should not lose discrimination.
    Eigen::VectorXd beta(4);
    beta << 1.4, -1.1, 0.0, 0.0;
    auto ds = synthesize_cox(320, beta, 0.15, 0.05, Nonlinearity::Linear, 351);
    ds.schema[0] = {"s1", Modality::CDC, FeatureKind::Continuous};
    ds.schema[1] = {"s2", Modality::CDC, FeatureKind::Continuous};
    ds.schema[2] = {"n1", Modality::CDC, FeatureKind::Continuous};
    ds.schema[3] = {"n2", Modality::CDC, FeatureKind::Continuous};

    ExperimentPlan plan;
    plan.network = small_linear_config(15);
    plan.n_splits = 4;
    plan.importance_shuffles = 20;

    auto res = importance_prune_retrain(plan, ds, {Modality::CDC});
    // Signals carry sizable importance, noise hovers near zero. Whether a
    // noise feature is dropped depends on the sign of its tiny mean, so
    // only the magnitudes are pinned here.
    CHECK(res.mean_importance.at("s1") > 0.05);
    CHECK(res.mean_importance.at("s2") > 0.05);
    CHECK(std::abs(res.mean_importance.at("n1")) < 0.02);
    CHECK(std::abs(res.mean_importance.at("n2")) < 0.02);
    std::set<std::string> kept(res.kept_features.begin(), res.kept_features.end());
    CHECK(kept.count("s1") == 1);
    CHECK(kept.count("s2") == 1);

    CHECK(res.ctd_after.mean() > res.ctd_before.mean() - 0.05);
    CHECK(res.ctd_before.per_split.size() == res.ctd_after.per_split.size());
}

TEST_CASE("average_step_functions on disjoint grids") {
    StepFunction a;
    a.times = {1.0, 3.0};
    a.values = {0.8, 0.4};
    a.value_before_first = 1.0;
    StepFunction b;
    b.times = {2.0};
    b.values = {0.6};
    b.value_before_first = 1.0;

    auto avg = average_step_functions({a, b});
    CHECK(avg.eval(0.5) == doctest::Approx(1.0));
    CHECK(avg.eval(1.5) == doctest::Approx((0.8 + 1.0) / 2));
    CHECK(avg.eval(2.5) == doctest::Approx((0.8 + 0.6) / 2));
    CHECK(avg.eval(3.5) == doctest::Approx((0.4 + 0.6) / 2));

    auto solo = average_step_functions({a});
    CHECK(solo.eval(2.0) == a.eval(2.0));
}

TEST_CASE("aggregate_subject_curves groups appearances by id") {
    StepFunction lo;
    lo.value_before_first = 0.2;
    StepFunction hi;
    hi.value_before_first = 0.8;
    auto agg = aggregate_subject_curves(
        {{"s1", lo}, {"s2", hi}, {"s1", hi}});
    REQUIRE(agg.size() == 2);
    CHECK(agg.at("s1").eval(1.0) == doctest::Approx(0.5));
    CHECK(agg.at("s2").eval(1.0) == doctest::Approx(0.8));
}

TEST_CASE("predicted event time conventions") {
    StepFunction flat;
    flat.value_before_first = 1.0;
    auto [t_flat, conv_flat] = predicted_event_time(flat, 10.0, 20.0);
    CHECK(t_flat == 20.0);
    CHECK_FALSE(conv_flat);

    StepFunction drop;
    drop.times = {3.0};
    drop.values = {0.4};
    drop.value_before_first = 1.0;
    auto [t_drop, conv_drop] = predicted_event_time(drop, 10.0);
    CHECK(t_drop == 3.0);
    CHECK(conv_drop);

    StepFunction exact;
    exact.times = {7.0};
    exact.values = {0.5};
    exact.value_before_first = 1.0;
    auto [t_exact, conv_exact] = predicted_event_time(exact, 10.0);
    CHECK(t_exact == 7.0);  // reaching exactly one half counts
    CHECK(conv_exact);

    StepFunction late;
    late.times = {12.0};
    late.values = {0.1};
    late.value_before_first = 1.0;
    auto [t_late, conv_late] = predicted_event_time(late, 10.0);
    CHECK(t_late == 20.0);  // crossing beyond the horizon does not count
    CHECK_FALSE(conv_late);

    StepFunction doomed;
    doomed.value_before_first = 0.3;  // below one half from the start
    auto [t_doomed, conv_doomed] = predicted_event_time(doomed, 10.0);
    CHECK(t_doomed == 0.0);
    CHECK(conv_doomed);
}

TEST_CASE("conversion histogram rounds half away from zero") {
    std::vector<ConversionRecord> recs{
        {"a", 2.0, 3.7, true},   // diff +1.7 -> bar 2
        {"b", 5.0, 5.5, true},   // diff +0.5 -> bar 1 (half away from zero)
        {"c", 4.0, 3.5, true},   // diff -0.5 -> bar -1
        {"d", 1.0, 1.2, true},   // diff +0.2 -> bar 0
        {"e", 3.0, 20.0, false}, // sentinel non-converter lands at +17
    };
    auto h = conversion_histogram(recs);
    CHECK(h.counts.at(2) == 1);
    CHECK(h.counts.at(1) == 1);
    CHECK(h.counts.at(-1) == 1);
    CHECK(h.counts.at(0) == 1);
    CHECK(h.counts.at(17) == 1);
    CHECK(h.n_records == 5);
    CHECK(h.n_predicted_nonconverters == 1);
    CHECK(h.percentages.at(2) == doctest::Approx(20.0));
    auto csv = h.to_csv();
    CHECK(csv.find("-1,") != std::string::npos);
}

TEST_CASE("survival binning fixtures") {
    SUBCASE("curves pinned at one land in the top bin") {
        StepFunction one;
        one.value_before_first = 1.0;
        auto bins = survival_binning({one, one}, {"g", "g"}, {1.0});
        REQUIRE(bins.groups.size() == 1);
        CHECK(bins.proportions[0][0][9] == doctest::Approx(1.0));
        for (int b = 0; b < 9; ++b) CHECK(bins.proportions[0][0][b] == 0.0);
    }
    SUBCASE("one curve per decile spreads uniformly") {
        std::vector<StepFunction> curves;
        std::vector<std::string> groups;
        for (int k = 0; k < 10; ++k) {
            StepFunction f;
            f.value_before_first = 0.05 + 0.1 * k;  // one value per bin
            curves.push_back(f);
            groups.push_back("g");
        }
        auto bins = survival_binning(curves, groups, {2.0});
        for (int b = 0; b < 10; ++b)
            CHECK(bins.proportions[0][0][b] == doctest::Approx(0.1));
    }
    SUBCASE("groups are tracked independently") {
        StepFunction lo;
        lo.value_before_first = 0.05;
        StepFunction hi;
        hi.value_before_first = 0.95;
        auto bins = survival_binning({lo, hi}, {"a", "b"}, {1.0, 5.0});
        REQUIRE(bins.groups.size() == 2);
        REQUIRE(bins.probe_times.size() == 2);
        // Group order is sorted by name.
        CHECK(bins.groups[0] == "a");
        CHECK(bins.proportions[0][0][0] == doctest::Approx(1.0));
        CHECK(bins.proportions[1][0][9] == doctest::Approx(1.0));
        auto csv = bins.to_csv();
        CHECK(!csv.empty());
    }
}
