#include <doctest.h>

#include <random>

#include "survkit/hazard.hpp"

using namespace survkit;

TEST_CASE("step function evaluation conventions") {
    StepFunction f;
    f.times = {1.0, 2.0, 4.0};
    f.values = {0.9, 0.7, 0.2};
    f.value_before_first = 1.0;
    f.validate();

    CHECK(f.eval(0.5) == 1.0);
    CHECK(f.eval(1.0) == 0.9);   // right-continuous at the jump
    CHECK(f.eval(3.9) == 0.7);
    CHECK(f.eval(100.0) == 0.2);  // holds the last value

    CHECK(f.eval_left(1.0) == 1.0);
    CHECK(f.eval_left(2.0) == 0.9);
    CHECK(f.eval_left(2.5) == 0.7);
}

TEST_CASE("step function validation") {
    StepFunction f;
    f.times = {2.0, 1.0};
    f.values = {0.5, 0.4};
    CHECK_THROWS_AS(f.validate(), std::invalid_argument);
    f.times = {-1.0, 1.0};
    CHECK_THROWS_AS(f.validate(), std::invalid_argument);
}

TEST_CASE("breslow with unit hazard ratios") {
    SUBCASE("single event at the earliest time gives 1/n") {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(5);
        Eigen::VectorXd T(5);
        T << 1, 2, 3, 4, 5;
        std::vector<bool> D{true, false, false, false, false};
        auto base = breslow(g, T, D);
        REQUIRE(base.event_times.size() == 1);
        CHECK(base.event_times[0] == 1.0);
        CHECK(base.increments[0] == doctest::Approx(0.2));
    }
    SUBCASE("two tied events among a risk set of 4") {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(4);
        Eigen::VectorXd T(4);
        T << 2, 2, 3, 4;
        std::vector<bool> D{true, true, false, false};
        auto base = breslow(g, T, D);
        REQUIRE(base.event_times.size() == 1);
        CHECK(base.increments[0] == doctest::Approx(0.5));
    }
}

TEST_CASE("risk shift cancels in the composed cumulative hazard") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal;
    const int n = 40;
    Eigen::VectorXd g(n), T(n);
    std::vector<bool> D(n);
    for (int i = 0; i < n; ++i) {
        g[i] = normal(rng);
        T[i] = std::abs(normal(rng)) + 0.01;
        D[static_cast<std::size_t>(i)] = i % 3 != 0;
    }
    const double c = 1.7;
    auto base0 = breslow(g, T, D);
    auto base1 = breslow(g.array() + c, T, D);
    // Increments scale by exp(-c) ...
    for (std::size_t k = 0; k < base0.increments.size(); ++k)
        CHECK(base1.increments[k] ==
              doctest::Approx(base0.increments[k] * std::exp(-c)).epsilon(1e-12));
    // ... and H(t|x) is unchanged after recomposition.
    auto H0 = cumulative_hazard(base0, g[0]);
    auto H1 = cumulative_hazard(base1, g[0] + c);
    for (std::size_t k = 0; k < H0.values.size(); ++k)
        CHECK(std::abs(H0.values[k] - H1.values[k]) < 1e-12);
}

TEST_CASE("cumulative hazard accumulates increments scaled by the risk") {
    BaselineHazard base;
    base.event_times = {1.0, 2.0, 3.0};
    base.increments = {0.1, 0.2, 0.3};

    auto H = cumulative_hazard(base, 0.0);
    CHECK(H.eval(0.5) == 0.0);  // before the first event time
    CHECK(H.eval(1.0) == doctest::Approx(0.1));
    CHECK(H.eval(2.5) == doctest::Approx(0.3));
    CHECK(H.eval(9.0) == doctest::Approx(0.6));

    auto H2 = cumulative_hazard(base, std::log(2.0));
    for (std::size_t k = 0; k < H.values.size(); ++k)
        CHECK(H2.values[k] == doctest::Approx(2.0 * H.values[k]));
}

TEST_CASE("survival curve is exp(-H) and inverts back") {
    BaselineHazard base;
    base.event_times = {1.0, 2.0};
    base.increments = {std::log(2.0), 0.5};
    auto H = cumulative_hazard(base, 0.0);
    auto S = survival_curve(H);
    CHECK(S.value_before_first == 1.0);
    CHECK(S.eval(1.5) == doctest::Approx(0.5));
    for (std::size_t k = 0; k < S.values.size(); ++k)
        CHECK(std::abs(-std::log(S.values[k]) - H.values[k]) < 1e-12);

    StepFunction zero;
    zero.value_before_first = 0.0;
    auto S0 = survival_curve(zero);
    CHECK(S0.eval(100.0) == 1.0);
}

TEST_CASE("kaplan-meier fixtures") {
    SUBCASE("no censoring: empirical survival function") {
        Eigen::VectorXd T(3);
        T << 1, 2, 3;
        std::vector<bool> D{true, true, true};
        auto S = kaplan_meier(T, D, KmTarget::Survival);
        REQUIRE(S.times.size() == 3);
        CHECK(S.eval(0.5) == 1.0);
        CHECK(S.eval(1.0) == doctest::Approx(2.0 / 3.0));
        CHECK(S.eval(2.0) == doctest::Approx(1.0 / 3.0));
        CHECK(S.eval(3.0) == doctest::Approx(0.0));
    }
    SUBCASE("all censored: survival identically 1") {
        Eigen::VectorXd T(4);
        T << 1, 2, 3, 4;
        std::vector<bool> D{false, false, false, false};
        auto S = kaplan_meier(T, D, KmTarget::Survival);
        CHECK(S.times.empty());
        CHECK(S.eval(10.0) == 1.0);
    }
    SUBCASE("textbook 1, 2+, 3, 4+, 5") {
        Eigen::VectorXd T(5);
        T << 1, 2, 3, 4, 5;
        std::vector<bool> D{true, false, true, false, true};
        auto S = kaplan_meier(T, D, KmTarget::Survival);
        CHECK(S.eval(1.0) == doctest::Approx(4.0 / 5.0));
        CHECK(S.eval(3.0) == doctest::Approx(8.0 / 15.0));
        CHECK(S.eval(5.0) == doctest::Approx(0.0));
    }
    SUBCASE("censoring target flips the indicator") {
        Eigen::VectorXd T(5);
        T << 1, 2, 3, 4, 5;
        std::vector<bool> D{true, false, true, false, true};
        auto G = kaplan_meier(T, D, KmTarget::Censoring);
        // Censorings at 2 and 4 with risk sets 4 and 2.
        CHECK(G.eval(1.5) == 1.0);
        CHECK(G.eval(2.0) == doctest::Approx(3.0 / 4.0));
        CHECK(G.eval(4.0) == doctest::Approx(3.0 / 8.0));
    }
}

TEST_CASE("kaplan-meier equals empirical survival on uncensored data") {
    std::mt19937_64 rng(9);
    std::exponential_distribution<double> expo(0.4);
    const int n = 50;
    Eigen::VectorXd T(n);
    std::vector<bool> D(n, true);
    for (int i = 0; i < n; ++i) T[i] = expo(rng);
    auto S = kaplan_meier(T, D, KmTarget::Survival);
    for (double probe : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        int alive = 0;
        for (int i = 0; i < n; ++i)
            if (T[i] > probe) ++alive;
        CHECK(S.eval(probe) == doctest::Approx(static_cast<double>(alive) / n));
    }
}

TEST_CASE("breslow composition tracks nelson-aalen and kaplan-meier") {
    std::mt19937_64 rng(21);
    std::exponential_distribution<double> expo(0.5);
    std::exponential_distribution<double> cens(0.2);
    const int n = 250;
    Eigen::VectorXd T(n);
    std::vector<bool> D(n);
    for (int i = 0; i < n; ++i) {
        double te = expo(rng), tc = cens(rng);
        T[i] = std::min(te, tc);
        D[static_cast<std::size_t>(i)] = te <= tc;
    }
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    auto S_breslow = survival_curve(cumulative_hazard(breslow(g, T, D), 0.0));
    auto S_km = kaplan_meier(T, D, KmTarget::Survival);
    double max_gap = 0.0;
    for (double t : S_breslow.times) {
        double sb = S_breslow.eval(t);
        double sk = S_km.eval(t);
        CHECK(sk <= sb + 1e-12);  // KM below exp(-NA) pointwise
        max_gap = std::max(max_gap, sb - sk);
    }
    CHECK(max_gap < 2.0 / n);
}

TEST_CASE("breslow requires at least one event") {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd T(3);
    T << 1, 2, 3;
    std::vector<bool> D{false, false, false};
    CHECK_THROWS_AS(breslow(g, T, D), std::invalid_argument);
}

TEST_CASE("baseline hazard csv round trip") {
    BaselineHazard base;
    base.event_times = {0.5, 1.25, 7.0};
    base.increments = {0.01, 0.02, 0.5};
    auto back = BaselineHazard::from_csv(base.to_csv());
    REQUIRE(back.event_times.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.event_times[i] == base.event_times[i]);
        CHECK(back.increments[i] == base.increments[i]);
    }
}
