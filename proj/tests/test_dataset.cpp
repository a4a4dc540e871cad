#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "survkit/dataset.hpp"

using namespace survkit;

namespace {

struct TempDir {
    std::string path;
    TempDir() {
        char tmpl[] = "/tmp/survkit_test_XXXXXX";
        path = mkdtemp(tmpl);
    }
    std::string file(const std::string& name) const { return path + "/" + name; }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    f << content;
}

}  // namespace

TEST_CASE("load_csv maps fields and missing markers") {
    TempDir dir;
    write_file(dir.file("schema.csv"),
               "name,modality,kind\nf1,GEN,continuous\nf2,CDC,binary\n");
    write_file(dir.file("data.csv"),
               "id,duration,event,stratum,f1,f2\n"
               "s1,2.5,1,pMCI,0.3,1\n"
               "s2,0,0,sNC,,\n");
    auto ds = load_csv(dir.file("data.csv"), dir.file("schema.csv"));
    REQUIRE(ds.subjects.size() == 2);
    CHECK(ds.subjects[0].duration == 2.5);
    CHECK(ds.subjects[0].event);
    CHECK(ds.subjects[0].stratum == Stratum::pMCI);
    CHECK(*ds.subjects[0].features[0] == 0.3);
    CHECK(*ds.subjects[0].features[1] == 1.0);
    CHECK_FALSE(ds.subjects[1].features[0].has_value());
    CHECK_FALSE(ds.subjects[1].features[1].has_value());
}

TEST_CASE("load_csv rejects bad rows with the row number") {
    TempDir dir;
    write_file(dir.file("schema.csv"), "name,modality,kind\nf1,GEN,continuous\n");

    SUBCASE("negative duration") {
        write_file(dir.file("data.csv"),
                   "id,duration,event,stratum,f1\ns1,1,0,sNC,1\ns3,-1,0,sNC,1\n");
        CHECK_THROWS_WITH_AS(load_csv(dir.file("data.csv"), dir.file("schema.csv")),
                             "duration < 0 at row 3", DataError);
    }
    SUBCASE("unknown stratum") {
        write_file(dir.file("data.csv"), "id,duration,event,stratum,f1\ns1,1,0,XX,1\n");
        CHECK_THROWS_AS(load_csv(dir.file("data.csv"), dir.file("schema.csv")),
                        DataError);
    }
    SUBCASE("wrong arity") {
        write_file(dir.file("data.csv"), "id,duration,event,stratum,f1\ns1,1,0,sNC\n");
        CHECK_THROWS_AS(load_csv(dir.file("data.csv"), dir.file("schema.csv")),
                        DataError);
    }
    SUBCASE("non-numeric feature") {
        write_file(dir.file("data.csv"), "id,duration,event,stratum,f1\ns1,1,0,sNC,abc\n");
        CHECK_THROWS_AS(load_csv(dir.file("data.csv"), dir.file("schema.csv")),
                        DataError);
    }
    SUBCASE("stratum/event mismatch") {
        write_file(dir.file("data.csv"), "id,duration,event,stratum,f1\ns1,1,1,sNC,1\n");
        CHECK_THROWS_AS(load_csv(dir.file("data.csv"), dir.file("schema.csv")),
                        DataError);
    }
}

TEST_CASE("csv round trip is exact") {
    auto ds = synthesize_cox(60, Eigen::Vector3d(1.0, -0.5, 0.25), 0.1, 0.05,
                             Nonlinearity::Linear, 7);
    // Knock out a few cells to carry missing markers through the trip.
    ds.subjects[3].features[1].reset();
    ds.subjects[10].features[0].reset();

    TempDir dir;
    write_csv(ds, dir.file("d.csv"), dir.file("s.csv"));
    auto back = load_csv(dir.file("d.csv"), dir.file("s.csv"));
    REQUIRE(back.subjects.size() == ds.subjects.size());
    for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
        CHECK(back.subjects[i].id == ds.subjects[i].id);
        CHECK(back.subjects[i].duration == ds.subjects[i].duration);
        CHECK(back.subjects[i].event == ds.subjects[i].event);
        CHECK(back.subjects[i].stratum == ds.subjects[i].stratum);
        for (std::size_t j = 0; j < ds.schema.size(); ++j) {
            REQUIRE(back.subjects[i].features[j].has_value() ==
                    ds.subjects[i].features[j].has_value());
            if (ds.subjects[i].features[j])
                CHECK(*back.subjects[i].features[j] == *ds.subjects[i].features[j]);
        }
    }
}

namespace {

SurvivalDataset make_stratified(const std::map<Stratum, int>& sizes) {
    SurvivalDataset ds;
    ds.schema.push_back({"f1", Modality::CDC, FeatureKind::Continuous});
    int id = 0;
    for (auto [stratum, n] : sizes) {
        for (int i = 0; i < n; ++i) {
            SubjectRecord r;
            r.id = "s" + std::to_string(id++);
            r.duration = 1.0 + i;
            r.event = stratum_is_progressive(stratum);
            r.stratum = stratum;
            r.features = {0.0};
            ds.subjects.push_back(r);
        }
    }
    return ds;
}

}  // namespace

TEST_CASE("stratified_split reproduces the published per-stratum counts") {
    auto ds = make_stratified({{Stratum::sNC, 109},
                               {Stratum::uNC, 22},
                               {Stratum::pNC, 14},
                               {Stratum::sMCI, 101},
                               {Stratum::pMCI, 155}});
    auto [train_full, test] = stratified_split(ds, 0.8, 42);
    auto [train, val] = stratified_split(train_full, 0.8, 43);

    auto count = [](const SurvivalDataset& d, Stratum s) {
        int c = 0;
        for (const auto& r : d.subjects)
            if (r.stratum == s) ++c;
        return c;
    };
    CHECK(count(train, Stratum::sNC) == 70);
    CHECK(count(val, Stratum::sNC) == 17);
    CHECK(count(test, Stratum::sNC) == 22);
    CHECK(count(train, Stratum::pMCI) == 99);
    CHECK(count(val, Stratum::pMCI) == 25);
    CHECK(count(test, Stratum::pMCI) == 31);
}

TEST_CASE("stratified_split basics") {
    auto ds = make_stratified({{Stratum::sNC, 10}});
    auto [train, test] = stratified_split(ds, 0.8, 1);
    CHECK(train.subjects.size() == 8);
    CHECK(test.subjects.size() == 2);

    // Determinism and disjointness.
    auto [train2, test2] = stratified_split(ds, 0.8, 1);
    std::set<std::string> ids1, ids2;
    for (const auto& s : train.subjects) ids1.insert(s.id);
    for (const auto& s : train2.subjects) ids2.insert(s.id);
    CHECK(ids1 == ids2);
    for (const auto& s : test.subjects) CHECK(ids1.count(s.id) == 0);
    CHECK(train.subjects.size() + test.subjects.size() == ds.subjects.size());
}

TEST_CASE("stratified_split sends a singleton stratum to train") {
    auto ds = make_stratified({{Stratum::sNC, 9}, {Stratum::uNC, 1}});
    auto [train, test] = stratified_split(ds, 0.5, 3);
    int unc_in_train = 0;
    for (const auto& s : train.subjects)
        if (s.stratum == Stratum::uNC) ++unc_in_train;
    CHECK(unc_in_train == 1);
}

TEST_CASE("stratified_split preserves event rates within rounding") {
    auto ds = make_stratified({{Stratum::sNC, 40}, {Stratum::pMCI, 60}});
    auto [train, test] = stratified_split(ds, 0.8, 5);
    auto rate = [](const SurvivalDataset& d) {
        return static_cast<double>(d.n_events()) / d.subjects.size();
    };
    CHECK(rate(train) == doctest::Approx(0.6).epsilon(0.02));
    CHECK(rate(test) == doctest::Approx(0.6).epsilon(0.02));
}

TEST_CASE("synthesize_cox is seed-reproducible and respects invariants") {
    Eigen::Vector3d beta(1.0, -0.5, 0.25);
    auto a = synthesize_cox(200, beta, 0.1, 0.05, Nonlinearity::Linear, 11);
    auto b = synthesize_cox(200, beta, 0.1, 0.05, Nonlinearity::Linear, 11);
    REQUIRE(a.subjects.size() == b.subjects.size());
    for (std::size_t i = 0; i < a.subjects.size(); ++i) {
        CHECK(a.subjects[i].duration == b.subjects[i].duration);
        CHECK(*a.subjects[i].features[0] == *b.subjects[i].features[0]);
    }
    CHECK_NOTHROW(a.validate());
}

TEST_CASE("synthesize_cox censoring vanishes as censor_rate -> 0") {
    auto ds = synthesize_cox(300, Eigen::Vector2d(0.5, -0.5), 0.5, 1e-9,
                             Nonlinearity::Linear, 3);
    CHECK(ds.n_events() == 300);
}

TEST_CASE("synthesize_cox censoring fraction matches the analytic value") {
    // P(censored) = c / (c + r * exp(g)) averaged over x; Monte Carlo
    // estimate of the expectation with its standard error.
    Eigen::Vector2d beta(0.7, -0.3);
    const double r = 0.2, c = 0.15;
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal;
    double sum = 0.0, sum2 = 0.0;
    const int m = 200000;
    for (int i = 0; i < m; ++i) {
        double g = beta[0] * normal(rng) + beta[1] * normal(rng);
        double p = c / (c + r * std::exp(g));
        sum += p;
        sum2 += p * p;
    }
    double expect = sum / m;
    double mc_se = std::sqrt((sum2 / m - expect * expect) / m);

    const int n = 20000;
    auto ds = synthesize_cox(n, beta, r, c, Nonlinearity::Linear, 17);
    double censored = static_cast<double>(n - ds.n_events()) / n;
    double se = std::sqrt(expect * (1 - expect) / n) + mc_se;
    CHECK(std::abs(censored - expect) < 3.0 * se);
}
