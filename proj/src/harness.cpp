#include "survkit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace survkit {

std::string feature_set_name(const std::set<Modality>& s) {
    // Canonical GEN, MRI, CDC order regardless of set ordering.
    std::string out;
    for (Modality m : {Modality::GEN, Modality::MRI, Modality::CDC}) {
        if (!s.count(m)) continue;
        if (!out.empty()) out += '+';
        out += to_string(m);
    }
    return out;
}

std::set<Modality> feature_set_from_name(const std::string& name) {
    std::set<Modality> out;
    std::stringstream ss(name);
    std::string part;
    while (std::getline(ss, part, '+')) out.insert(modality_from_string(part));
    if (out.empty()) throw DataError("empty feature set name");
    return out;
}

std::vector<std::uint64_t> ExperimentPlan::resolved_seeds() const {
    if (!seeds.empty()) {
        if (static_cast<int>(seeds.size()) != n_splits)
            throw std::invalid_argument("plan seeds must match n_splits");
        std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
        if (static_cast<int>(uniq.size()) != n_splits)
            throw std::invalid_argument("plan seeds must be distinct");
        return seeds;
    }
    std::vector<std::uint64_t> out;
    for (int s = 0; s < n_splits; ++s)
        out.push_back(network.seed * 1000003ull + static_cast<std::uint64_t>(s) + 1);
    return out;
}

std::string ExperimentPlan::to_json() const {
    nlohmann::json j;
    nlohmann::json sets = nlohmann::json::array();
    for (const auto& s : feature_sets) sets.push_back(feature_set_name(s));
    j["feature_sets"] = sets;
    j["n_splits"] = n_splits;
    j["train_frac"] = train_frac;
    j["internal_val_frac"] = internal_val_frac;
    j["impute_policy"] = to_string(policy);
    j["network"] = nlohmann::json::parse(network.to_json());
    j["horizon_years"] = horizon_years;
    j["sentinel_years"] = sentinel_years;
    j["importance_shuffles"] = importance_shuffles;
    j["seeds"] = resolved_seeds();
    return j.dump(2);
}

SplitOutcome run_split(const ExperimentPlan& plan, const SurvivalDataset& ds_fs,
                       std::uint64_t seed, FittedSplit* fitted) {
    auto [train_full, test] = stratified_split(ds_fs, plan.train_frac, seed);
    auto [train_inner, val] =
        stratified_split(train_full, 1.0 - plan.internal_val_frac, seed ^ 0x5555aaaa5555aaaaull);

    PreprocessPlan pp = fit_plan(train_full, plan.policy);

    NetworkConfig cfg = plan.network;
    cfg.seed = seed ^ 0x1234abcd5678ef00ull;
    auto [state, report] = train(cfg, train_inner, val, pp);

    Eigen::VectorXd train_risks = predict_risk(state, pp, train_full);
    BaselineHazard base = breslow(train_risks, train_full.durations(), train_full.events());

    Eigen::VectorXd test_risks = predict_risk(state, pp, test);
    SplitOutcome out;
    out.test_curves.reserve(test.subjects.size());
    for (Eigen::Index i = 0; i < test_risks.size(); ++i)
        out.test_curves.push_back(survival_curve(cumulative_hazard(base, test_risks[i])));
    for (const auto& s : test.subjects) out.test_ids.push_back(s.id);

    Eigen::VectorXd T = test.durations();
    std::vector<bool> D = test.events();
    out.ctd = c_td_index(out.test_curves, T, D);

    double t1 = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < T.size(); ++i)
        if (D[static_cast<std::size_t>(i)]) t1 = std::min(t1, T[i]);
    if (!std::isfinite(t1))
        throw std::invalid_argument("run_split: test set contains no events");
    out.ibs_t1 = t1;
    out.ibs_t2 = plan.horizon_years;
    StepFunction G = kaplan_meier(T, D, KmTarget::Censoring);
    out.ibs = integrated_brier(out.test_curves, T, D, G, out.ibs_t1, out.ibs_t2).value;

    if (fitted) {
        fitted->plan = std::move(pp);
        fitted->state = std::move(state);
        fitted->baseline = std::move(base);
        fitted->train_full = std::move(train_full);
        fitted->test = std::move(test);
    }
    return out;
}

namespace {

FeatureSetResult run_one_feature_set(const ExperimentPlan& plan,
                                     const SurvivalDataset& ds,
                                     const std::set<Modality>& fs, int jobs,
                                     std::vector<FittedSplit>* fitted_out) {
    SurvivalDataset ds_fs = select_features(ds, fs);
    auto seeds = plan.resolved_seeds();

    FeatureSetResult res;
    res.name = feature_set_name(fs);
    res.splits.resize(seeds.size());
    if (fitted_out) fitted_out->resize(seeds.size());

    auto work = [&](std::size_t s) {
        try {
            res.splits[s] = run_split(plan, ds_fs, seeds[s],
                                      fitted_out ? &(*fitted_out)[s] : nullptr);
        } catch (const std::exception& e) {
            throw std::runtime_error("split " + std::to_string(s) + ": " + e.what());
        }
    };

    if (jobs <= 1) {
        for (std::size_t s = 0; s < seeds.size(); ++s) work(s);
    } else {
        std::vector<std::future<void>> futures;
        std::size_t next = 0;
        while (next < seeds.size()) {
            while (futures.size() < static_cast<std::size_t>(jobs) && next < seeds.size())
                futures.push_back(std::async(std::launch::async, work, next++));
            for (auto& f : futures) f.get();
            futures.clear();
        }
    }

    res.ctd.name = "ctd:" + res.name;
    res.ibs.name = "ibs:" + res.name;
    for (const auto& sp : res.splits) {
        res.ctd.per_split.push_back(sp.ctd);
        res.ibs.per_split.push_back(sp.ibs);
    }
    return res;
}

}  // namespace

ExperimentResults run_feature_set_experiments(const ExperimentPlan& plan,
                                              const SurvivalDataset& ds, int jobs) {
    if (plan.feature_sets.empty())
        throw std::invalid_argument("run_feature_set_experiments: no feature sets");
    ExperimentResults results;
    for (const auto& fs : plan.feature_sets)
        results.per_set.push_back(run_one_feature_set(plan, ds, fs, jobs, nullptr));

    if (plan.n_splits >= 2) {
        for (std::size_t a = 0; a < results.per_set.size(); ++a)
            for (std::size_t b = a + 1; b < results.per_set.size(); ++b) {
                std::string key = results.per_set[a].name + "|" + results.per_set[b].name;
                results.ctd_tests[key] = paired_t_test(results.per_set[a].ctd.per_split,
                                                       results.per_set[b].ctd.per_split);
                results.ibs_tests[key] = paired_t_test(results.per_set[a].ibs.per_split,
                                                       results.per_set[b].ibs.per_split);
            }
    }
    return results;
}

std::string ExperimentResults::manifest_json(const ExperimentPlan& plan) const {
    nlohmann::json j;
    j["plan"] = nlohmann::json::parse(plan.to_json());
    nlohmann::json sets = nlohmann::json::array();
    for (const auto& fs : per_set) {
        nlohmann::json e;
        e["feature_set"] = fs.name;
        e["ctd"] = nlohmann::json::parse(fs.ctd.to_json());
        e["ibs"] = nlohmann::json::parse(fs.ibs.to_json());
        nlohmann::json splits = nlohmann::json::array();
        for (const auto& sp : fs.splits) {
            splits.push_back({{"ctd", sp.ctd},
                              {"ibs", sp.ibs},
                              {"ibs_bounds", {sp.ibs_t1, sp.ibs_t2}},
                              {"n_test", sp.test_ids.size()}});
        }
        e["splits"] = std::move(splits);
        sets.push_back(std::move(e));
    }
    j["results"] = std::move(sets);
    auto tests_to_json = [](const std::map<std::string, TTestResult>& tests) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [k, v] : tests)
            out[k] = {{"t", v.t_stat}, {"p", v.p}, {"degenerate", v.degenerate}};
        return out;
    };
    j["ctd_t_tests"] = tests_to_json(ctd_tests);
    j["ibs_t_tests"] = tests_to_json(ibs_tests);
    return j.dump(2);
}

NetworkConfig hyperparameter_search(const SearchSpace& space, const SurvivalDataset& ds,
                                    ImputePolicy policy, int n_splits, int budget) {
    std::vector<NetworkConfig> candidates;
    for (int hl : space.hidden_layers)
        for (int nodes : space.nodes_per_layer)
            for (double drop : space.dropout)
                for (double wd : space.weight_decay)
                    for (int bs : space.batch_size) {
                        NetworkConfig c = space.base;
                        c.hidden_layers = hl;
                        c.nodes_per_layer = nodes;
                        c.dropout = drop;
                        c.weight_decay = wd;
                        c.batch_size = bs;
                        candidates.push_back(c);
                    }
    if (candidates.empty())
        throw std::invalid_argument("hyperparameter_search: empty space");

    if (static_cast<int>(candidates.size()) > budget) {
        std::mt19937_64 rng(space.base.seed ^ 0xfeedface12345678ull);
        std::shuffle(candidates.begin(), candidates.end(), rng);
        candidates.resize(static_cast<std::size_t>(budget));
    }

    const int n_features = static_cast<int>(ds.n_features());
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        double total = 0.0;
        bool failed = false;
        for (int s = 0; s < n_splits && !failed; ++s) {
            std::uint64_t seed =
                space.base.seed * 1000003ull + static_cast<std::uint64_t>(s) + 1;
            try {
                auto [tr, val] = stratified_split(ds, 0.8, seed);
                PreprocessPlan pp = fit_plan(tr, policy);
                NetworkConfig cfg = candidates[c];
                cfg.seed = seed;
                auto [state, report] = train(cfg, tr, val, pp);
                double vloss = report.val_loss.empty()
                                   ? std::numeric_limits<double>::infinity()
                                   : *std::min_element(report.val_loss.begin(),
                                                       report.val_loss.end());
                total += vloss / val.subjects.size();
            } catch (const NumericError&) {
                failed = true;
            }
        }
        double score = failed ? std::numeric_limits<double>::infinity()
                              : total / static_cast<double>(n_splits);
        bool better = score < best_loss;
        if (score == best_loss) {
            auto pa = candidates[c].n_parameters(n_features);
            auto pb = candidates[best].n_parameters(n_features);
            better = pa < pb || (pa == pb && candidates[c].dropout <
                                                 candidates[best].dropout);
        }
        if (better) {
            best_loss = score;
            best = c;
        }
    }
    if (!std::isfinite(best_loss))
        throw NumericError("hyperparameter_search: every candidate diverged");
    return candidates[best];
}

PruneRetrainResult importance_prune_retrain(const ExperimentPlan& plan,
                                            const SurvivalDataset& ds,
                                            const std::set<Modality>& feature_set) {
    SurvivalDataset ds_fs = select_features(ds, feature_set);
    auto seeds = plan.resolved_seeds();

    PruneRetrainResult out;
    out.ctd_before.name = "ctd:before";
    out.ibs_before.name = "ibs:before";
    out.ctd_after.name = "ctd:after";
    out.ibs_after.name = "ibs:after";

    std::map<std::string, double> importance_sum;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        FittedSplit fitted;
        SplitOutcome sp = run_split(plan, ds_fs, seeds[s], &fitted);
        out.ctd_before.per_split.push_back(sp.ctd);
        out.ibs_before.per_split.push_back(sp.ibs);

        ImportanceReport rep = permutation_importance(
            fitted.state, fitted.plan, fitted.baseline, fitted.test,
            plan.importance_shuffles, seeds[s] ^ 0x0badf00d0badf00dull);
        for (const auto& f : rep.features) importance_sum[f.name] += f.mean_importance;
    }
    for (auto& [name, sum] : importance_sum) {
        double mean = sum / static_cast<double>(seeds.size());
        out.mean_importance[name] = mean;
    }

    SurvivalDataset pruned;
    std::vector<std::size_t> keep_cols;
    for (std::size_t j = 0; j < ds_fs.schema.size(); ++j)
        if (out.mean_importance.at(ds_fs.schema[j].name) > 0.0) {
            keep_cols.push_back(j);
            out.kept_features.push_back(ds_fs.schema[j].name);
        }
    if (keep_cols.empty())
        throw std::invalid_argument("importance_prune_retrain: no feature retained");

    for (auto j : keep_cols) pruned.schema.push_back(ds_fs.schema[j]);
    for (const auto& subj : ds_fs.subjects) {
        SubjectRecord r = subj;
        r.features.clear();
        for (auto j : keep_cols) r.features.push_back(subj.features[j]);
        pruned.subjects.push_back(std::move(r));
    }

    for (std::size_t s = 0; s < seeds.size(); ++s) {
        SplitOutcome sp = run_split(plan, pruned, seeds[s]);
        out.ctd_after.per_split.push_back(sp.ctd);
        out.ibs_after.per_split.push_back(sp.ibs);
    }

    if (seeds.size() >= 2) {
        out.ctd_test = paired_t_test(out.ctd_before.per_split, out.ctd_after.per_split);
        out.ibs_test = paired_t_test(out.ibs_before.per_split, out.ibs_after.per_split);
    }
    return out;
}

StepFunction average_step_functions(const std::vector<StepFunction>& curves) {
    if (curves.empty())
        throw std::invalid_argument("average_step_functions: empty input");
    if (curves.size() == 1) return curves.front();

    std::set<double> grid;
    for (const auto& c : curves)
        for (double t : c.times) grid.insert(t);

    StepFunction avg;
    double before = 0.0;
    for (const auto& c : curves) before += c.value_before_first;
    avg.value_before_first = before / static_cast<double>(curves.size());
    for (double t : grid) {
        double v = 0.0;
        for (const auto& c : curves) v += c.eval(t);
        avg.times.push_back(t);
        avg.values.push_back(v / static_cast<double>(curves.size()));
    }
    return avg;
}

std::map<std::string, StepFunction> aggregate_subject_curves(
    const std::vector<std::pair<std::string, StepFunction>>& appearances) {
    std::map<std::string, std::vector<StepFunction>> grouped;
    for (const auto& [id, curve] : appearances) grouped[id].push_back(curve);
    std::map<std::string, StepFunction> out;
    for (auto& [id, curves] : grouped) out[id] = average_step_functions(curves);
    return out;
}

std::pair<double, bool> predicted_event_time(const StepFunction& curve, double horizon,
                                             double sentinel) {
    if (curve.value_before_first <= 0.5) return {0.0, true};
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        if (curve.times[i] > horizon) break;
        if (curve.values[i] <= 0.5) return {curve.times[i], true};
    }
    return {sentinel, false};
}

ConversionHistogram conversion_histogram(const std::vector<ConversionRecord>& records) {
    ConversionHistogram h;
    h.n_records = static_cast<int>(records.size());
    for (const auto& r : records) {
        if (!r.predicted_converter) ++h.n_predicted_nonconverters;
        double diff = r.predicted_time - r.true_time;
        int bin = static_cast<int>(std::lround(diff));  // half away from zero
        ++h.counts[bin];
    }
    for (const auto& [bin, c] : h.counts)
        h.percentages[bin] = 100.0 * c / std::max(1, h.n_records);
    return h;
}

std::string ConversionHistogram::to_csv() const {
    std::ostringstream out;
    out << "difference_years,count,percentage\n";
    for (const auto& [bin, c] : counts)
        out << bin << ',' << c << ',' << percentages.at(bin) << '\n';
    return out.str();
}

SurvivalBinning survival_binning(const std::vector<StepFunction>& curves,
                                 const std::vector<std::string>& groups,
                                 const std::vector<double>& probe_times) {
    if (curves.size() != groups.size())
        throw std::invalid_argument("survival_binning: one group label per curve");
    SurvivalBinning out;
    out.probe_times = probe_times;
    std::map<std::string, std::size_t> group_idx;
    for (const auto& g : groups)
        if (!group_idx.count(g)) {
            group_idx[g] = out.groups.size();
            out.groups.push_back(g);
        }
    out.proportions.assign(out.groups.size(),
                           std::vector<std::array<double, 10>>(
                               probe_times.size(), std::array<double, 10>{}));
    std::vector<std::vector<int>> group_counts(out.groups.size(),
                                               std::vector<int>(probe_times.size(), 0));
    for (std::size_t i = 0; i < curves.size(); ++i) {
        std::size_t g = group_idx[groups[i]];
        for (std::size_t t = 0; t < probe_times.size(); ++t) {
            double v = curves[i].eval(probe_times[t]);
            int bin = std::clamp(static_cast<int>(v * 10.0), 0, 9);
            out.proportions[g][t][static_cast<std::size_t>(bin)] += 1.0;
            ++group_counts[g][t];
        }
    }
    for (std::size_t g = 0; g < out.groups.size(); ++g)
        for (std::size_t t = 0; t < probe_times.size(); ++t)
            if (group_counts[g][t] > 0)
                for (auto& p : out.proportions[g][t]) p /= group_counts[g][t];
    return out;
}

std::string SurvivalBinning::to_csv() const {
    std::ostringstream out;
    out << "group,probe_time,bin_low,proportion\n";
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t t = 0; t < probe_times.size(); ++t)
            for (int b = 0; b < 10; ++b)
                out << groups[g] << ',' << probe_times[t] << ',' << 0.1 * b << ','
                    << proportions[g][t][static_cast<std::size_t>(b)] << '\n';
    return out.str();
}

}  // namespace survkit
