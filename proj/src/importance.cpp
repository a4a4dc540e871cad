#include "survkit/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "survkit/metrics.hpp"

namespace survkit {

namespace {

double score_dataset(const NetworkState& state, const PreprocessPlan& plan,
                     const BaselineHazard& base, const SurvivalDataset& ds) {
    Eigen::VectorXd risks = predict_risk(state, plan, ds);
    std::vector<StepFunction> curves;
    curves.reserve(static_cast<std::size_t>(risks.size()));
    for (Eigen::Index i = 0; i < risks.size(); ++i)
        curves.push_back(survival_curve(cumulative_hazard(base, risks[i])));
    return c_td_index(curves, ds.durations(), ds.events());
}

}  // namespace

ImportanceReport permutation_importance(const NetworkState& state,
                                        const PreprocessPlan& plan,
                                        const BaselineHazard& base,
                                        const SurvivalDataset& test_ds, int n_shuffles,
                                        std::uint64_t seed) {
    if (n_shuffles < 1)
        throw std::invalid_argument("permutation_importance: K must be >= 1");
    if (state.linear.empty())
        throw std::invalid_argument("permutation_importance: untrained state");

    ImportanceReport report;
    report.n_shuffles = n_shuffles;
    report.reference_score = score_dataset(state, plan, base, test_ds);

    const std::size_t n = test_ds.subjects.size();
    for (std::size_t j = 0; j < test_ds.schema.size(); ++j) {
        // Per-feature sub-seed keeps features independent and parallel-safe.
        std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * (j + 1)));
        FeatureImportance fi;
        fi.name = test_ds.schema[j].name;
        fi.modality = test_ds.schema[j].modality;

        SurvivalDataset shuffled = test_ds;
        std::vector<std::size_t> perm(n);
        for (int k = 0; k < n_shuffles; ++k) {
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            // Shuffle the raw column so the missing-marker pattern travels
            // with the values.
            for (std::size_t i = 0; i < n; ++i)
                shuffled.subjects[i].features[j] = test_ds.subjects[perm[i]].features[j];
            fi.shuffled_scores.push_back(score_dataset(state, plan, base, shuffled));
        }
        double mean_s =
            std::accumulate(fi.shuffled_scores.begin(), fi.shuffled_scores.end(), 0.0) /
            n_shuffles;
        // Average the per-shuffle drops rather than subtracting the mean:
        // algebraically the same, but exactly zero when no shuffle moved
        // the score (a feature the model provably ignores).
        double drop_sum = 0.0;
        for (double s : fi.shuffled_scores) drop_sum += report.reference_score - s;
        fi.mean_importance = drop_sum / n_shuffles;
        double ss = 0.0;
        for (double s : fi.shuffled_scores) ss += (s - mean_s) * (s - mean_s);
        fi.stddev = n_shuffles > 1 ? std::sqrt(ss / (n_shuffles - 1)) : 0.0;
        report.features.push_back(std::move(fi));
    }
    return report;
}

std::vector<std::string> prune_nonpositive(const ImportanceReport& report) {
    std::vector<std::string> keep;
    for (const auto& f : report.features)
        if (f.mean_importance > 0.0) keep.push_back(f.name);
    if (keep.empty())
        throw std::invalid_argument("prune_nonpositive: no feature has positive importance");
    return keep;
}

std::string ImportanceReport::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "feature,modality,mean_importance,std,K\n";
    for (const auto& f : features)
        out << f.name << ',' << to_string(f.modality) << ',' << f.mean_importance << ','
            << f.stddev << ',' << n_shuffles << '\n';
    return out.str();
}

}  // namespace survkit
