#include "survkit/preprocess.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace survkit {

std::string to_string(ImputePolicy p) {
    switch (p) {
        case ImputePolicy::OutOfRangeMax3: return "out_of_range_max3";
        case ImputePolicy::MeanImpute: return "mean_impute";
        case ImputePolicy::MeanThenMax3: return "mean_then_max3";
    }
    return "?";
}

ImputePolicy impute_policy_from_string(const std::string& s) {
    if (s == "out_of_range_max3") return ImputePolicy::OutOfRangeMax3;
    if (s == "mean_impute") return ImputePolicy::MeanImpute;
    if (s == "mean_then_max3") return ImputePolicy::MeanThenMax3;
    throw DataError("unknown impute policy '" + s + "'");
}

PreprocessPlan fit_plan(const SurvivalDataset& train, ImputePolicy policy) {
    if (train.subjects.empty())
        throw std::invalid_argument("fit_plan: training set is empty");
    train.validate();

    PreprocessPlan plan;
    plan.policy = policy;
    const std::size_t n = train.subjects.size();
    const std::size_t p = train.schema.size();
    plan.per_feature.resize(p);
    for (const auto& f : train.schema) plan.feature_names.push_back(f.name);

    for (std::size_t j = 0; j < p; ++j) {
        double obs_max = -std::numeric_limits<double>::infinity();
        double obs_sum = 0.0;
        std::size_t obs_n = 0;
        for (const auto& s : train.subjects) {
            if (s.features[j]) {
                obs_max = std::max(obs_max, *s.features[j]);
                obs_sum += *s.features[j];
                ++obs_n;
            }
        }
        if (obs_n == 0)
            throw std::invalid_argument("fit_plan: feature '" + train.schema[j].name +
                                        "' has no non-missing training values");

        // Fill value applied before the statistics are fitted, so the filled
        // column participates in mean/std (both mean-fill variants fill with
        // the observed mean at this stage).
        double fill = policy == ImputePolicy::OutOfRangeMax3 ? 3.0 * obs_max
                                                             : obs_sum / obs_n;
        double sum = 0.0;
        for (const auto& s : train.subjects) sum += s.features[j].value_or(fill);
        double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (const auto& s : train.subjects) {
            double d = s.features[j].value_or(fill) - mean;
            ss += d * d;
        }
        double stddev = std::sqrt(ss / static_cast<double>(n));

        auto& st = plan.per_feature[j];
        st.mean = mean;
        st.stddev = std::max(stddev, kStdFloor);
        st.observed_max = obs_max;
        st.kind = train.schema[j].kind;
    }
    return plan;
}

Eigen::MatrixXd apply_plan(const PreprocessPlan& plan, const SurvivalDataset& ds) {
    if (ds.schema.size() != plan.per_feature.size())
        throw std::invalid_argument("apply_plan: schema size does not match plan");
    for (std::size_t j = 0; j < ds.schema.size(); ++j)
        if (ds.schema[j].name != plan.feature_names[j])
            throw std::invalid_argument("apply_plan: feature '" + ds.schema[j].name +
                                        "' does not match plan entry '" +
                                        plan.feature_names[j] + "'");

    const auto n = static_cast<Eigen::Index>(ds.subjects.size());
    const auto p = static_cast<Eigen::Index>(plan.per_feature.size());
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto& st = plan.per_feature[static_cast<std::size_t>(j)];
        const bool scaled = st.kind != FeatureKind::Binary;
        const double pre_fill = plan.policy == ImputePolicy::OutOfRangeMax3
                                    ? 3.0 * st.observed_max
                                    : st.mean;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& cell = ds.subjects[static_cast<std::size_t>(i)]
                                   .features[static_cast<std::size_t>(j)];
            double v = cell.value_or(pre_fill);
            if (scaled) v = (v - st.mean) / st.stddev;
            if (plan.policy == ImputePolicy::MeanThenMax3 && !cell) {
                // Post-scaling out-of-range marker; the scaled column max is
                // the scaled raw max since standardization is increasing.
                double scaled_max =
                    scaled ? (st.observed_max - st.mean) / st.stddev : st.observed_max;
                v = 3.0 * scaled_max;
            }
            X(i, j) = v;
        }
    }
    return X;
}

SurvivalDataset select_features(const SurvivalDataset& ds,
                                const std::set<Modality>& modalities) {
    if (modalities.empty())
        throw std::invalid_argument("select_features: modality set is empty");
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < ds.schema.size(); ++j)
        if (modalities.count(ds.schema[j].modality)) keep.push_back(j);
    if (keep.empty())
        throw std::invalid_argument("select_features: no feature matches the modality set");

    SurvivalDataset out;
    for (auto j : keep) out.schema.push_back(ds.schema[j]);
    out.subjects.reserve(ds.subjects.size());
    for (const auto& s : ds.subjects) {
        SubjectRecord r = s;
        r.features.clear();
        for (auto j : keep) r.features.push_back(s.features[j]);
        out.subjects.push_back(std::move(r));
    }
    return out;
}

std::string PreprocessPlan::to_json() const {
    nlohmann::json j;
    j["policy"] = to_string(policy);
    nlohmann::json feats = nlohmann::json::object();
    for (std::size_t i = 0; i < per_feature.size(); ++i) {
        const auto& st = per_feature[i];
        feats[feature_names[i]] = {{"mean", st.mean},
                                   {"std", st.stddev},
                                   {"max", st.observed_max},
                                   {"kind", survkit::to_string(st.kind)}};
    }
    j["features"] = feats;
    j["order"] = feature_names;
    return j.dump(2);
}

PreprocessPlan PreprocessPlan::from_json(const std::string& json_text) {
    auto j = nlohmann::json::parse(json_text);
    PreprocessPlan plan;
    plan.policy = impute_policy_from_string(j.at("policy").get<std::string>());
    for (const auto& name : j.at("order")) {
        const auto& f = j.at("features").at(name.get<std::string>());
        FeatureStats st;
        st.mean = f.at("mean").get<double>();
        st.stddev = f.at("std").get<double>();
        st.observed_max = f.at("max").get<double>();
        st.kind = kind_from_string(f.at("kind").get<std::string>());
        plan.per_feature.push_back(st);
        plan.feature_names.push_back(name.get<std::string>());
    }
    return plan;
}

}  // namespace survkit
