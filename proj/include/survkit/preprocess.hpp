#pragma once

#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "survkit/dataset.hpp"

namespace survkit {

/// Missing-value handling variants. OutOfRangeMax3 fills with three times
/// the training maximum before any statistics are fitted; MeanImpute fills
/// with the training mean of the observed values; MeanThenMax3 mean-fills
/// before scaling and then overwrites the originally-missing cells with
/// three times the post-scaling column maximum.
enum class ImputePolicy { OutOfRangeMax3, MeanImpute, MeanThenMax3 };

std::string to_string(ImputePolicy p);
ImputePolicy impute_policy_from_string(const std::string& s);

struct FeatureStats {
    double mean = 0.0;
    double stddev = 1.0;       // clamped to >= 1e-12
    double observed_max = 0.0; // max over non-missing training values
    FeatureKind kind = FeatureKind::Continuous;
};

/// Fitted preprocessing statistics. Statistics come from training data
/// only; apply_plan never updates them.
struct PreprocessPlan {
    std::vector<FeatureStats> per_feature;
    ImputePolicy policy = ImputePolicy::OutOfRangeMax3;
    std::vector<std::string> feature_names;

    std::string to_json() const;
    static PreprocessPlan from_json(const std::string& json_text);
};

constexpr double kStdFloor = 1e-12;

PreprocessPlan fit_plan(const SurvivalDataset& train, ImputePolicy policy);

/// Imputes and scales, returning a dense matrix (subjects x features).
/// Binary features pass through unscaled; categorical and continuous
/// features are standardized with the plan's training statistics.
Eigen::MatrixXd apply_plan(const PreprocessPlan& plan, const SurvivalDataset& ds);

/// Restricts the dataset to schema entries whose modality is in the set,
/// preserving column order. Throws if no feature matches.
SurvivalDataset select_features(const SurvivalDataset& ds,
                                const std::set<Modality>& modalities);

}  // namespace survkit
