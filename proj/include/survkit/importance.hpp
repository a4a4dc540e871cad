#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survkit/dataset.hpp"
#include "survkit/hazard.hpp"
#include "survkit/model.hpp"
#include "survkit/preprocess.hpp"

namespace survkit {

struct FeatureImportance {
    std::string name;
    Modality modality = Modality::CDC;
    double mean_importance = 0.0;        // s - mean over shuffles
    double stddev = 0.0;                 // sample std of the shuffled scores
    std::vector<double> shuffled_scores; // one per shuffle
};

struct ImportanceReport {
    double reference_score = 0.0;  // Ctd on the unshuffled data
    int n_shuffles = 0;
    std::vector<FeatureImportance> features;

    std::string to_csv() const;  // feature,modality,mean_importance,std,K
};

/// Permutation feature importance scored with the Ctd-index: each feature
/// column is permuted K times on the raw (pre-imputation) values, the full
/// eval pipeline is rerun and the score drop is averaged. Dropout is off
/// and batch norm uses running statistics throughout.
ImportanceReport permutation_importance(const NetworkState& state,
                                        const PreprocessPlan& plan,
                                        const BaselineHazard& base,
                                        const SurvivalDataset& test_ds, int n_shuffles,
                                        std::uint64_t seed);

/// Features retained for retraining: strictly positive mean importance.
std::vector<std::string> prune_nonpositive(const ImportanceReport& report);

}  // namespace survkit
