#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "survkit/dataset.hpp"
#include "survkit/hazard.hpp"
#include "survkit/importance.hpp"
#include "survkit/metrics.hpp"
#include "survkit/model.hpp"
#include "survkit/preprocess.hpp"

namespace survkit {

std::string feature_set_name(const std::set<Modality>& s);
std::set<Modality> feature_set_from_name(const std::string& name);

/// Monte Carlo cross-validation experiment description. Every feature set
/// shares the same seeded split sequence so the paired t-tests compare
/// matched splits.
struct ExperimentPlan {
    std::vector<std::set<Modality>> feature_sets;
    int n_splits = 10;
    double train_frac = 0.8;
    double internal_val_frac = 0.2;  // of the training set
    ImputePolicy policy = ImputePolicy::OutOfRangeMax3;
    NetworkConfig network;
    double horizon_years = 10.0;
    double sentinel_years = 20.0;
    int importance_shuffles = 10;
    std::vector<std::uint64_t> seeds;  // per split; derived from network.seed if empty

    std::vector<std::uint64_t> resolved_seeds() const;
    std::string to_json() const;
};

/// Everything produced by one train/test split: fitted artifacts plus the
/// test-set scores and curves.
struct SplitOutcome {
    double ctd = 0.0;
    double ibs = 0.0;
    double ibs_t1 = 0.0;  // integration bounds actually used
    double ibs_t2 = 0.0;
    std::vector<std::string> test_ids;
    std::vector<StepFunction> test_curves;
};

/// Per-split fitted artifacts, kept so the importance protocol can score
/// the already-trained models.
struct FittedSplit {
    PreprocessPlan plan;
    NetworkState state;
    BaselineHazard baseline;
    SurvivalDataset train_full;
    SurvivalDataset test;
};

struct FeatureSetResult {
    std::string name;
    MetricReport ctd;
    MetricReport ibs;
    std::vector<SplitOutcome> splits;
};

struct ExperimentResults {
    std::vector<FeatureSetResult> per_set;
    /// t-test matrices between feature sets, keyed "A|B", for each metric.
    std::map<std::string, TTestResult> ctd_tests;
    std::map<std::string, TTestResult> ibs_tests;

    std::string manifest_json(const ExperimentPlan& plan) const;
};

/// Runs one stratified split end to end: outer train/test split, internal
/// validation split, preprocessing fit on the outer training set, model
/// training, Breslow baseline on the training risks, test-set scoring.
SplitOutcome run_split(const ExperimentPlan& plan, const SurvivalDataset& ds_fs,
                       std::uint64_t seed, FittedSplit* fitted = nullptr);

ExperimentResults run_feature_set_experiments(const ExperimentPlan& plan,
                                              const SurvivalDataset& ds, int jobs = 1);

struct SearchSpace {
    std::vector<int> hidden_layers{3};
    std::vector<int> nodes_per_layer{75};
    std::vector<double> dropout{0.3};
    std::vector<double> weight_decay{0.01};
    std::vector<int> batch_size{16};
    NetworkConfig base;  // remaining fields copied into every candidate
};

/// Random sub-sampling model selection: every candidate is scored by its
/// mean best-validation loss over n_splits stratified 80/20 splits and the
/// argmin wins; ties break toward fewer parameters, then lower dropout.
/// The full grid is enumerated when it fits the budget, otherwise
/// candidates are sampled uniformly.
NetworkConfig hyperparameter_search(const SearchSpace& space, const SurvivalDataset& ds,
                                    ImputePolicy policy, int n_splits = 100,
                                    int budget = 64);

struct PruneRetrainResult {
    MetricReport ctd_before, ctd_after;
    MetricReport ibs_before, ibs_after;
    TTestResult ctd_test, ibs_test;
    std::vector<std::string> kept_features;
    std::map<std::string, double> mean_importance;  // aggregated across splits
};

/// Tables-5/6 protocol: per-split permutation importance on the trained
/// models, mean importances aggregated across splits, non-positive
/// features dropped, then identical retraining on the retained subset.
PruneRetrainResult importance_prune_retrain(const ExperimentPlan& plan,
                                            const SurvivalDataset& ds,
                                            const std::set<Modality>& feature_set);

/// Pointwise mean of a subject's curves over the splits where it appeared,
/// on the union of the per-split time grids.
StepFunction average_step_functions(const std::vector<StepFunction>& curves);

std::map<std::string, StepFunction> aggregate_subject_curves(
    const std::vector<std::pair<std::string, StepFunction>>& appearances);

/// First time the curve reaches 0.5 within the horizon (the jump time);
/// non-crossing subjects are predicted non-converters at the sentinel.
std::pair<double, bool> predicted_event_time(const StepFunction& curve, double horizon,
                                             double sentinel = 20.0);

struct ConversionRecord {
    std::string id;
    double true_time = 0.0;  // event time for converters, censor time otherwise
    double predicted_time = 0.0;
    bool predicted_converter = false;
};

struct ConversionHistogram {
    std::map<int, int> counts;  // difference rounded to the nearest year
    std::map<int, double> percentages;
    int n_records = 0;
    int n_predicted_nonconverters = 0;

    std::string to_csv() const;
};

/// Differences predicted - true, rounded half away from zero to integer
/// years (the bar at k covers (k-0.5, k+0.5]).
ConversionHistogram conversion_histogram(const std::vector<ConversionRecord>& records);

struct SurvivalBinning {
    std::vector<double> probe_times;
    std::vector<std::string> groups;
    /// proportions[group][probe][bin], bins [0,0.1) .. [0.9,1.0]; the value
    /// 1.0 goes to the top bin.
    std::vector<std::vector<std::array<double, 10>>> proportions;

    std::string to_csv() const;
};

SurvivalBinning survival_binning(const std::vector<StepFunction>& curves,
                                 const std::vector<std::string>& groups,
                                 const std::vector<double>& probe_times = {1, 2, 5, 10});

}  // namespace survkit
