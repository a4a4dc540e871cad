#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace survkit {

enum class Modality { GEN, MRI, CDC };
enum class FeatureKind { Binary, Categorical, Continuous };

/// One of the five progression strata used for stratified splitting.
/// pNC and pMCI are the progressive (event observed) groups; sNC, uNC and
/// sMCI are non-progressive (right-censored).
enum class Stratum { sNC, uNC, pNC, sMCI, pMCI };

std::string to_string(Modality m);
std::string to_string(FeatureKind k);
std::string to_string(Stratum s);
Modality modality_from_string(const std::string& s);
FeatureKind kind_from_string(const std::string& s);
Stratum stratum_from_string(const std::string& s);

bool stratum_is_progressive(Stratum s);

struct FeatureSchema {
    std::string name;
    Modality modality = Modality::CDC;
    FeatureKind kind = FeatureKind::Continuous;
};

struct SubjectRecord {
    std::string id;
    double duration = 0.0;          // years since baseline
    bool event = false;             // true = progressive (uncensored)
    Stratum stratum = Stratum::sNC;
    std::vector<std::optional<double>> features;  // nullopt = missing
};

/// Right-censored survival dataset. Immutable by convention after
/// construction; validate() enforces the schema/record invariants.
struct SurvivalDataset {
    std::vector<FeatureSchema> schema;
    std::vector<SubjectRecord> subjects;

    std::size_t n_subjects() const { return subjects.size(); }
    std::size_t n_features() const { return schema.size(); }
    std::size_t n_events() const;

    Eigen::VectorXd durations() const;
    std::vector<bool> events() const;

    /// Throws std::invalid_argument on any invariant violation. Fitting
    /// additionally requires at least one uncensored subject, checked by
    /// the callers that need it.
    void validate() const;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

SurvivalDataset load_csv(const std::string& data_path, const std::string& schema_path);
void write_csv(const SurvivalDataset& ds, const std::string& data_path,
               const std::string& schema_path);

/// Per-stratum random partition. Train gets round(train_frac * |stratum|)
/// subjects, clamped so each side keeps at least one subject when the
/// stratum has two or more. Size-1 strata go to train with a warning on
/// stderr.
std::pair<SurvivalDataset, SurvivalDataset>
stratified_split(const SurvivalDataset& ds, double train_frac, std::uint64_t seed);

enum class Nonlinearity { Linear, Quadratic };

/// Proportional-hazards generator used as the test oracle. Features are
/// iid standard normal; the latent event time is exponential with rate
/// baseline_rate * exp(g(x)) and censoring is exponential with rate
/// censor_rate. Quadratic adds 0.5 * x1^2 to the linear predictor.
SurvivalDataset synthesize_cox(int n, const Eigen::VectorXd& beta,
                               double baseline_rate, double censor_rate,
                               Nonlinearity nonlinearity, std::uint64_t seed);

}  // namespace survkit
