#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace survkit {

/// Right-continuous piecewise-constant function of time: eval(t) returns
/// the value at the largest jump time <= t, or value_before_first when t
/// precedes every jump. Also carries the left-limit evaluation needed by
/// the IPCW weights.
struct StepFunction {
    std::vector<double> times;   // strictly increasing, non-negative
    std::vector<double> values;  // same length as times
    double value_before_first = 0.0;

    double eval(double t) const;
    double eval_left(double t) const;  // value just before t

    /// Throws std::invalid_argument if times are not strictly increasing
    /// non-negative or the lengths differ.
    void validate() const;

    void write_csv(const std::string& path) const;
};

/// Breslow baseline-hazard increments, one per distinct uncensored time.
struct BaselineHazard {
    std::vector<double> event_times;  // ascending, distinct
    std::vector<double> increments;   // >= 0

    std::string to_csv() const;
    static BaselineHazard from_csv(const std::string& text);
};

/// Breslow estimator: for each distinct uncensored time t the increment is
/// d(t) / sum_{j: T_j >= t} exp(g_j), with tied events sharing the risk-set
/// denominator.
BaselineHazard breslow(const Eigen::VectorXd& train_risks,
                       const Eigen::VectorXd& durations,
                       const std::vector<bool>& events);

StepFunction cumulative_hazard(const BaselineHazard& base, double risk);

StepFunction survival_curve(const StepFunction& cumulative);

enum class KmTarget { Survival, Censoring };

/// Kaplan-Meier product-limit estimator. With target Censoring the event
/// indicator is flipped first, giving the censoring distribution G used by
/// the IPCW Brier score.
StepFunction kaplan_meier(const Eigen::VectorXd& durations,
                          const std::vector<bool>& events, KmTarget target);

}  // namespace survkit
