#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "survkit/hazard.hpp"

namespace survkit {

/// Ordered pairs (i, j) for which the event ordering is identifiable:
/// T_i < T_j with subject i uncensored. Pairs with tied times or with the
/// earlier subject censored are excluded.
std::vector<std::pair<int, int>> comparable_pairs(const Eigen::VectorXd& durations,
                                                  const std::vector<bool>& events);

/// Harrell concordance: fraction of comparable pairs where the earlier
/// event has the higher risk; risk ties count one half.
double c_index(const Eigen::VectorXd& risks, const Eigen::VectorXd& durations,
               const std::vector<bool>& events);

/// Time-dependent concordance (Antolini): both curves are evaluated at the
/// earlier event time T_i and the pair is concordant when
/// S_i(T_i) < S_j(T_i); survival-value ties count one half. With
/// printed_form=true the second curve is instead evaluated at its own
/// time T_j (kept as a sensitivity variant).
double c_td_index(const std::vector<StepFunction>& curves,
                  const Eigen::VectorXd& durations, const std::vector<bool>& events,
                  bool printed_form = false);

struct BrierResult {
    double value = 0.0;
    int excluded_terms = 0;  // terms dropped for a zero censoring weight
};

/// IPCW Brier score at time t. Event terms use the left limit G(T_i-);
/// the divisor stays the full subject count even when terms are excluded.
BrierResult brier_score_at(const std::vector<StepFunction>& curves,
                           const Eigen::VectorXd& durations,
                           const std::vector<bool>& events,
                           const StepFunction& censor_km, double t);

struct IbsResult {
    double value = 0.0;
    double grid_refinement_delta = 0.0;  // |value - value on a 2x-dense grid|
};

/// Time-averaged Brier score over [t1, t2], trapezoid rule on the grid of
/// observed times plus the endpoints.
IbsResult integrated_brier(const std::vector<StepFunction>& curves,
                           const Eigen::VectorXd& durations,
                           const std::vector<bool>& events,
                           const StepFunction& censor_km, double t1, double t2);

struct TTestResult {
    double t_stat = 0.0;
    double p = 1.0;
    bool degenerate = false;  // zero variance with a nonzero mean difference
};

/// Two-sided paired t-test on per-split values (n-1 degrees of freedom).
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct MetricReport {
    std::string name;
    std::vector<double> per_split;

    double mean() const;
    double stddev() const;  // sample std over splits; NaN for n < 2

    std::string to_csv() const;   // split,value rows
    std::string to_json() const;  // {name, mean, std, n, values}
};

}  // namespace survkit
