#include "survkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace survkit {

std::vector<std::pair<int, int>> comparable_pairs(const Eigen::VectorXd& durations,
                                                  const std::vector<bool>& events) {
    const auto n = durations.size();
    if (n < 2) throw std::invalid_argument("comparable_pairs: need at least 2 subjects");
    std::vector<std::pair<int, int>> pairs;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!events[static_cast<std::size_t>(i)]) continue;
        for (Eigen::Index j = 0; j < n; ++j)
            if (durations[i] < durations[j])
                pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
    return pairs;
}

double c_index(const Eigen::VectorXd& risks, const Eigen::VectorXd& durations,
               const std::vector<bool>& events) {
    auto pairs = comparable_pairs(durations, events);
    if (pairs.empty()) throw std::invalid_argument("c_index: no comparable pairs");
    double score = 0.0;
    for (auto [i, j] : pairs) {
        if (risks[i] > risks[j])
            score += 1.0;
        else if (risks[i] == risks[j])
            score += 0.5;
    }
    return score / static_cast<double>(pairs.size());
}

double c_td_index(const std::vector<StepFunction>& curves,
                  const Eigen::VectorXd& durations, const std::vector<bool>& events,
                  bool printed_form) {
    if (static_cast<Eigen::Index>(curves.size()) != durations.size())
        throw std::invalid_argument("c_td_index: one curve per subject required");
    auto pairs = comparable_pairs(durations, events);
    if (pairs.empty()) throw std::invalid_argument("c_td_index: no comparable pairs");
    double score = 0.0;
    for (auto [i, j] : pairs) {
        double si = curves[static_cast<std::size_t>(i)].eval(durations[i]);
        double sj = printed_form
                        ? curves[static_cast<std::size_t>(j)].eval(durations[j])
                        : curves[static_cast<std::size_t>(j)].eval(durations[i]);
        if (si < sj)
            score += 1.0;
        else if (si == sj)
            score += 0.5;
    }
    return score / static_cast<double>(pairs.size());
}

BrierResult brier_score_at(const std::vector<StepFunction>& curves,
                           const Eigen::VectorXd& durations,
                           const std::vector<bool>& events,
                           const StepFunction& censor_km, double t) {
    const auto n = durations.size();
    if (static_cast<Eigen::Index>(curves.size()) != n)
        throw std::invalid_argument("brier_score_at: one curve per subject required");
    if (t < 0.0) throw std::invalid_argument("brier_score_at: t must be >= 0");

    BrierResult res;
    double sum = 0.0;
    const double g_t = censor_km.eval(t);
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = curves[static_cast<std::size_t>(i)].eval(t);
        if (durations[i] <= t && events[static_cast<std::size_t>(i)]) {
            double g = censor_km.eval_left(durations[i]);
            if (g <= 0.0) {
                ++res.excluded_terms;
                continue;
            }
            sum += s * s / g;
        } else if (durations[i] > t) {
            if (g_t <= 0.0) {
                ++res.excluded_terms;
                continue;
            }
            sum += (1.0 - s) * (1.0 - s) / g_t;
        }
        // Censored before t: zero contribution by the indicator structure.
    }
    res.value = sum / static_cast<double>(n);
    return res;
}

namespace {

double trapezoid_ibs(const std::vector<StepFunction>& curves,
                     const Eigen::VectorXd& durations, const std::vector<bool>& events,
                     const StepFunction& censor_km, const std::vector<double>& grid) {
    double integral = 0.0;
    double prev_t = grid.front();
    double prev_bs = brier_score_at(curves, durations, events, censor_km, prev_t).value;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        double bs = brier_score_at(curves, durations, events, censor_km, grid[k]).value;
        integral += 0.5 * (bs + prev_bs) * (grid[k] - prev_t);
        prev_t = grid[k];
        prev_bs = bs;
    }
    return integral / (grid.back() - grid.front());
}

}  // namespace

IbsResult integrated_brier(const std::vector<StepFunction>& curves,
                           const Eigen::VectorXd& durations,
                           const std::vector<bool>& events,
                           const StepFunction& censor_km, double t1, double t2) {
    if (!(t1 < t2)) throw std::invalid_argument("integrated_brier: need t1 < t2");

    std::set<double> grid_set{t1, t2};
    for (Eigen::Index i = 0; i < durations.size(); ++i)
        if (durations[i] > t1 && durations[i] < t2) grid_set.insert(durations[i]);
    std::vector<double> grid(grid_set.begin(), grid_set.end());

    IbsResult res;
    res.value = trapezoid_ibs(curves, durations, events, censor_km, grid);

    // Refinement check: add midpoints and compare.
    std::vector<double> dense;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        dense.push_back(grid[k]);
        dense.push_back(0.5 * (grid[k] + grid[k + 1]));
    }
    dense.push_back(grid.back());
    res.grid_refinement_delta =
        std::abs(res.value - trapezoid_ibs(curves, durations, events, censor_km, dense));
    return res;
}

namespace {

// Regularized incomplete beta via the Lentz continued fraction; used for
// the Student-t CDF.
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14, kFpmin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpmin) d = kFpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpmin) d = kFpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpmin) c = kFpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpmin) d = kFpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpmin) c = kFpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log(1.0 - x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    double x = df / (df + t * t);
    return reg_inc_beta(0.5 * df, 0.5, x);
}

}  // namespace

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("paired_t_test: need equal lengths >= 2");
    const auto n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / static_cast<double>(n - 1));

    TTestResult res;
    if (sd == 0.0) {
        if (mean == 0.0) {
            res.t_stat = 0.0;
            res.p = 1.0;
        } else {
            res.degenerate = true;
            res.t_stat = std::numeric_limits<double>::infinity() * (mean > 0 ? 1 : -1);
            res.p = 0.0;
        }
        return res;
    }
    res.t_stat = mean / (sd / std::sqrt(static_cast<double>(n)));
    res.p = student_t_two_sided_p(res.t_stat, static_cast<double>(n - 1));
    return res;
}

double MetricReport::mean() const {
    if (per_split.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double v : per_split) s += v;
    return s / static_cast<double>(per_split.size());
}

double MetricReport::stddev() const {
    if (per_split.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double m = mean();
    double ss = 0.0;
    for (double v : per_split) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(per_split.size() - 1));
}

std::string MetricReport::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "split,value\n";
    for (std::size_t i = 0; i < per_split.size(); ++i)
        out << i << ',' << per_split[i] << '\n';
    return out.str();
}

std::string MetricReport::to_json() const {
    nlohmann::json j{{"name", name},
                     {"n", per_split.size()},
                     {"values", per_split},
                     {"mean", mean()}};
    if (per_split.size() >= 2)
        j["std"] = stddev();
    else
        j["std"] = nullptr;  // undefined for a single split
    return j.dump(2);
}

}  // namespace survkit
