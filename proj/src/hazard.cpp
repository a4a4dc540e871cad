#include "survkit/hazard.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace survkit {

void StepFunction::validate() const {
    if (times.size() != values.size())
        throw std::invalid_argument("StepFunction: times/values length mismatch");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < 0.0)
            throw std::invalid_argument("StepFunction: negative jump time");
        if (i > 0 && !(times[i] > times[i - 1]))
            throw std::invalid_argument("StepFunction: times not strictly increasing");
    }
}

double StepFunction::eval(double t) const {
    // Largest jump time <= t.
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return value_before_first;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double StepFunction::eval_left(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return value_before_first;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

void StepFunction::write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << "time,value\n";
    for (std::size_t i = 0; i < times.size(); ++i)
        f << times[i] << ',' << values[i] << '\n';
}

std::string BaselineHazard::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "event_time,increment\n";
    for (std::size_t i = 0; i < event_times.size(); ++i)
        out << event_times[i] << ',' << increments[i] << '\n';
    return out.str();
}

BaselineHazard BaselineHazard::from_csv(const std::string& text) {
    BaselineHazard base;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "event_time,increment")
        throw std::runtime_error("baseline CSV must start with 'event_time,increment'");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        base.event_times.push_back(std::stod(line.substr(0, comma)));
        base.increments.push_back(std::stod(line.substr(comma + 1)));
    }
    return base;
}

BaselineHazard breslow(const Eigen::VectorXd& train_risks,
                       const Eigen::VectorXd& durations,
                       const std::vector<bool>& events) {
    const auto n = durations.size();
    if (train_risks.size() != n || static_cast<Eigen::Index>(events.size()) != n)
        throw std::invalid_argument("breslow: input lengths differ");
    if (std::none_of(events.begin(), events.end(), [](bool e) { return e; }))
        throw std::invalid_argument("breslow: no uncensored subjects");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return durations[a] < durations[b]; });

    // Suffix sums of exp(g) over the sorted order give the risk-set
    // denominators in one reverse pass.
    std::vector<double> suffix(static_cast<std::size_t>(n) + 1, 0.0);
    for (auto i = static_cast<std::size_t>(n); i-- > 0;)
        suffix[i] = suffix[i + 1] + std::exp(train_risks[order[i]]);

    BaselineHazard base;
    std::size_t i = 0;
    while (i < order.size()) {
        double t = durations[order[i]];
        std::size_t j = i;
        int d = 0;
        while (j < order.size() && durations[order[j]] == t) {
            if (events[static_cast<std::size_t>(order[j])]) ++d;
            ++j;
        }
        if (d > 0) {
            base.event_times.push_back(t);
            base.increments.push_back(static_cast<double>(d) / suffix[i]);
        }
        i = j;
    }
    return base;
}

StepFunction cumulative_hazard(const BaselineHazard& base, double risk) {
    StepFunction H;
    H.value_before_first = 0.0;
    H.times = base.event_times;
    H.values.resize(base.increments.size());
    double acc = 0.0;
    const double factor = std::exp(risk);
    for (std::size_t i = 0; i < base.increments.size(); ++i) {
        acc += base.increments[i] * factor;
        H.values[i] = acc;
    }
    return H;
}

StepFunction survival_curve(const StepFunction& cumulative) {
    StepFunction S;
    S.times = cumulative.times;
    S.value_before_first = std::exp(-cumulative.value_before_first);
    S.values.resize(cumulative.values.size());
    for (std::size_t i = 0; i < S.values.size(); ++i)
        S.values[i] = std::exp(-cumulative.values[i]);
    return S;
}

StepFunction kaplan_meier(const Eigen::VectorXd& durations,
                          const std::vector<bool>& events, KmTarget target) {
    const auto n = durations.size();
    if (n < 1) throw std::invalid_argument("kaplan_meier: empty input");
    if (static_cast<Eigen::Index>(events.size()) != n)
        throw std::invalid_argument("kaplan_meier: input lengths differ");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return durations[a] < durations[b]; });

    StepFunction S;
    S.value_before_first = 1.0;
    double surv = 1.0;
    std::size_t i = 0;
    double at_risk = static_cast<double>(n);
    while (i < order.size()) {
        double t = durations[order[i]];
        std::size_t j = i;
        int d = 0;
        while (j < order.size() && durations[order[j]] == t) {
            bool ev = events[static_cast<std::size_t>(order[j])];
            if (target == KmTarget::Censoring) ev = !ev;
            if (ev) ++d;
            ++j;
        }
        if (d > 0) {
            surv *= 1.0 - static_cast<double>(d) / at_risk;
            S.times.push_back(t);
            S.values.push_back(surv);
        }
        at_risk -= static_cast<double>(j - i);
        i = j;
    }
    return S;
}

}  // namespace survkit
