#include "survkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace survkit {

std::string to_string(Modality m) {
    switch (m) {
        case Modality::GEN: return "GEN";
        case Modality::MRI: return "MRI";
        case Modality::CDC: return "CDC";
    }
    return "?";
}

std::string to_string(FeatureKind k) {
    switch (k) {
        case FeatureKind::Binary: return "binary";
        case FeatureKind::Categorical: return "categorical";
        case FeatureKind::Continuous: return "continuous";
    }
    return "?";
}

std::string to_string(Stratum s) {
    switch (s) {
        case Stratum::sNC: return "sNC";
        case Stratum::uNC: return "uNC";
        case Stratum::pNC: return "pNC";
        case Stratum::sMCI: return "sMCI";
        case Stratum::pMCI: return "pMCI";
    }
    return "?";
}

Modality modality_from_string(const std::string& s) {
    if (s == "GEN") return Modality::GEN;
    if (s == "MRI") return Modality::MRI;
    if (s == "CDC") return Modality::CDC;
    throw DataError("unknown modality '" + s + "'");
}

FeatureKind kind_from_string(const std::string& s) {
    if (s == "binary") return FeatureKind::Binary;
    if (s == "categorical") return FeatureKind::Categorical;
    if (s == "continuous") return FeatureKind::Continuous;
    throw DataError("unknown feature kind '" + s + "'");
}

Stratum stratum_from_string(const std::string& s) {
    if (s == "sNC") return Stratum::sNC;
    if (s == "uNC") return Stratum::uNC;
    if (s == "pNC") return Stratum::pNC;
    if (s == "sMCI") return Stratum::sMCI;
    if (s == "pMCI") return Stratum::pMCI;
    throw DataError("unknown stratum label '" + s + "'");
}

bool stratum_is_progressive(Stratum s) {
    return s == Stratum::pNC || s == Stratum::pMCI;
}

std::size_t SurvivalDataset::n_events() const {
    return static_cast<std::size_t>(
        std::count_if(subjects.begin(), subjects.end(),
                      [](const SubjectRecord& r) { return r.event; }));
}

Eigen::VectorXd SurvivalDataset::durations() const {
    Eigen::VectorXd t(static_cast<Eigen::Index>(subjects.size()));
    for (std::size_t i = 0; i < subjects.size(); ++i)
        t[static_cast<Eigen::Index>(i)] = subjects[i].duration;
    return t;
}

std::vector<bool> SurvivalDataset::events() const {
    std::vector<bool> d(subjects.size());
    for (std::size_t i = 0; i < subjects.size(); ++i) d[i] = subjects[i].event;
    return d;
}

void SurvivalDataset::validate() const {
    std::unordered_set<std::string> names;
    for (const auto& f : schema) {
        if (!names.insert(f.name).second)
            throw std::invalid_argument("duplicate feature name '" + f.name + "'");
    }
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        const auto& s = subjects[i];
        if (!(s.duration >= 0.0))
            throw std::invalid_argument("duration < 0 for subject '" + s.id + "'");
        if (s.features.size() != schema.size())
            throw std::invalid_argument("feature vector length mismatch for subject '" +
                                        s.id + "'");
        if (stratum_is_progressive(s.stratum) != s.event)
            throw std::invalid_argument("stratum/event mismatch for subject '" + s.id +
                                        "' (progressive strata require event=1)");
        for (const auto& v : s.features)
            if (v && !std::isfinite(*v))
                throw std::invalid_argument("non-finite feature value for subject '" +
                                            s.id + "'");
    }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& s, const std::string& what, int row) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw DataError("non-numeric " + what + " '" + s + "' at row " +
                        std::to_string(row));
    }
    if (pos != s.size())
        throw DataError("non-numeric " + what + " '" + s + "' at row " +
                        std::to_string(row));
    return v;
}

}  // namespace

SurvivalDataset load_csv(const std::string& data_path, const std::string& schema_path) {
    SurvivalDataset ds;

    std::ifstream sf(schema_path);
    if (!sf) throw DataError("cannot open schema file '" + schema_path + "'");
    std::string line;
    if (!std::getline(sf, line) || split_line(line) != std::vector<std::string>{"name", "modality", "kind"})
        throw DataError("schema file must start with header 'name,modality,kind'");
    int row = 1;
    while (std::getline(sf, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != 3)
            throw DataError("malformed schema row " + std::to_string(row));
        ds.schema.push_back({cells[0], modality_from_string(cells[1]),
                             kind_from_string(cells[2])});
    }

    std::ifstream df(data_path);
    if (!df) throw DataError("cannot open data file '" + data_path + "'");
    if (!std::getline(df, line)) throw DataError("empty data file");
    auto header = split_line(line);
    std::vector<std::string> expected{"id", "duration", "event", "stratum"};
    for (const auto& f : ds.schema) expected.push_back(f.name);
    if (header != expected)
        throw DataError("data header does not match 'id,duration,event,stratum' "
                        "followed by the schema's feature names");

    row = 1;
    while (std::getline(df, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != 4 + ds.schema.size())
            throw DataError("wrong number of columns at row " + std::to_string(row));
        SubjectRecord rec;
        rec.id = cells[0];
        rec.duration = parse_number(cells[1], "duration", row);
        if (rec.duration < 0)
            throw DataError("duration < 0 at row " + std::to_string(row));
        if (cells[2] == "1")
            rec.event = true;
        else if (cells[2] == "0")
            rec.event = false;
        else
            throw DataError("event must be 0 or 1 at row " + std::to_string(row));
        try {
            rec.stratum = stratum_from_string(cells[3]);
        } catch (const DataError&) {
            throw DataError("unknown stratum label '" + cells[3] + "' at row " +
                            std::to_string(row));
        }
        for (std::size_t j = 0; j < ds.schema.size(); ++j) {
            const auto& c = cells[4 + j];
            if (c.empty())
                rec.features.emplace_back(std::nullopt);
            else
                rec.features.emplace_back(parse_number(c, "feature", row));
        }
        ds.subjects.push_back(std::move(rec));
    }

    try {
        ds.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    return ds;
}

namespace {

std::string format_value(double v) {
    // Shortest representation that round-trips a double.
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    double back = std::stod(buf);
    if (back == v) {
        for (int prec = 1; prec < 17; ++prec) {
            char b2[40];
            std::snprintf(b2, sizeof b2, "%.*g", prec, v);
            if (std::stod(b2) == v) return b2;
        }
    }
    return buf;
}

}  // namespace

void write_csv(const SurvivalDataset& ds, const std::string& data_path,
               const std::string& schema_path) {
    std::ofstream sf(schema_path);
    if (!sf) throw DataError("cannot write schema file '" + schema_path + "'");
    sf << "name,modality,kind\n";
    for (const auto& f : ds.schema)
        sf << f.name << ',' << to_string(f.modality) << ',' << to_string(f.kind) << '\n';

    std::ofstream df(data_path);
    if (!df) throw DataError("cannot write data file '" + data_path + "'");
    df << "id,duration,event,stratum";
    for (const auto& f : ds.schema) df << ',' << f.name;
    df << '\n';
    for (const auto& s : ds.subjects) {
        df << s.id << ',' << format_value(s.duration) << ',' << (s.event ? 1 : 0) << ','
           << to_string(s.stratum);
        for (const auto& v : s.features) {
            df << ',';
            if (v) df << format_value(*v);
        }
        df << '\n';
    }
}

std::pair<SurvivalDataset, SurvivalDataset>
stratified_split(const SurvivalDataset& ds, double train_frac, std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw std::invalid_argument("train_frac must be in (0,1)");

    // Group subject indices by stratum; order within a stratum follows the
    // dataset order so the shuffle is the only source of randomness.
    std::vector<std::vector<std::size_t>> by_stratum(5);
    for (std::size_t i = 0; i < ds.subjects.size(); ++i)
        by_stratum[static_cast<int>(ds.subjects[i].stratum)].push_back(i);

    std::mt19937_64 rng(seed);
    std::vector<bool> in_train(ds.subjects.size(), false);
    for (auto& idx : by_stratum) {
        if (idx.empty()) continue;
        if (idx.size() == 1) {
            std::cerr << "survkit: stratum of size 1 assigned to the training set\n";
            in_train[idx[0]] = true;
            continue;
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        auto n = idx.size();
        auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
        n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        for (std::size_t k = 0; k < n_train; ++k) in_train[idx[k]] = true;
    }

    SurvivalDataset train, test;
    train.schema = ds.schema;
    test.schema = ds.schema;
    for (std::size_t i = 0; i < ds.subjects.size(); ++i)
        (in_train[i] ? train : test).subjects.push_back(ds.subjects[i]);
    return {std::move(train), std::move(test)};
}

SurvivalDataset synthesize_cox(int n, const Eigen::VectorXd& beta,
                               double baseline_rate, double censor_rate,
                               Nonlinearity nonlinearity, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    if (!(baseline_rate > 0.0) || !(censor_rate > 0.0))
        throw std::invalid_argument("rates must be positive");

    SurvivalDataset ds;
    for (Eigen::Index j = 0; j < beta.size(); ++j)
        ds.schema.push_back({"x" + std::to_string(j + 1), Modality::CDC,
                             FeatureKind::Continuous});

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // Round-robin stratum assignment, separately for events and censorings
    // so the stratum/event invariant holds. The labels carry no meaning in
    // synthetic data beyond split stratification.
    const Stratum event_strata[] = {Stratum::pNC, Stratum::pMCI};
    const Stratum censor_strata[] = {Stratum::sNC, Stratum::uNC, Stratum::sMCI};
    int event_rr = 0, censor_rr = 0;

    for (int i = 0; i < n; ++i) {
        SubjectRecord rec;
        rec.id = "s" + std::to_string(i + 1);
        Eigen::VectorXd x(beta.size());
        for (Eigen::Index j = 0; j < beta.size(); ++j) x[j] = normal(rng);
        double g = beta.dot(x);
        if (nonlinearity == Nonlinearity::Quadratic && beta.size() > 0)
            g += 0.5 * x[0] * x[0];

        double u = unif(rng);
        double t_event = -std::log(u) / (baseline_rate * std::exp(g));
        double t_censor = -std::log(unif(rng)) / censor_rate;
        rec.event = t_event <= t_censor;
        rec.duration = std::min(t_event, t_censor);
        if (rec.event)
            rec.stratum = event_strata[event_rr++ % 2];
        else
            rec.stratum = censor_strata[censor_rr++ % 3];
        rec.features.reserve(static_cast<std::size_t>(beta.size()));
        for (Eigen::Index j = 0; j < beta.size(); ++j) rec.features.emplace_back(x[j]);
        ds.subjects.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace survkit
