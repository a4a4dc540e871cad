// survkit command-line front end: synthetic data generation, training,
// prediction, evaluation, cross-validated experiments, permutation
// importance, hyperparameter search and report tables. Every run writes a
// config echo plus content hashes of its inputs next to the outputs, and
// all files are written atomically (temp file + rename).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "survkit/dataset.hpp"
#include "survkit/harness.hpp"
#include "survkit/hazard.hpp"
#include "survkit/importance.hpp"
#include "survkit/metrics.hpp"
#include "survkit/model.hpp"
#include "survkit/preprocess.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace survkit;

namespace {

// ---------------------------------------------------------------------------
// Small file utilities

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "'");
    std::ostringstream out;
    out << f.rdbuf();
    return out.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot write '" + tmp.string() + "'");
        f << content;
    }
    fs::rename(tmp, path);
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Config file support: a flat JSON object whose keys are the long flag
// names (without the leading dashes). Command-line flags override the file.

class ConfigBinder {
public:
    void bind(CLI::Option* opt, std::string key, std::function<void(const json&)> set) {
        entries_.push_back({opt, std::move(key), std::move(set)});
    }

    void apply(const json& cfg, const std::string& command) const {
        for (const auto& [opt, key, set] : entries_) {
            if (opt->count() > 0) continue;  // flag wins over the file
            auto it = cfg.find(key);
            if (it == cfg.end()) continue;
            try {
                set(*it);
            } catch (const json::exception& e) {
                throw DataError(command + ": bad config value for '" + key + "': " +
                                e.what());
            }
        }
        for (const auto& [key, value] : cfg.items()) {
            bool known = false;
            for (const auto& [opt, bound_key, set] : entries_)
                if (bound_key == key) known = true;
            if (!known)
                throw DataError(command + ": unknown config key '" + key + "'");
        }
    }

private:
    struct Entry {
        CLI::Option* opt;
        std::string key;
        std::function<void(const json&)> set;
    };
    std::vector<Entry> entries_;
};

// Shared plumbing each subcommand carries.
struct Common {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    ConfigBinder binder;
    std::vector<std::string> input_paths;  // hashed into the config echo
};

void add_common(CLI::App* sub, Common& c) {
    auto* cfg = sub->add_option("--config", c.config_path,
                                "flat JSON config; flags override its keys");
    auto* out = sub->add_option("--out", c.out_dir, "output directory");
    auto* seed = sub->add_option("--seed", c.seed, "random seed");
    c.binder.bind(out, "out", [&c](const json& v) { c.out_dir = v.get<std::string>(); });
    c.binder.bind(seed, "seed",
                  [&c](const json& v) { c.seed = v.get<std::uint64_t>(); });
    (void)cfg;
}

void finish_config(const CLI::App* sub, Common& c) {
    if (c.config_path.empty()) return;
    json cfg;
    try {
        cfg = json::parse(read_file(c.config_path));
    } catch (const json::exception& e) {
        throw DataError(std::string(sub->get_name()) + ": config parse: " + e.what());
    }
    if (!cfg.is_object())
        throw DataError(std::string(sub->get_name()) + ": config must be a JSON object");
    c.binder.apply(cfg, sub->get_name());
    c.input_paths.push_back(c.config_path);
}

void write_config_echo(const std::string& command, const Common& c,
                       const json& settings) {
    json echo{{"command", command}, {"settings", settings}};
    json hashes = json::object();
    for (const auto& p : c.input_paths) hashes[p] = fnv1a_hex(read_file(p));
    echo["input_hashes"] = hashes;
    write_atomic(fs::path(c.out_dir) / "config_echo.json", echo.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Dataset helpers

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw DataError("cannot parse " + what + " entry '" + tok + "'");
        }
    }
    if (out.empty()) throw DataError(what + " is empty");
    return out;
}

SurvivalDataset load_inputs(const std::string& data_path, const std::string& schema_path,
                            Common& c) {
    c.input_paths.push_back(data_path);
    c.input_paths.push_back(schema_path);
    return load_csv(data_path, schema_path);
}

/// Restrict and reorder the dataset columns to exactly the named features
/// (the order a fitted plan expects).
SurvivalDataset select_by_names(const SurvivalDataset& ds,
                                const std::vector<std::string>& names) {
    std::vector<std::size_t> cols;
    for (const auto& name : names) {
        bool found = false;
        for (std::size_t j = 0; j < ds.schema.size(); ++j)
            if (ds.schema[j].name == name) {
                cols.push_back(j);
                found = true;
                break;
            }
        if (!found) throw DataError("input data lacks feature '" + name + "'");
    }
    SurvivalDataset out;
    for (auto j : cols) out.schema.push_back(ds.schema[j]);
    for (const auto& subj : ds.subjects) {
        SubjectRecord r = subj;
        r.features.clear();
        for (auto j : cols) r.features.push_back(subj.features[j]);
        out.subjects.push_back(std::move(r));
    }
    return out;
}

struct LoadedModel {
    NetworkConfig config;
    NetworkState state;
    PreprocessPlan plan;
    BaselineHazard baseline;
};

LoadedModel load_model_dir(const std::string& dir, Common& c) {
    LoadedModel m;
    std::string model_path = (fs::path(dir) / "model.json").string();
    std::string plan_path = (fs::path(dir) / "plan.json").string();
    std::string base_path = (fs::path(dir) / "baseline.csv").string();
    m.state = NetworkState::from_json(read_file(model_path), &m.config);
    m.plan = PreprocessPlan::from_json(read_file(plan_path));
    m.baseline = BaselineHazard::from_csv(read_file(base_path));
    c.input_paths.push_back(model_path);
    c.input_paths.push_back(plan_path);
    c.input_paths.push_back(base_path);
    return m;
}

std::vector<StepFunction> curves_for(const LoadedModel& m, const SurvivalDataset& ds) {
    auto risks = predict_risk(m.state, m.plan, ds);
    std::vector<StepFunction> curves;
    curves.reserve(static_cast<std::size_t>(risks.size()));
    for (int i = 0; i < risks.size(); ++i)
        curves.push_back(survival_curve(cumulative_hazard(m.baseline, risks[i])));
    return curves;
}

// ---------------------------------------------------------------------------
// Network hyperparameter flags shared by train/cv/importance.

void add_network_flags(CLI::App* sub, NetworkConfig& net, Common& c) {
    auto b = [&](CLI::Option* opt, const std::string& key, auto setter) {
        c.binder.bind(opt, key, setter);
    };
    b(sub->add_option("--hidden-layers", net.hidden_layers),
      "hidden-layers", [&net](const json& v) { net.hidden_layers = v.get<int>(); });
    b(sub->add_option("--nodes", net.nodes_per_layer), "nodes",
      [&net](const json& v) { net.nodes_per_layer = v.get<int>(); });
    b(sub->add_option("--dropout", net.dropout), "dropout",
      [&net](const json& v) { net.dropout = v.get<double>(); });
    b(sub->add_option("--weight-decay", net.weight_decay), "weight-decay",
      [&net](const json& v) { net.weight_decay = v.get<double>(); });
    b(sub->add_option("--batch-size", net.batch_size), "batch-size",
      [&net](const json& v) { net.batch_size = v.get<int>(); });
    b(sub->add_option("--lr", net.initial_lr), "lr",
      [&net](const json& v) { net.initial_lr = v.get<double>(); });
    b(sub->add_option("--max-epochs", net.max_epochs), "max-epochs",
      [&net](const json& v) { net.max_epochs = v.get<int>(); });
    b(sub->add_option("--patience", net.early_stop_patience), "patience",
      [&net](const json& v) { net.early_stop_patience = v.get<int>(); });
}

json network_settings(const NetworkConfig& net) {
    return json{{"hidden-layers", net.hidden_layers},
                {"nodes", net.nodes_per_layer},
                {"dropout", net.dropout},
                {"weight-decay", net.weight_decay},
                {"batch-size", net.batch_size},
                {"lr", net.initial_lr},
                {"max-epochs", net.max_epochs},
                {"patience", net.early_stop_patience}};
}

std::string train_report_json(const TrainReport& rep) {
    json j{{"train_loss", rep.train_loss},
           {"val_loss", rep.val_loss},
           {"best_epoch", rep.best_epoch},
           {"stopped_early", rep.stopped_early},
           {"cycle_lengths", rep.cycle_lengths},
           {"cycle_start_lrs", rep.cycle_start_lrs}};
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns nothing and throws DataError / NumericError on
// failure; main() maps exceptions to exit codes.

struct SynthArgs {
    Common common;
    int n = 1000;
    std::string beta = "1,-0.5,0.25";
    double baseline_rate = 0.1;
    double censor_rate = 0.05;
    bool quadratic = false;
    std::string modalities;  // optional per-feature override, comma list
};

void run_synth(const SynthArgs& a) {
    auto beta_v = parse_double_list(a.beta, "--beta");
    Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(
        beta_v.data(), static_cast<Eigen::Index>(beta_v.size()));
    auto ds = synthesize_cox(a.n, beta, a.baseline_rate, a.censor_rate,
                             a.quadratic ? Nonlinearity::Quadratic : Nonlinearity::Linear,
                             a.common.seed);
    if (!a.modalities.empty()) {
        std::vector<std::string> mods;
        std::stringstream ss(a.modalities);
        std::string tok;
        while (std::getline(ss, tok, ',')) mods.push_back(tok);
        if (mods.size() != ds.schema.size())
            throw DataError("synth: --modalities needs one entry per feature");
        for (std::size_t j = 0; j < mods.size(); ++j)
            ds.schema[j].modality = modality_from_string(mods[j]);
    }

    fs::create_directories(a.common.out_dir);
    fs::path data = fs::path(a.common.out_dir) / "data.csv";
    fs::path schema = fs::path(a.common.out_dir) / "schema.csv";
    fs::path data_tmp = data, schema_tmp = schema;
    data_tmp += ".tmp";
    schema_tmp += ".tmp";
    write_csv(ds, data_tmp.string(), schema_tmp.string());
    fs::rename(data_tmp, data);
    fs::rename(schema_tmp, schema);

    json settings{{"n", a.n},
                  {"beta", a.beta},
                  {"baseline-rate", a.baseline_rate},
                  {"censor-rate", a.censor_rate},
                  {"quadratic", a.quadratic},
                  {"seed", a.common.seed},
                  {"out", a.common.out_dir}};
    if (!a.modalities.empty()) settings["modalities"] = a.modalities;
    write_config_echo("synth", a.common, settings);
}

struct TrainArgs {
    Common common;
    std::string data, schema;
    std::string policy = "out_of_range_max3";
    std::string feature_set;  // optional modality subset, e.g. "GEN+CDC"
    double val_frac = 0.2;
    NetworkConfig net;
};

void run_train(TrainArgs& a) {
    auto ds = load_inputs(a.data, a.schema, a.common);
    if (!a.feature_set.empty())
        ds = select_features(ds, feature_set_from_name(a.feature_set));
    if (a.val_frac <= 0.0 || a.val_frac >= 1.0)
        throw DataError("train: --val-frac must lie in (0, 1)");

    auto plan = fit_plan(ds, impute_policy_from_string(a.policy));
    auto [tr, val] = stratified_split(ds, 1.0 - a.val_frac,
                                      a.common.seed ^ 0x5555aaaa5555aaaaull);
    NetworkConfig cfg = a.net;
    cfg.seed = a.common.seed;
    auto [state, report] = train(cfg, tr, val, plan);

    auto risks = predict_risk(state, plan, ds);
    auto baseline = breslow(risks, ds.durations(), ds.events());

    fs::path out(a.common.out_dir);
    write_atomic(out / "model.json", state.to_json(cfg));
    write_atomic(out / "plan.json", plan.to_json());
    write_atomic(out / "baseline.csv", baseline.to_csv());
    write_atomic(out / "train_report.json", train_report_json(report));

    json settings{{"data", a.data},      {"schema", a.schema},
                  {"policy", a.policy},  {"val-frac", a.val_frac},
                  {"seed", a.common.seed}, {"out", a.common.out_dir},
                  {"network", network_settings(cfg)}};
    if (!a.feature_set.empty()) settings["feature-set"] = a.feature_set;
    write_config_echo("train", a.common, settings);
}

struct PredictArgs {
    Common common;
    std::string data, schema, model_dir;
    double horizon = 10.0;
    double sentinel = 20.0;
};

void run_predict(PredictArgs& a) {
    auto ds_all = load_inputs(a.data, a.schema, a.common);
    auto model = load_model_dir(a.model_dir, a.common);
    auto ds = select_by_names(ds_all, model.plan.feature_names);
    auto curves = curves_for(model, ds);

    std::ostringstream curve_csv;
    curve_csv.precision(17);
    curve_csv << "id,time,survival\n";
    std::ostringstream times_csv;
    times_csv.precision(17);
    times_csv << "id,true_years,event,predicted_years,predicted_converter\n";
    for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
        const auto& subj = ds.subjects[i];
        curve_csv << subj.id << ",0," << curves[i].value_before_first << '\n';
        for (std::size_t k = 0; k < curves[i].times.size(); ++k)
            curve_csv << subj.id << ',' << curves[i].times[k] << ','
                      << curves[i].values[k] << '\n';
        auto [t, converter] = predicted_event_time(curves[i], a.horizon, a.sentinel);
        times_csv << subj.id << ',' << subj.duration << ',' << (subj.event ? 1 : 0)
                  << ',' << t << ',' << (converter ? 1 : 0) << '\n';
    }
    fs::path out(a.common.out_dir);
    write_atomic(out / "curves.csv", curve_csv.str());
    write_atomic(out / "predicted_times.csv", times_csv.str());

    write_config_echo("predict", a.common,
                      json{{"data", a.data},
                           {"schema", a.schema},
                           {"model-dir", a.model_dir},
                           {"horizon", a.horizon},
                           {"sentinel", a.sentinel},
                           {"out", a.common.out_dir}});
}

struct EvalArgs {
    Common common;
    std::string data, schema, model_dir;
    double horizon = 10.0;
};

void run_eval(EvalArgs& a) {
    auto ds_all = load_inputs(a.data, a.schema, a.common);
    auto model = load_model_dir(a.model_dir, a.common);
    auto ds = select_by_names(ds_all, model.plan.feature_names);
    auto curves = curves_for(model, ds);

    auto T = ds.durations();
    auto D = ds.events();
    if (ds.n_events() == 0) throw DataError("eval: dataset has no events");

    double ctd = c_td_index(curves, T, D);
    auto G = kaplan_meier(T, D, KmTarget::Censoring);
    double t1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < T.size(); ++i)
        if (D[static_cast<std::size_t>(i)]) t1 = std::min(t1, T[i]);
    double t2 = a.horizon;
    if (!(t1 < t2)) throw DataError("eval: first event time is past the horizon");
    auto ibs = integrated_brier(curves, T, D, G, t1, t2);

    json brier = json::object();
    for (double t : {1.0, 2.0, 5.0, 10.0}) {
        if (t > a.horizon) continue;
        auto b = brier_score_at(curves, T, D, G, t);
        brier[std::to_string(static_cast<int>(t)) + "y"] =
            json{{"value", b.value}, {"excluded_terms", b.excluded_terms}};
    }
    json metrics{{"ctd", ctd},
                 {"ibs", ibs.value},
                 {"ibs_t1", t1},
                 {"ibs_t2", t2},
                 {"ibs_grid_refinement_delta", ibs.grid_refinement_delta},
                 {"brier", brier},
                 {"n_subjects", ds.n_subjects()},
                 {"n_events", ds.n_events()}};
    write_atomic(fs::path(a.common.out_dir) / "metrics.json", metrics.dump(2) + "\n");

    write_config_echo("eval", a.common,
                      json{{"data", a.data},
                           {"schema", a.schema},
                           {"model-dir", a.model_dir},
                           {"horizon", a.horizon},
                           {"out", a.common.out_dir}});
}

struct CvArgs {
    Common common;
    std::string data, schema;
    std::string feature_sets = "GEN+MRI+CDC";  // comma-separated set names
    std::string policy = "out_of_range_max3";
    int n_splits = 10;
    double train_frac = 0.8;
    double val_frac = 0.2;
    double horizon = 10.0;
    int jobs = 1;
    NetworkConfig net;
};

void run_cv(CvArgs& a) {
    auto ds = load_inputs(a.data, a.schema, a.common);

    ExperimentPlan plan;
    std::stringstream ss(a.feature_sets);
    std::string tok;
    while (std::getline(ss, tok, ','))
        plan.feature_sets.push_back(feature_set_from_name(tok));
    if (plan.feature_sets.empty()) throw DataError("cv: no feature sets given");
    plan.n_splits = a.n_splits;
    plan.train_frac = a.train_frac;
    plan.internal_val_frac = a.val_frac;
    plan.policy = impute_policy_from_string(a.policy);
    plan.network = a.net;
    plan.network.seed = a.common.seed;
    plan.horizon_years = a.horizon;

    auto results = run_feature_set_experiments(plan, ds, a.jobs);

    fs::path out(a.common.out_dir);
    write_atomic(out / "manifest.json", results.manifest_json(plan));
    for (const auto& set : results.per_set) {
        write_atomic(out / ("ctd_" + set.name + ".csv"), set.ctd.to_csv());
        write_atomic(out / ("ibs_" + set.name + ".csv"), set.ibs.to_csv());
    }

    write_config_echo("cv", a.common,
                      json{{"data", a.data},
                           {"schema", a.schema},
                           {"feature-sets", a.feature_sets},
                           {"policy", a.policy},
                           {"n-splits", a.n_splits},
                           {"train-frac", a.train_frac},
                           {"val-frac", a.val_frac},
                           {"horizon", a.horizon},
                           {"jobs", a.jobs},
                           {"seed", a.common.seed},
                           {"out", a.common.out_dir},
                           {"network", network_settings(plan.network)}});
}

struct ImportanceArgs {
    Common common;
    std::string data, schema;
    std::string feature_set = "GEN+MRI+CDC";
    std::string policy = "out_of_range_max3";
    int n_splits = 10;
    int shuffles = 10;
    NetworkConfig net;
};

void run_importance(ImportanceArgs& a) {
    auto ds = load_inputs(a.data, a.schema, a.common);

    ExperimentPlan plan;
    plan.n_splits = a.n_splits;
    plan.importance_shuffles = a.shuffles;
    plan.policy = impute_policy_from_string(a.policy);
    plan.network = a.net;
    plan.network.seed = a.common.seed;

    auto res = importance_prune_retrain(plan, ds, feature_set_from_name(a.feature_set));

    std::ostringstream csv;
    csv.precision(17);
    csv << "feature,mean_importance,kept\n";
    std::set<std::string> kept(res.kept_features.begin(), res.kept_features.end());
    for (const auto& [name, imp] : res.mean_importance)
        csv << name << ',' << imp << ',' << (kept.count(name) ? 1 : 0) << '\n';
    write_atomic(fs::path(a.common.out_dir) / "importance.csv", csv.str());

    json j{{"kept_features", res.kept_features},
           {"mean_importance", res.mean_importance},
           {"ctd_before",
            {{"mean", res.ctd_before.mean()}, {"values", res.ctd_before.per_split}}},
           {"ctd_after",
            {{"mean", res.ctd_after.mean()}, {"values", res.ctd_after.per_split}}},
           {"ibs_before",
            {{"mean", res.ibs_before.mean()}, {"values", res.ibs_before.per_split}}},
           {"ibs_after",
            {{"mean", res.ibs_after.mean()}, {"values", res.ibs_after.per_split}}},
           {"ctd_t_test", {{"t", res.ctd_test.t_stat}, {"p", res.ctd_test.p}}},
           {"ibs_t_test", {{"t", res.ibs_test.t_stat}, {"p", res.ibs_test.p}}}};
    write_atomic(fs::path(a.common.out_dir) / "prune_retrain.json", j.dump(2) + "\n");

    write_config_echo("importance", a.common,
                      json{{"data", a.data},
                           {"schema", a.schema},
                           {"feature-set", a.feature_set},
                           {"policy", a.policy},
                           {"n-splits", a.n_splits},
                           {"shuffles", a.shuffles},
                           {"seed", a.common.seed},
                           {"out", a.common.out_dir},
                           {"network", network_settings(plan.network)}});
}

struct SearchArgs {
    Common common;
    std::string data, schema;
    std::string policy = "out_of_range_max3";
    std::string grid_hidden_layers = "3";
    std::string grid_nodes = "75";
    std::string grid_dropout = "0.3";
    std::string grid_weight_decay = "0.01";
    std::string grid_batch_size = "16";
    int n_splits = 10;
    int budget = 64;
    NetworkConfig net;  // non-grid fields of every candidate
};

void run_search(SearchArgs& a) {
    auto ds = load_inputs(a.data, a.schema, a.common);

    SearchSpace space;
    auto ints = [](const std::string& s, const std::string& what) {
        std::vector<int> out;
        for (double v : parse_double_list(s, what)) out.push_back(static_cast<int>(v));
        return out;
    };
    space.hidden_layers = ints(a.grid_hidden_layers, "--grid-hidden-layers");
    space.nodes_per_layer = ints(a.grid_nodes, "--grid-nodes");
    space.dropout = parse_double_list(a.grid_dropout, "--grid-dropout");
    space.weight_decay = parse_double_list(a.grid_weight_decay, "--grid-weight-decay");
    space.batch_size = ints(a.grid_batch_size, "--grid-batch-size");
    space.base = a.net;
    space.base.seed = a.common.seed;

    auto best = hyperparameter_search(space, ds, impute_policy_from_string(a.policy),
                                      a.n_splits, a.budget);
    write_atomic(fs::path(a.common.out_dir) / "best_config.json", best.to_json());

    write_config_echo("search", a.common,
                      json{{"data", a.data},
                           {"schema", a.schema},
                           {"policy", a.policy},
                           {"grid-hidden-layers", a.grid_hidden_layers},
                           {"grid-nodes", a.grid_nodes},
                           {"grid-dropout", a.grid_dropout},
                           {"grid-weight-decay", a.grid_weight_decay},
                           {"grid-batch-size", a.grid_batch_size},
                           {"n-splits", a.n_splits},
                           {"budget", a.budget},
                           {"seed", a.common.seed},
                           {"out", a.common.out_dir}});
}

struct ReportArgs {
    Common common;
    std::string data, schema, model_dir;
    std::string probe_times = "1,2,5,10";
    double horizon = 10.0;
    double sentinel = 20.0;
};

void run_report(ReportArgs& a) {
    auto ds_all = load_inputs(a.data, a.schema, a.common);
    auto model = load_model_dir(a.model_dir, a.common);
    auto ds = select_by_names(ds_all, model.plan.feature_names);
    auto curves = curves_for(model, ds);

    // Survival-probability binning per progression group and probe time.
    std::vector<std::string> groups;
    for (const auto& s : ds.subjects)
        groups.push_back(stratum_is_progressive(s.stratum) ? "progressive"
                                                           : "non-progressive");
    auto probes = parse_double_list(a.probe_times, "--probe-times");
    auto bins = survival_binning(curves, groups, probes);
    write_atomic(fs::path(a.common.out_dir) / "binning.csv", bins.to_csv());

    // Predicted-minus-true conversion times for the observed converters.
    std::vector<ConversionRecord> records;
    for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
        if (!ds.subjects[i].event) continue;
        ConversionRecord r;
        r.id = ds.subjects[i].id;
        r.true_time = ds.subjects[i].duration;
        auto [t, converter] = predicted_event_time(curves[i], a.horizon, a.sentinel);
        r.predicted_time = t;
        r.predicted_converter = converter;
        records.push_back(std::move(r));
    }
    if (records.empty()) throw DataError("report: dataset has no events");
    auto hist = conversion_histogram(records);
    write_atomic(fs::path(a.common.out_dir) / "conversion_histogram.csv", hist.to_csv());

    write_config_echo("report", a.common,
                      json{{"data", a.data},
                           {"schema", a.schema},
                           {"model-dir", a.model_dir},
                           {"probe-times", a.probe_times},
                           {"horizon", a.horizon},
                           {"sentinel", a.sentinel},
                           {"out", a.common.out_dir}});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"survkit: multi-modal survival analysis pipeline"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* sub_synth = app.add_subcommand("synth", "generate synthetic survival data");
    add_common(sub_synth, synth.common);
    {
        auto& c = synth.common;
        c.binder.bind(sub_synth->add_option("--n", synth.n, "number of subjects"), "n",
                      [&](const json& v) { synth.n = v.get<int>(); });
        c.binder.bind(sub_synth->add_option("--beta", synth.beta,
                                            "comma-separated coefficients"),
                      "beta", [&](const json& v) { synth.beta = v.get<std::string>(); });
        c.binder.bind(
            sub_synth->add_option("--baseline-rate", synth.baseline_rate),
            "baseline-rate",
            [&](const json& v) { synth.baseline_rate = v.get<double>(); });
        c.binder.bind(sub_synth->add_option("--censor-rate", synth.censor_rate),
                      "censor-rate",
                      [&](const json& v) { synth.censor_rate = v.get<double>(); });
        c.binder.bind(sub_synth->add_flag("--quadratic", synth.quadratic,
                                          "add 0.5*x1^2 to the linear predictor"),
                      "quadratic",
                      [&](const json& v) { synth.quadratic = v.get<bool>(); });
        c.binder.bind(sub_synth->add_option("--modalities", synth.modalities,
                                            "per-feature modality list"),
                      "modalities",
                      [&](const json& v) { synth.modalities = v.get<std::string>(); });
    }

    TrainArgs train_a;
    auto* sub_train = app.add_subcommand("train", "fit the risk model");
    add_common(sub_train, train_a.common);
    sub_train->add_option("--data", train_a.data, "training data CSV")->required();
    sub_train->add_option("--schema", train_a.schema, "feature schema CSV")->required();
    {
        auto& c = train_a.common;
        c.binder.bind(sub_train->add_option("--policy", train_a.policy), "policy",
                      [&](const json& v) { train_a.policy = v.get<std::string>(); });
        c.binder.bind(sub_train->add_option("--feature-set", train_a.feature_set),
                      "feature-set",
                      [&](const json& v) { train_a.feature_set = v.get<std::string>(); });
        c.binder.bind(sub_train->add_option("--val-frac", train_a.val_frac), "val-frac",
                      [&](const json& v) { train_a.val_frac = v.get<double>(); });
        add_network_flags(sub_train, train_a.net, c);
    }

    PredictArgs pred;
    auto* sub_pred = app.add_subcommand("predict", "per-subject survival curves");
    add_common(sub_pred, pred.common);
    sub_pred->add_option("--data", pred.data)->required();
    sub_pred->add_option("--schema", pred.schema)->required();
    sub_pred->add_option("--model-dir", pred.model_dir)->required();
    pred.common.binder.bind(sub_pred->add_option("--horizon", pred.horizon), "horizon",
                            [&](const json& v) { pred.horizon = v.get<double>(); });
    pred.common.binder.bind(sub_pred->add_option("--sentinel", pred.sentinel),
                            "sentinel",
                            [&](const json& v) { pred.sentinel = v.get<double>(); });

    EvalArgs eval_a;
    auto* sub_eval = app.add_subcommand("eval", "score a held-out dataset");
    add_common(sub_eval, eval_a.common);
    sub_eval->add_option("--data", eval_a.data)->required();
    sub_eval->add_option("--schema", eval_a.schema)->required();
    sub_eval->add_option("--model-dir", eval_a.model_dir)->required();
    eval_a.common.binder.bind(sub_eval->add_option("--horizon", eval_a.horizon),
                              "horizon",
                              [&](const json& v) { eval_a.horizon = v.get<double>(); });

    CvArgs cv;
    auto* sub_cv = app.add_subcommand("cv", "feature-set MC-CV experiments");
    add_common(sub_cv, cv.common);
    sub_cv->add_option("--data", cv.data)->required();
    sub_cv->add_option("--schema", cv.schema)->required();
    {
        auto& c = cv.common;
        c.binder.bind(sub_cv->add_option("--feature-sets", cv.feature_sets,
                                         "comma-separated set names, e.g. GEN,GEN+CDC"),
                      "feature-sets",
                      [&](const json& v) { cv.feature_sets = v.get<std::string>(); });
        c.binder.bind(sub_cv->add_option("--policy", cv.policy), "policy",
                      [&](const json& v) { cv.policy = v.get<std::string>(); });
        c.binder.bind(sub_cv->add_option("--n-splits", cv.n_splits), "n-splits",
                      [&](const json& v) { cv.n_splits = v.get<int>(); });
        c.binder.bind(sub_cv->add_option("--train-frac", cv.train_frac), "train-frac",
                      [&](const json& v) { cv.train_frac = v.get<double>(); });
        c.binder.bind(sub_cv->add_option("--val-frac", cv.val_frac), "val-frac",
                      [&](const json& v) { cv.val_frac = v.get<double>(); });
        c.binder.bind(sub_cv->add_option("--horizon", cv.horizon), "horizon",
                      [&](const json& v) { cv.horizon = v.get<double>(); });
        c.binder.bind(sub_cv->add_option("--jobs", cv.jobs, "concurrent splits"),
                      "jobs", [&](const json& v) { cv.jobs = v.get<int>(); });
        add_network_flags(sub_cv, cv.net, c);
    }

    ImportanceArgs imp;
    auto* sub_imp = app.add_subcommand("importance",
                                       "permutation importance + prune/retrain");
    add_common(sub_imp, imp.common);
    sub_imp->add_option("--data", imp.data)->required();
    sub_imp->add_option("--schema", imp.schema)->required();
    {
        auto& c = imp.common;
        c.binder.bind(sub_imp->add_option("--feature-set", imp.feature_set),
                      "feature-set",
                      [&](const json& v) { imp.feature_set = v.get<std::string>(); });
        c.binder.bind(sub_imp->add_option("--policy", imp.policy), "policy",
                      [&](const json& v) { imp.policy = v.get<std::string>(); });
        c.binder.bind(sub_imp->add_option("--n-splits", imp.n_splits), "n-splits",
                      [&](const json& v) { imp.n_splits = v.get<int>(); });
        c.binder.bind(sub_imp->add_option("--shuffles", imp.shuffles), "shuffles",
                      [&](const json& v) { imp.shuffles = v.get<int>(); });
        add_network_flags(sub_imp, imp.net, c);
    }

    SearchArgs search;
    auto* sub_search = app.add_subcommand("search", "hyperparameter grid search");
    add_common(sub_search, search.common);
    sub_search->add_option("--data", search.data)->required();
    sub_search->add_option("--schema", search.schema)->required();
    {
        auto& c = search.common;
        c.binder.bind(sub_search->add_option("--policy", search.policy), "policy",
                      [&](const json& v) { search.policy = v.get<std::string>(); });
        c.binder.bind(sub_search->add_option("--grid-hidden-layers",
                                             search.grid_hidden_layers),
                      "grid-hidden-layers", [&](const json& v) {
                          search.grid_hidden_layers = v.get<std::string>();
                      });
        c.binder.bind(sub_search->add_option("--grid-nodes", search.grid_nodes),
                      "grid-nodes",
                      [&](const json& v) { search.grid_nodes = v.get<std::string>(); });
        c.binder.bind(sub_search->add_option("--grid-dropout", search.grid_dropout),
                      "grid-dropout",
                      [&](const json& v) { search.grid_dropout = v.get<std::string>(); });
        c.binder.bind(
            sub_search->add_option("--grid-weight-decay", search.grid_weight_decay),
            "grid-weight-decay",
            [&](const json& v) { search.grid_weight_decay = v.get<std::string>(); });
        c.binder.bind(
            sub_search->add_option("--grid-batch-size", search.grid_batch_size),
            "grid-batch-size",
            [&](const json& v) { search.grid_batch_size = v.get<std::string>(); });
        c.binder.bind(sub_search->add_option("--n-splits", search.n_splits), "n-splits",
                      [&](const json& v) { search.n_splits = v.get<int>(); });
        c.binder.bind(sub_search->add_option("--budget", search.budget), "budget",
                      [&](const json& v) { search.budget = v.get<int>(); });
        add_network_flags(sub_search, search.net, c);
    }

    ReportArgs rep;
    auto* sub_rep = app.add_subcommand("report", "binning and conversion tables");
    add_common(sub_rep, rep.common);
    sub_rep->add_option("--data", rep.data)->required();
    sub_rep->add_option("--schema", rep.schema)->required();
    sub_rep->add_option("--model-dir", rep.model_dir)->required();
    {
        auto& c = rep.common;
        c.binder.bind(sub_rep->add_option("--probe-times", rep.probe_times),
                      "probe-times",
                      [&](const json& v) { rep.probe_times = v.get<std::string>(); });
        c.binder.bind(sub_rep->add_option("--horizon", rep.horizon), "horizon",
                      [&](const json& v) { rep.horizon = v.get<double>(); });
        c.binder.bind(sub_rep->add_option("--sentinel", rep.sentinel), "sentinel",
                      [&](const json& v) { rep.sentinel = v.get<double>(); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // usage error
    }

    std::string stage;
    try {
        if (sub_synth->parsed()) {
            stage = "synth";
            finish_config(sub_synth, synth.common);
            run_synth(synth);
        } else if (sub_train->parsed()) {
            stage = "train";
            finish_config(sub_train, train_a.common);
            run_train(train_a);
        } else if (sub_pred->parsed()) {
            stage = "predict";
            finish_config(sub_pred, pred.common);
            run_predict(pred);
        } else if (sub_eval->parsed()) {
            stage = "eval";
            finish_config(sub_eval, eval_a.common);
            run_eval(eval_a);
        } else if (sub_cv->parsed()) {
            stage = "cv";
            finish_config(sub_cv, cv.common);
            run_cv(cv);
        } else if (sub_imp->parsed()) {
            stage = "importance";
            finish_config(sub_imp, imp.common);
            run_importance(imp);
        } else if (sub_search->parsed()) {
            stage = "search";
            finish_config(sub_search, search.common);
            run_search(search);
        } else if (sub_rep->parsed()) {
            stage = "report";
            finish_config(sub_rep, rep.common);
            run_report(rep);
        }
    } catch (const NumericError& e) {
        std::cerr << "survkit " << stage << ": numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const DataError& e) {
        std::cerr << "survkit " << stage << ": data error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "survkit " << stage << ": data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "survkit " << stage << ": error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
