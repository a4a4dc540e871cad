#include "survkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace survkit {

namespace {
constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;
}  // namespace

std::size_t NetworkConfig::n_parameters(int n_features) const {
    std::size_t total = 0;
    int in = n_features;
    for (int l = 0; l < hidden_layers; ++l) {
        total += static_cast<std::size_t>(in) * nodes_per_layer + nodes_per_layer;
        total += 4u * static_cast<std::size_t>(nodes_per_layer);  // bn
        in = nodes_per_layer;
    }
    total += static_cast<std::size_t>(in) + 1;  // output node
    return total;
}

std::string NetworkConfig::to_json() const {
    nlohmann::json j{{"hidden_layers", hidden_layers},
                     {"nodes_per_layer", nodes_per_layer},
                     {"dropout", dropout},
                     {"weight_decay", weight_decay},
                     {"batch_size", batch_size},
                     {"initial_lr", initial_lr},
                     {"lr_decay_per_cycle", lr_decay_per_cycle},
                     {"initial_cycle_epochs", initial_cycle_epochs},
                     {"max_epochs", max_epochs},
                     {"early_stop_patience", early_stop_patience},
                     {"seed", seed}};
    return j.dump(2);
}

NetworkConfig NetworkConfig::from_json(const std::string& json_text) {
    auto j = nlohmann::json::parse(json_text);
    NetworkConfig c;
    auto get = [&](const char* k, auto& field) {
        if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
    };
    get("hidden_layers", c.hidden_layers);
    get("nodes_per_layer", c.nodes_per_layer);
    get("dropout", c.dropout);
    get("weight_decay", c.weight_decay);
    get("batch_size", c.batch_size);
    get("initial_lr", c.initial_lr);
    get("lr_decay_per_cycle", c.lr_decay_per_cycle);
    get("initial_cycle_epochs", c.initial_cycle_epochs);
    get("max_epochs", c.max_epochs);
    get("early_stop_patience", c.early_stop_patience);
    get("seed", c.seed);
    return c;
}

int NetworkState::n_inputs() const {
    if (linear.empty()) return 0;
    return static_cast<int>(linear.front().W.rows());
}

std::uint64_t schema_content_hash(const std::vector<FeatureSchema>& schema) {
    // FNV-1a over the feature names and kinds.
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= 0x1f;
        h *= 1099511628211ull;
    };
    for (const auto& f : schema) {
        mix(f.name);
        mix(to_string(f.kind));
    }
    return h;
}

NetworkState init_network(const NetworkConfig& config, int n_features) {
    if (n_features < 1) throw std::invalid_argument("init_network: n_features < 1");
    if (config.hidden_layers < 0 || config.nodes_per_layer < 1)
        throw std::invalid_argument("init_network: bad layer configuration");
    if (config.dropout < 0.0 || config.dropout >= 1.0)
        throw std::invalid_argument("init_network: dropout must be in [0,1)");

    NetworkState state;
    state.dropout = config.hidden_layers == 0 ? 0.0 : config.dropout;
    state.dropout_rng.seed(config.seed ^ 0x9e3779b97f4a7c15ull);

    std::mt19937_64 rng(config.seed);
    int in = n_features;
    auto he_uniform = [&](int fan_in, int fan_out) {
        double limit = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> u(-limit, limit);
        Eigen::MatrixXd W(fan_in, fan_out);
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = u(rng);
        return W;
    };
    for (int l = 0; l < config.hidden_layers; ++l) {
        LinearLayer layer;
        layer.W = he_uniform(in, config.nodes_per_layer);
        layer.b = Eigen::VectorXd::Zero(config.nodes_per_layer);
        state.linear.push_back(std::move(layer));
        BatchNormLayer bnl;
        bnl.gamma = Eigen::VectorXd::Ones(config.nodes_per_layer);
        bnl.shift = Eigen::VectorXd::Zero(config.nodes_per_layer);
        bnl.running_mean = Eigen::VectorXd::Zero(config.nodes_per_layer);
        bnl.running_var = Eigen::VectorXd::Ones(config.nodes_per_layer);
        state.bn.push_back(std::move(bnl));
        in = config.nodes_per_layer;
    }
    LinearLayer out;
    out.W = he_uniform(in, 1);
    out.b = Eigen::VectorXd::Zero(1);
    state.linear.push_back(std::move(out));
    return state;
}

namespace {

struct LayerCache {
    Eigen::MatrixXd input;    // activations fed to the linear layer
    Eigen::MatrixXd xhat;     // normalized pre-activation
    Eigen::VectorXd inv_std;  // per-feature 1/sqrt(var + eps)
    Eigen::MatrixXd post_bn;  // gamma * xhat + shift
    Eigen::MatrixXd drop_mask;  // includes the 1/(1-p) scale; empty when p=0
};

Eigen::VectorXd forward_impl(NetworkState& state, const Eigen::MatrixXd& X,
                             std::vector<LayerCache>* caches) {
    if (X.cols() != state.n_inputs())
        throw std::invalid_argument("forward: expected " +
                                    std::to_string(state.n_inputs()) + " columns, got " +
                                    std::to_string(X.cols()));
    const bool training = state.mode == Mode::Train;
    const auto n = X.rows();
    Eigen::MatrixXd a = X;

    for (std::size_t l = 0; l < state.bn.size(); ++l) {
        LayerCache cache;
        if (caches) cache.input = a;
        Eigen::MatrixXd z = (a * state.linear[l].W).rowwise() +
                            state.linear[l].b.transpose();

        auto& bn = state.bn[l];
        Eigen::VectorXd mean, var;
        if (training) {
            mean = z.colwise().mean();
            var = (z.rowwise() - mean.transpose()).array().square().colwise().mean();
            double unbias = n > 1 ? static_cast<double>(n) / (n - 1) : 1.0;
            bn.running_mean = (1.0 - kBnMomentum) * bn.running_mean + kBnMomentum * mean;
            bn.running_var =
                (1.0 - kBnMomentum) * bn.running_var + kBnMomentum * (unbias * var);
        } else {
            mean = bn.running_mean;
            var = bn.running_var;
        }
        Eigen::VectorXd inv_std = (var.array() + kBnEps).rsqrt();
        Eigen::MatrixXd xhat =
            (z.rowwise() - mean.transpose()).array().rowwise() *
            inv_std.transpose().array();
        Eigen::MatrixXd y = (xhat.array().rowwise() * bn.gamma.transpose().array())
                                .rowwise() +
                            bn.shift.transpose().array();

        a = y.cwiseMax(0.0);
        if (training && state.dropout > 0.0) {
            std::bernoulli_distribution keep(1.0 - state.dropout);
            Eigen::MatrixXd mask(a.rows(), a.cols());
            const double scale = 1.0 / (1.0 - state.dropout);
            for (Eigen::Index i = 0; i < mask.rows(); ++i)
                for (Eigen::Index j = 0; j < mask.cols(); ++j)
                    mask(i, j) = keep(state.dropout_rng) ? scale : 0.0;
            a = a.cwiseProduct(mask);
            if (caches) cache.drop_mask = mask;
        }
        if (caches) {
            cache.xhat = std::move(xhat);
            cache.inv_std = std::move(inv_std);
            cache.post_bn = std::move(y);
            caches->push_back(std::move(cache));
        }
    }

    if (caches) {
        LayerCache out_cache;
        out_cache.input = a;
        caches->push_back(std::move(out_cache));
    }
    const auto& out = state.linear.back();
    Eigen::VectorXd g = (a * out.W).col(0).array() + out.b[0];
    for (Eigen::Index i = 0; i < g.size(); ++i)
        if (!std::isfinite(g[i]))
            throw NumericError("forward: non-finite activation at the output layer");
    return g;
}

}  // namespace

Eigen::VectorXd forward(NetworkState& state, const Eigen::MatrixXd& X) {
    return forward_impl(state, X, nullptr);
}

namespace {

/// Shared pass over the batch, sorted by duration: suffix log-sum-exp of
/// the risks gives the risk-set denominators; the ascending prefix of
/// event-weighted inverse denominators gives the risk gradient.
void cox_core(const Eigen::VectorXd& g, const Eigen::VectorXd& T,
              const std::vector<bool>& D, double* loss_out, Eigen::VectorXd* grad_out) {
    const auto n = g.size();
    if (T.size() != n || static_cast<Eigen::Index>(D.size()) != n)
        throw std::invalid_argument("cox_nll: input lengths differ");
    if (std::none_of(D.begin(), D.end(), [](bool e) { return e; }))
        throw std::invalid_argument("cox_nll: batch contains no events");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return T[a] < T[b]; });

    // Reverse pass: running log-sum-exp with max shift.
    std::vector<double> log_risk_sum(static_cast<std::size_t>(n));  // per sorted group start
    {
        double m = -std::numeric_limits<double>::infinity();
        double s = 0.0;
        std::size_t i = order.size();
        std::size_t group_end = order.size();
        while (i-- > 0) {
            // Absorb the whole tie group before recording its denominator.
            double t = T[order[i]];
            std::size_t j = i + 1;
            std::size_t lo = i;
            while (lo > 0 && T[order[lo - 1]] == t) --lo;
            for (std::size_t k = lo; k < j; ++k) {
                double gk = g[order[k]];
                if (gk > m) {
                    s = s * std::exp(m - gk) + 1.0;
                    m = gk;
                } else {
                    s += std::exp(gk - m);
                }
            }
            double lse = m + std::log(s);
            for (std::size_t k = lo; k < j; ++k) log_risk_sum[k] = lse;
            (void)group_end;
            i = lo;  // loop decrement moves past the group
        }
    }

    if (loss_out) {
        double loss = 0.0;
        for (std::size_t k = 0; k < order.size(); ++k)
            if (D[static_cast<std::size_t>(order[k])])
                loss += log_risk_sum[k] - g[order[k]];
        if (!std::isfinite(loss)) throw NumericError("cox_nll: non-finite loss");
        *loss_out = loss;
    }

    if (grad_out) {
        grad_out->resize(n);
        double cum_inv = 0.0;  // sum of 1/W_i over events with T_i <= current group
        std::size_t k = 0;
        while (k < order.size()) {
            double t = T[order[k]];
            std::size_t j = k;
            int d = 0;
            while (j < order.size() && T[order[j]] == t) {
                if (D[static_cast<std::size_t>(order[j])]) ++d;
                ++j;
            }
            if (d > 0) cum_inv += d * std::exp(-log_risk_sum[k]);
            for (std::size_t q = k; q < j; ++q) {
                auto idx = order[q];
                (*grad_out)[idx] = std::exp(g[idx]) * cum_inv -
                                   (D[static_cast<std::size_t>(idx)] ? 1.0 : 0.0);
            }
            k = j;
        }
    }
}

}  // namespace

double cox_nll(const Eigen::VectorXd& risks, const Eigen::VectorXd& durations,
               const std::vector<bool>& events) {
    double loss = 0.0;
    cox_core(risks, durations, events, &loss, nullptr);
    return loss;
}

Eigen::VectorXd cox_nll_risk_grad(const Eigen::VectorXd& risks,
                                  const Eigen::VectorXd& durations,
                                  const std::vector<bool>& events) {
    Eigen::VectorXd grad;
    cox_core(risks, durations, events, nullptr, &grad);
    return grad;
}

double cox_nll_grad(NetworkState& state, const Eigen::MatrixXd& X,
                    const Eigen::VectorXd& durations, const std::vector<bool>& events,
                    Gradients& grads) {
    std::vector<LayerCache> caches;
    Eigen::VectorXd g = forward_impl(state, X, &caches);

    double loss = 0.0;
    Eigen::VectorXd dg;
    cox_core(g, durations, events, &loss, &dg);

    const std::size_t n_hidden = state.bn.size();
    grads.dW.resize(state.linear.size());
    grads.db.resize(state.linear.size());
    grads.dgamma.resize(n_hidden);
    grads.dshift.resize(n_hidden);

    // Output layer.
    const auto& out_cache = caches.back();
    grads.dW.back() = out_cache.input.transpose() * dg;
    grads.db.back() = Eigen::VectorXd::Constant(1, dg.sum());
    Eigen::MatrixXd da = dg * state.linear.back().W.transpose();

    const bool training = state.mode == Mode::Train;
    const double n_rows = static_cast<double>(X.rows());

    for (std::size_t l = n_hidden; l-- > 0;) {
        const auto& cache = caches[l];
        if (cache.drop_mask.size() > 0) da = da.cwiseProduct(cache.drop_mask);
        // ReLU.
        Eigen::MatrixXd dy =
            da.cwiseProduct((cache.post_bn.array() > 0.0).cast<double>().matrix());

        const auto& bn = state.bn[l];
        grads.dgamma[l] = dy.cwiseProduct(cache.xhat).colwise().sum();
        grads.dshift[l] = dy.colwise().sum();

        Eigen::MatrixXd dz;
        if (training) {
            Eigen::MatrixXd dxhat = dy.array().rowwise() * bn.gamma.transpose().array();
            Eigen::VectorXd sum_dxhat = dxhat.colwise().sum();
            Eigen::VectorXd sum_dxhat_xhat =
                dxhat.cwiseProduct(cache.xhat).colwise().sum();
            dz = ((dxhat * n_rows).rowwise() - sum_dxhat.transpose() -
                  (cache.xhat.array().rowwise() * sum_dxhat_xhat.transpose().array())
                      .matrix())
                     .array()
                     .rowwise() *
                 (cache.inv_std / n_rows).transpose().array();
        } else {
            dz = dy.array().rowwise() *
                 (bn.gamma.cwiseProduct(cache.inv_std)).transpose().array();
        }

        grads.dW[l] = cache.input.transpose() * dz;
        grads.db[l] = dz.colwise().sum();
        if (l > 0) da = dz * state.linear[l].W.transpose();
    }
    if (n_hidden == 0) {
        // Degenerate linear model: nothing further to backpropagate.
    }
    return loss;
}

namespace {

struct AdamMoments {
    Eigen::MatrixXd m, v;
    explicit AdamMoments(const Eigen::MatrixXd& shape)
        : m(Eigen::MatrixXd::Zero(shape.rows(), shape.cols())),
          v(Eigen::MatrixXd::Zero(shape.rows(), shape.cols())) {}
};

void adam_step(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
               AdamMoments& mom, double lr, int t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    mom.m = b1 * mom.m + (1.0 - b1) * grad;
    mom.v = b2 * mom.v + (1.0 - b2) * grad.cwiseProduct(grad);
    double c1 = 1.0 - std::pow(b1, t);
    double c2 = 1.0 - std::pow(b2, t);
    param -= (lr / c1) *
             (mom.m.array() / ((mom.v.array() / c2).sqrt() + eps)).matrix();
}

}  // namespace

std::pair<NetworkState, TrainReport> train(const NetworkConfig& config,
                                           const SurvivalDataset& train_ds,
                                           const SurvivalDataset& val_ds,
                                           const PreprocessPlan& plan) {
    if (train_ds.n_events() == 0 || val_ds.n_events() == 0)
        throw std::invalid_argument("train: both datasets must contain an event");
    if (config.batch_size < 2) throw std::invalid_argument("train: batch_size < 2");

    const Eigen::MatrixXd X = apply_plan(plan, train_ds);
    const Eigen::MatrixXd Xv = apply_plan(plan, val_ds);
    const Eigen::VectorXd T = train_ds.durations();
    const Eigen::VectorXd Tv = val_ds.durations();
    const std::vector<bool> D = train_ds.events();
    const std::vector<bool> Dv = val_ds.events();
    const auto n = X.rows();

    NetworkState state = init_network(config, static_cast<int>(X.cols()));
    state.schema_hash = schema_content_hash(train_ds.schema);

    TrainReport report;
    report.weight_decay = config.weight_decay;
    if (config.max_epochs == 0) return {std::move(state), report};

    std::vector<AdamMoments> mW, mb, mgamma, mshift;
    for (const auto& l : state.linear) {
        mW.emplace_back(l.W);
        mb.emplace_back(l.b);
    }
    for (const auto& b : state.bn) {
        mgamma.emplace_back(b.gamma);
        mshift.emplace_back(b.shift);
    }

    std::mt19937_64 shuffle_rng(config.seed ^ 0xc2b2ae3d27d4eb4full);
    const int steps_per_epoch =
        static_cast<int>((n + config.batch_size - 1) / config.batch_size);

    NetworkState best_state = state;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    int adam_t = 0;

    int cycle = 0;
    int cycle_len = config.initial_cycle_epochs;
    int epoch_in_cycle = 0;
    report.cycle_lengths.push_back(cycle_len);
    report.cycle_start_lrs.push_back(config.initial_lr);

    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        if (epoch_in_cycle == cycle_len && epoch > 0) {
            ++cycle;
            cycle_len *= 2;
            epoch_in_cycle = 0;
            report.cycle_lengths.push_back(cycle_len);
            report.cycle_start_lrs.push_back(
                config.initial_lr * std::pow(config.lr_decay_per_cycle, cycle));
        }
        const double base_lr =
            config.initial_lr * std::pow(config.lr_decay_per_cycle, cycle);
        const int cycle_steps = cycle_len * steps_per_epoch;

        std::shuffle(idx.begin(), idx.end(), shuffle_rng);

        // Partition into batches; a batch without events merges into the next
        // one so every subject keeps contributing.
        std::vector<std::vector<Eigen::Index>> batches;
        std::vector<Eigen::Index> pending;
        for (std::size_t s = 0; s < idx.size(); ++s) {
            pending.push_back(idx[s]);
            bool boundary = pending.size() >= static_cast<std::size_t>(config.batch_size);
            if (boundary) {
                bool has_event = std::any_of(pending.begin(), pending.end(),
                                             [&](Eigen::Index i) {
                                                 return D[static_cast<std::size_t>(i)];
                                             });
                if (has_event) {
                    batches.push_back(std::move(pending));
                    pending.clear();
                }
            }
        }
        if (!pending.empty()) {
            bool has_event = std::any_of(pending.begin(), pending.end(),
                                         [&](Eigen::Index i) {
                                             return D[static_cast<std::size_t>(i)];
                                         });
            if (has_event || batches.empty())
                batches.push_back(std::move(pending));
            else
                batches.back().insert(batches.back().end(), pending.begin(),
                                      pending.end());
        }

        state.mode = Mode::Train;
        int step_in_epoch = 0;
        for (const auto& batch : batches) {
            const auto bsz = static_cast<Eigen::Index>(batch.size());
            Eigen::MatrixXd Xb(bsz, X.cols());
            Eigen::VectorXd Tb(bsz);
            std::vector<bool> Db(static_cast<std::size_t>(bsz));
            for (Eigen::Index r = 0; r < bsz; ++r) {
                Xb.row(r) = X.row(batch[static_cast<std::size_t>(r)]);
                Tb[r] = T[batch[static_cast<std::size_t>(r)]];
                Db[static_cast<std::size_t>(r)] =
                    D[static_cast<std::size_t>(batch[static_cast<std::size_t>(r)])];
            }

            Gradients grads;
            double loss;
            try {
                loss = cox_nll_grad(state, Xb, Tb, Db, grads);
            } catch (const NumericError&) {
                throw NumericError("train: diverged at epoch " + std::to_string(epoch));
            }
            if (!std::isfinite(loss))
                throw NumericError("train: diverged at epoch " + std::to_string(epoch));

            const int cycle_step = epoch_in_cycle * steps_per_epoch + step_in_epoch;
            const double lr =
                base_lr * 0.5 *
                (1.0 + std::cos(M_PI * static_cast<double>(cycle_step) /
                                static_cast<double>(cycle_steps)));
            ++adam_t;
            for (std::size_t l = 0; l < state.linear.size(); ++l) {
                // Decoupled weight decay on the weight matrices only.
                if (config.weight_decay > 0.0)
                    state.linear[l].W *= 1.0 - lr * config.weight_decay;
                adam_step(state.linear[l].W, grads.dW[l], mW[l], lr, adam_t);
                adam_step(state.linear[l].b, grads.db[l], mb[l], lr, adam_t);
            }
            for (std::size_t l = 0; l < state.bn.size(); ++l) {
                adam_step(state.bn[l].gamma, grads.dgamma[l], mgamma[l], lr, adam_t);
                adam_step(state.bn[l].shift, grads.dshift[l], mshift[l], lr, adam_t);
            }
            ++step_in_epoch;
        }

        state.mode = Mode::Eval;
        double tl = cox_nll(forward(state, X), T, D);
        double vl = cox_nll(forward(state, Xv), Tv, Dv);
        if (!std::isfinite(tl) || !std::isfinite(vl))
            throw NumericError("train: diverged at epoch " + std::to_string(epoch));
        report.train_loss.push_back(tl);
        report.val_loss.push_back(vl);

        if (vl < best_val) {
            best_val = vl;
            best_state = state;
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best > config.early_stop_patience) {
                report.stopped_early = true;
                break;
            }
        }
        ++epoch_in_cycle;
    }

    best_state.mode = Mode::Eval;
    return {std::move(best_state), std::move(report)};
}

Eigen::VectorXd predict_risk(const NetworkState& state, const PreprocessPlan& plan,
                             const SurvivalDataset& ds) {
    if (state.schema_hash != 0 &&
        state.schema_hash != schema_content_hash(ds.schema))
        throw DataError("predict_risk: dataset schema does not match the model");
    NetworkState eval_state = state;
    eval_state.mode = Mode::Eval;
    return forward(eval_state, apply_plan(plan, ds));
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    auto rows = static_cast<Eigen::Index>(j.size());
    auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]
                          .get<double>();
    return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

}  // namespace

std::string NetworkState::to_json(const NetworkConfig& config) const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["config"] = nlohmann::json::parse(config.to_json());
    j["schema_hash"] = schema_hash;
    j["dropout"] = dropout;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : linear)
        layers.push_back({{"W", matrix_to_json(l.W)}, {"b", vector_to_json(l.b)}});
    j["linear"] = std::move(layers);
    nlohmann::json bns = nlohmann::json::array();
    for (const auto& b : bn)
        bns.push_back({{"gamma", vector_to_json(b.gamma)},
                       {"shift", vector_to_json(b.shift)},
                       {"running_mean", vector_to_json(b.running_mean)},
                       {"running_var", vector_to_json(b.running_var)}});
    j["batch_norm"] = std::move(bns);
    return j.dump();
}

NetworkState NetworkState::from_json(const std::string& json_text,
                                     NetworkConfig* config_out) {
    auto j = nlohmann::json::parse(json_text);
    if (j.at("format_version").get<int>() != 1)
        throw DataError("unsupported model artifact version");
    NetworkState state;
    state.schema_hash = j.at("schema_hash").get<std::uint64_t>();
    state.dropout = j.at("dropout").get<double>();
    for (const auto& l : j.at("linear")) {
        LinearLayer layer;
        layer.W = matrix_from_json(l.at("W"));
        layer.b = vector_from_json(l.at("b"));
        state.linear.push_back(std::move(layer));
    }
    for (const auto& b : j.at("batch_norm")) {
        BatchNormLayer bnl;
        bnl.gamma = vector_from_json(b.at("gamma"));
        bnl.shift = vector_from_json(b.at("shift"));
        bnl.running_mean = vector_from_json(b.at("running_mean"));
        bnl.running_var = vector_from_json(b.at("running_var"));
        state.bn.push_back(std::move(bnl));
    }
    if (config_out)
        *config_out = NetworkConfig::from_json(j.at("config").dump());
    return state;
}

}  // namespace survkit
