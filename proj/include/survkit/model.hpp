#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "survkit/dataset.hpp"
#include "survkit/preprocess.hpp"

namespace survkit {

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Hyperparameters of the risk model and its training run. Defaults are
/// the configuration used for all feature-set experiments (3x75 network,
/// dropout 0.3, weight decay 0.01, batch 16).
struct NetworkConfig {
    int hidden_layers = 3;
    int nodes_per_layer = 75;
    double dropout = 0.3;
    double weight_decay = 0.01;
    int batch_size = 16;
    double initial_lr = 0.01;
    double lr_decay_per_cycle = 0.8;
    int initial_cycle_epochs = 1;
    int max_epochs = 100;
    int early_stop_patience = 10;
    std::uint64_t seed = 0;

    std::size_t n_parameters(int n_features) const;
    std::string to_json() const;
    static NetworkConfig from_json(const std::string& json_text);
};

struct LinearLayer {
    Eigen::MatrixXd W;  // inputs x outputs
    Eigen::VectorXd b;
};

struct BatchNormLayer {
    Eigen::VectorXd gamma;
    Eigen::VectorXd shift;
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;
};

enum class Mode { Train, Eval };

/// MLP risk model g(x). hidden layers use linear -> batch norm -> ReLU ->
/// dropout; the output layer is a single linear node. With zero hidden
/// layers the model degenerates to the linear Cox predictor and batch
/// norm / dropout are absent.
struct NetworkState {
    std::vector<LinearLayer> linear;    // hidden layers plus the output layer
    std::vector<BatchNormLayer> bn;     // one per hidden layer
    double dropout = 0.0;
    Mode mode = Mode::Eval;
    std::uint64_t schema_hash = 0;
    std::mt19937_64 dropout_rng{0};

    int n_inputs() const;
    int n_hidden_layers() const { return static_cast<int>(bn.size()); }

    std::string to_json(const NetworkConfig& config) const;
    static NetworkState from_json(const std::string& json_text,
                                  NetworkConfig* config_out = nullptr);
};

std::uint64_t schema_content_hash(const std::vector<FeatureSchema>& schema);

/// He-uniform weights, zero biases, identity batch norm.
NetworkState init_network(const NetworkConfig& config, int n_features);

/// Risk per row. Train mode uses batch statistics and draws dropout masks
/// from the state's seeded stream (and updates the running batch-norm
/// statistics); eval mode is deterministic.
Eigen::VectorXd forward(NetworkState& state, const Eigen::MatrixXd& X);

/// Negative Cox partial log-likelihood with Breslow tie handling over the
/// given batch: sum over events i of log sum_{j: T_j >= T_i} exp(g_j - g_i),
/// computed with the log-sum-exp shift. Throws if the batch has no events.
double cox_nll(const Eigen::VectorXd& risks, const Eigen::VectorXd& durations,
               const std::vector<bool>& events);

/// Gradient of cox_nll with respect to the risks:
/// d/dg_k = sum_{i: D_i=1} [pi_ik - 1{k=i}].
Eigen::VectorXd cox_nll_risk_grad(const Eigen::VectorXd& risks,
                                  const Eigen::VectorXd& durations,
                                  const std::vector<bool>& events);

struct Gradients {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
    std::vector<Eigen::VectorXd> dgamma;
    std::vector<Eigen::VectorXd> dshift;
};

/// Backpropagates the Eq-3 loss through the network for one batch,
/// honoring the state's mode. Returns the batch loss.
double cox_nll_grad(NetworkState& state, const Eigen::MatrixXd& X,
                    const Eigen::VectorXd& durations, const std::vector<bool>& events,
                    Gradients& grads);

struct TrainReport {
    std::vector<double> train_loss;  // full-dataset Eq-3 loss per epoch, eval mode
    std::vector<double> val_loss;
    int best_epoch = -1;             // 0-based; -1 when no epochs ran
    bool stopped_early = false;
    std::vector<int> cycle_lengths;       // epochs per completed-or-started cycle
    std::vector<double> cycle_start_lrs;  // geometric with ratio lr_decay_per_cycle
    double weight_decay = 0.0;
};

/// Minimizes the Cox loss over mini-batches with AdamW, warm restarts
/// (cosine annealing within each cycle, cycle length doubling, learning
/// rate scaled by lr_decay_per_cycle at each restart) and early stopping
/// on the full-validation-set loss. Returns the best-validation state.
std::pair<NetworkState, TrainReport> train(const NetworkConfig& config,
                                           const SurvivalDataset& train_ds,
                                           const SurvivalDataset& val_ds,
                                           const PreprocessPlan& plan);

/// Eval-mode composition of apply_plan and forward.
Eigen::VectorXd predict_risk(const NetworkState& state, const PreprocessPlan& plan,
                             const SurvivalDataset& ds);

}  // namespace survkit
