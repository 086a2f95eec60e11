#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "metatutor/domain.hpp"

namespace metatutor {

/// Fully connected layer; weights are in x out, row-major (w[i * out + j]).
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> biases;

  double& w(std::size_t i, std::size_t j) { return weights[i * out + j]; }
  double w(std::size_t i, std::size_t j) const { return weights[i * out + j]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

inline const std::vector<std::size_t> kDefaultLayerSizes = {kStateSize, 16, 16, kActionCount};

/// Multilayer perceptron Q(s, .; theta): ReLU hidden layers, identity output.
class QNetwork {
 public:
  /// All parameters zero.
  explicit QNetwork(std::vector<std::size_t> layer_sizes = kDefaultLayerSizes);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Flat parameter view: per layer, weights then biases.
  std::size_t parameter_count() const;
  double& parameter(std::size_t index);

  /// Throws Error on input length mismatch or non-finite parameters.
  void validate() const;

  friend bool operator==(const QNetwork&, const QNetwork&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<DenseLayer> layers_;
};

/// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
QNetwork init_network(std::uint64_t seed,
                      const std::vector<std::size_t>& layer_sizes = kDefaultLayerSizes);

/// Throws Error when x does not match the input width.
std::vector<double> forward(const QNetwork& net, std::span<const double> x);
std::vector<double> forward(const QNetwork& net, const StudentState& state);

/// argmax with ties broken by the lowest index.
std::size_t argmax(std::span<const double> values);

/// r when terminal, else r + gamma * Q_target(s', argmax_a' Q_main(s', a')).
/// Rewards are multiplied by reward_scale first.
double ddqn_target(const QNetwork& main, const QNetwork& target, const Transition& t,
                   double gamma, double reward_scale = 1.0);

/// r + gamma * max_a Q_target(s', a); the plain DQN bootstrap.
double dqn_target(const QNetwork& target, const Transition& t, double gamma,
                  double reward_scale = 1.0);

/// One regression example: fit Q(state, action) to target.
struct RegressionSample {
  std::span<const double> state;
  std::size_t action = 0;
  double target = 0.0;
};

/// Gradient of mean((Q(s,a) - y)^2) over the samples, with the same shape as
/// the network's layers.
struct Gradients {
  std::vector<DenseLayer> layers;
};

double loss_and_gradients(const QNetwork& net, std::span<const RegressionSample> samples,
                          Gradients* grads);

/// Mean squared error over the taken actions, then one SGD step on main.
/// Returns the pre-update loss.
double train_step(QNetwork& main, const QNetwork& target,
                  std::span<const Transition* const> batch, double learning_rate, double gamma,
                  double reward_scale = 1.0);
double train_step(QNetwork& main, const QNetwork& target, std::span<const Transition> batch,
                  double learning_rate, double gamma, double reward_scale = 1.0);

/// Max relative error between the analytic gradient (times analytic_scale,
/// a hook for exercising the checker) and central differences with h = 1e-5.
/// Targets are computed once from (net, target) and held fixed.
double gradient_check(const QNetwork& net, const QNetwork& target,
                      std::span<const Transition> batch, double gamma,
                      double analytic_scale = 1.0);

struct Hyperparams {
  double learning_rate = 1e-3;
  double gamma = 0.9;
  std::size_t batch_size = 32;
  std::size_t sync_every = 4;
  std::size_t max_epochs = 2000;
  std::size_t patience = 50;
  double tolerance = 1e-6;
  bool normalize_rewards = false;  // true trains on rewards / 100
  std::uint64_t seed = 0;
  std::vector<std::size_t> layer_sizes = kDefaultLayerSizes;

  double reward_scale() const { return normalize_rewards ? 0.01 : 1.0; }
  void validate() const;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct TrainedModel {
  QNetwork network;  // lowest-test-MSE checkpoint
  std::string schema_id;
  Hyperparams hyperparams;
  std::vector<double> train_loss_curve;
  std::vector<double> test_loss_curve;
  double test_mse = 0.0;
  double initial_test_mse = 0.0;
  std::size_t best_epoch = 0;  // 1-based; 0 means the initial network

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

/// Observed after every gradient step; `synced` is true when the target was
/// refreshed at this step.
struct StepEvent {
  std::size_t step = 0;
  std::size_t epoch = 0;
  const QNetwork* main = nullptr;
  const QNetwork* target = nullptr;
  bool synced = false;
};
using StepObserver = std::function<void(const StepEvent&)>;

TrainedModel train(const Dataset& train_set, const Dataset& test_set, const Hyperparams& hp,
                   const StepObserver& observer = {});

/// Mean of (Q(s,a) - ddqn_target)^2 using `net` as both main and target.
double evaluate_mse(const QNetwork& net, const Dataset& dataset, double gamma,
                    double reward_scale = 1.0);
double evaluate_mse(const TrainedModel& model, const Dataset& dataset);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

/// CSV: epoch,train_loss,test_mse
void write_loss_curve_csv(const TrainedModel& model, std::ostream& out);

}  // namespace metatutor
