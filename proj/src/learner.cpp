#include "metatutor/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace metatutor {

namespace {

using Rng = std::mt19937_64;

DenseLayer zero_layer(std::size_t in, std::size_t out) {
  return {in, out, std::vector<double>(in * out, 0.0), std::vector<double>(out, 0.0)};
}

std::vector<DenseLayer> zero_layers(const std::vector<std::size_t>& sizes) {
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) layers.push_back(zero_layer(sizes[l], sizes[l + 1]));
  return layers;
}

double& flat_parameter(std::vector<DenseLayer>& layers, std::size_t index) {
  for (auto& layer : layers) {
    if (index < layer.weights.size()) return layer.weights[index];
    index -= layer.weights.size();
    if (index < layer.biases.size()) return layer.biases[index];
    index -= layer.biases.size();
  }
  throw Error("parameter index out of range");
}

/// acts[l] holds the output of layer l (ReLU for hidden layers).
void forward_cached(const QNetwork& net, std::span<const double> x,
                    std::vector<std::vector<double>>& acts) {
  if (x.size() != net.input_size()) {
    throw Error("state length " + std::to_string(x.size()) + " does not match network input " +
                std::to_string(net.input_size()));
  }
  const auto& layers = net.layers();
  acts.resize(layers.size());
  std::span<const double> in = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    auto& out = acts[l];
    out.assign(layer.biases.begin(), layer.biases.end());
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double xi = in[i];
      if (xi == 0.0) continue;
      const double* row = layer.weights.data() + i * layer.out;
      for (std::size_t j = 0; j < layer.out; ++j) out[j] += xi * row[j];
    }
    if (l + 1 < layers.size()) {
      for (auto& v : out) v = v > 0.0 ? v : 0.0;
    }
    in = out;
  }
}

}  // namespace

QNetwork::QNetwork(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw Error("a network needs at least an input and an output layer");
  for (auto s : sizes_)
    if (s == 0) throw Error("layer sizes must be positive");
  layers_ = zero_layers(sizes_);
}

std::size_t QNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.biases.size();
  return n;
}

double& QNetwork::parameter(std::size_t index) { return flat_parameter(layers_, index); }

void QNetwork::validate() const {
  if (layers_.size() + 1 != sizes_.size()) throw Error("layer count mismatch");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.in != sizes_[l] || layer.out != sizes_[l + 1] ||
        layer.weights.size() != layer.in * layer.out || layer.biases.size() != layer.out) {
      throw Error("layer " + std::to_string(l) + " shape mismatch");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(layer.weights.begin(), layer.weights.end(), finite) ||
        !std::all_of(layer.biases.begin(), layer.biases.end(), finite)) {
      throw Error("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

QNetwork init_network(std::uint64_t seed, const std::vector<std::size_t>& layer_sizes) {
  QNetwork net(layer_sizes);
  Rng rng(seed);
  for (auto& layer : net.layers()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& w : layer.weights) w = u(rng);
  }
  return net;
}

std::vector<double> forward(const QNetwork& net, std::span<const double> x) {
  std::vector<std::vector<double>> acts;
  forward_cached(net, x, acts);
  return std::move(acts.back());
}

std::vector<double> forward(const QNetwork& net, const StudentState& state) {
  return forward(net, std::span<const double>(state.features));
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw Error("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

double ddqn_target(const QNetwork& main, const QNetwork& target, const Transition& t,
                   double gamma, double reward_scale) {
  const double r = t.reward * reward_scale;
  if (t.terminal || !t.next_state) return r;
  const auto selected = argmax(forward(main, *t.next_state));
  return r + gamma * forward(target, *t.next_state)[selected];
}

double dqn_target(const QNetwork& target, const Transition& t, double gamma,
                  double reward_scale) {
  const double r = t.reward * reward_scale;
  if (t.terminal || !t.next_state) return r;
  const auto q = forward(target, *t.next_state);
  return r + gamma * *std::max_element(q.begin(), q.end());
}

namespace {

/// Batch loss in extended precision, so that central differences of nearly
/// flat components are not swamped by cancellation.
long double extended_loss(const QNetwork& net, std::span<const RegressionSample> samples) {
  const auto& layers = net.layers();
  std::vector<long double> in;
  std::vector<long double> out;
  long double loss = 0.0L;
  for (const auto& s : samples) {
    in.assign(s.state.begin(), s.state.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      out.assign(layer.biases.begin(), layer.biases.end());
      for (std::size_t i = 0; i < layer.in; ++i) {
        const double* row = layer.weights.data() + i * layer.out;
        for (std::size_t j = 0; j < layer.out; ++j) out[j] += in[i] * row[j];
      }
      if (l + 1 < layers.size()) {
        for (auto& v : out) v = v > 0.0L ? v : 0.0L;
      }
      std::swap(in, out);
    }
    const long double err = in[s.action] - s.target;
    loss += err * err;
  }
  return loss / static_cast<long double>(samples.size());
}

}  // namespace

double loss_and_gradients(const QNetwork& net, std::span<const RegressionSample> samples,
                          Gradients* grads) {
  if (samples.empty()) throw Error("empty batch");
  const auto& layers = net.layers();
  if (grads) grads->layers = zero_layers(net.layer_sizes());

  thread_local std::vector<std::vector<double>> acts;
  thread_local std::vector<double> delta;
  thread_local std::vector<double> delta_prev;

  const double n = static_cast<double>(samples.size());
  double loss = 0.0;
  for (const auto& s : samples) {
    forward_cached(net, s.state, acts);
    if (s.action >= net.output_size()) throw Error("action index out of range");
    const double err = acts.back()[s.action] - s.target;
    loss += err * err;
    if (!grads) continue;

    delta.assign(net.output_size(), 0.0);
    delta[s.action] = 2.0 * err / n;
    for (std::size_t l = layers.size(); l-- > 0;) {
      const auto& layer = layers[l];
      auto& g = grads->layers[l];
      std::span<const double> input = l == 0 ? s.state : std::span<const double>(acts[l - 1]);
      for (std::size_t i = 0; i < layer.in; ++i) {
        const double xi = input[i];
        if (xi == 0.0) continue;
        double* row = g.weights.data() + i * layer.out;
        for (std::size_t j = 0; j < layer.out; ++j) row[j] += xi * delta[j];
      }
      for (std::size_t j = 0; j < layer.out; ++j) g.biases[j] += delta[j];
      if (l == 0) break;
      delta_prev.assign(layer.in, 0.0);
      for (std::size_t i = 0; i < layer.in; ++i) {
        if (input[i] <= 0.0) continue;  // ReLU gate of the previous layer
        const double* row = layer.weights.data() + i * layer.out;
        double sum = 0.0;
        for (std::size_t j = 0; j < layer.out; ++j) sum += row[j] * delta[j];
        delta_prev[i] = sum;
      }
      std::swap(delta, delta_prev);
    }
  }
  return loss / n;
}

double train_step(QNetwork& main, const QNetwork& target,
                  std::span<const Transition* const> batch, double learning_rate, double gamma,
                  double reward_scale) {
  if (batch.empty()) throw Error("empty batch");
  std::vector<RegressionSample> samples;
  samples.reserve(batch.size());
  for (const Transition* t : batch) {
    samples.push_back({t->state.features, static_cast<std::size_t>(action_code(t->action)),
                       ddqn_target(main, target, *t, gamma, reward_scale)});
  }
  Gradients g;
  const double loss = loss_and_gradients(main, samples, &g);
  auto& layers = main.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t k = 0; k < layers[l].weights.size(); ++k)
      layers[l].weights[k] -= learning_rate * g.layers[l].weights[k];
    for (std::size_t k = 0; k < layers[l].biases.size(); ++k)
      layers[l].biases[k] -= learning_rate * g.layers[l].biases[k];
  }
  return loss;
}

double train_step(QNetwork& main, const QNetwork& target, std::span<const Transition> batch,
                  double learning_rate, double gamma, double reward_scale) {
  std::vector<const Transition*> ptrs;
  for (const auto& t : batch) ptrs.push_back(&t);
  return train_step(main, target, ptrs, learning_rate, gamma, reward_scale);
}

double gradient_check(const QNetwork& net, const QNetwork& target,
                      std::span<const Transition> batch, double gamma, double analytic_scale) {
  if (batch.empty()) throw Error("empty batch");
  constexpr double h = 1e-5;
  std::vector<RegressionSample> samples;
  for (const auto& t : batch) {
    samples.push_back({t.state.features, static_cast<std::size_t>(action_code(t.action)),
                       ddqn_target(net, target, t, gamma)});
  }
  Gradients g;
  loss_and_gradients(net, samples, &g);

  QNetwork probe = net;
  double max_rel = 0.0;
  for (std::size_t p = 0; p < probe.parameter_count(); ++p) {
    double& theta = probe.parameter(p);
    const double original = theta;
    theta = original + h;
    const long double up = extended_loss(probe, samples);
    const long double step_up = static_cast<long double>(theta) - original;
    theta = original - h;
    const long double down = extended_loss(probe, samples);
    const long double step_down = original - static_cast<long double>(theta);
    theta = original;
    const double numeric = static_cast<double>((up - down) / (step_up + step_down));
    const double analytic = analytic_scale * flat_parameter(g.layers, p);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
  }
  return max_rel;
}

void Hyperparams::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error("learning_rate must be positive");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("gamma must lie in [0, 1)");
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (sync_every < 1) throw Error("sync_every must be >= 1");
  if (max_epochs < 1) throw Error("max_epochs must be >= 1");
  if (layer_sizes.size() < 2 || layer_sizes.back() != kActionCount) {
    throw Error("network must end in one output per action");
  }
}

double evaluate_mse(const QNetwork& net, const Dataset& dataset, double gamma,
                    double reward_scale) {
  if (dataset.empty()) throw Error("empty dataset");
  double sum = 0.0;
  for (const auto& t : dataset.transitions()) {
    const double q = forward(net, t.state)[static_cast<std::size_t>(action_code(t.action))];
    const double y = ddqn_target(net, net, t, gamma, reward_scale);
    sum += (q - y) * (q - y);
  }
  return sum / static_cast<double>(dataset.size());
}

double evaluate_mse(const TrainedModel& model, const Dataset& dataset) {
  if (!dataset.empty() && dataset.schema_id() != model.schema_id) {
    throw Error("schema mismatch: model '" + model.schema_id + "', dataset '" +
                dataset.schema_id() + "'");
  }
  return evaluate_mse(model.network, dataset, model.hyperparams.gamma,
                      model.hyperparams.reward_scale());
}

TrainedModel train(const Dataset& train_set, const Dataset& test_set, const Hyperparams& hp,
                   const StepObserver& observer) {
  hp.validate();
  if (train_set.empty() || test_set.empty()) throw Error("empty dataset");
  if (train_set.schema_id() != test_set.schema_id()) {
    throw Error("train and test schemas differ");
  }
  if (hp.layer_sizes.front() != train_set.transitions().front().state.features.size()) {
    throw Error("network input width does not match the dataset features");
  }

  const double scale = hp.reward_scale();
  QNetwork main = init_network(hp.seed, hp.layer_sizes);
  QNetwork target = main;
  Rng rng(derive_seed(hp.seed, "shuffle"));

  TrainedModel model;
  model.schema_id = train_set.schema_id();
  model.hyperparams = hp;
  model.initial_test_mse = evaluate_mse(main, test_set, hp.gamma, scale);
  model.network = main;
  model.test_mse = std::numeric_limits<double>::infinity();

  std::vector<const Transition*> order;
  order.reserve(train_set.size());
  for (const auto& t : train_set.transitions()) order.push_back(&t);

  std::size_t step = 0;
  std::size_t stall = 0;
  for (std::size_t epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const std::size_t len = std::min(hp.batch_size, order.size() - start);
      std::span<const Transition* const> batch(order.data() + start, len);
      loss_sum += train_step(main, target, batch, hp.learning_rate, hp.gamma, scale) *
                  static_cast<double>(len);
      ++step;
      const bool synced = step % hp.sync_every == 0;
      if (synced) target = main;
      if (observer) observer({step, epoch, &main, &target, synced});
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    const double mse = evaluate_mse(main, test_set, hp.gamma, scale);
    model.train_loss_curve.push_back(train_loss);
    model.test_loss_curve.push_back(mse);
    if (!std::isfinite(train_loss) || !std::isfinite(mse)) break;

    const double improvement = model.test_mse - mse;
    if (mse < model.test_mse) {
      model.network = main;
      model.test_mse = mse;
      model.best_epoch = epoch;
    }
    stall = improvement < hp.tolerance ? stall + 1 : 0;
    if (stall >= hp.patience) break;
  }
  if (model.best_epoch == 0) {
    throw Error("training diverged before producing a finite checkpoint");
  }
  return model;
}

}  // namespace metatutor
