#include <fstream>
#include <iomanip>
#include <ostream>

#include "json.hpp"
#include "metatutor/learner.hpp"

namespace metatutor {

namespace {

using nlohmann::json;

json hyperparams_json(const Hyperparams& hp) {
  return {{"learning_rate", hp.learning_rate}, {"gamma", hp.gamma},
          {"batch_size", hp.batch_size},       {"sync_every", hp.sync_every},
          {"max_epochs", hp.max_epochs},       {"patience", hp.patience},
          {"tolerance", hp.tolerance},         {"normalize_rewards", hp.normalize_rewards},
          {"seed", hp.seed}};
}

Hyperparams hyperparams_from_json(const json& j, std::vector<std::size_t> layer_sizes) {
  Hyperparams hp;
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.gamma = j.at("gamma").get<double>();
  hp.batch_size = j.at("batch_size").get<std::size_t>();
  hp.sync_every = j.at("sync_every").get<std::size_t>();
  hp.max_epochs = j.at("max_epochs").get<std::size_t>();
  hp.patience = j.value("patience", hp.patience);
  hp.tolerance = j.value("tolerance", hp.tolerance);
  hp.normalize_rewards = j.value("normalize_rewards", false);
  hp.seed = j.value("seed", std::uint64_t{0});
  hp.layer_sizes = std::move(layer_sizes);
  return hp;
}

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  json weights = json::array();
  json biases = json::array();
  for (const auto& layer : model.network.layers()) {
    weights.push_back(layer.weights);
    biases.push_back(layer.biases);
  }
  json doc{{"schema_id", model.schema_id},
           {"layer_sizes", model.network.layer_sizes()},
           {"weights", weights},
           {"biases", biases},
           {"hyperparams", hyperparams_json(model.hyperparams)},
           {"test_mse", model.test_mse},
           {"initial_test_mse", model.initial_test_mse},
           {"best_epoch", model.best_epoch},
           {"epochs_run", model.test_loss_curve.size()}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model file " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
    TrainedModel m;
    m.schema_id = doc.at("schema_id").get<std::string>();
    auto sizes = doc.at("layer_sizes").get<std::vector<std::size_t>>();
    m.network = QNetwork(sizes);
    const auto& weights = doc.at("weights");
    const auto& biases = doc.at("biases");
    if (weights.size() != m.network.layers().size() || biases.size() != weights.size()) {
      throw Error("model layer count does not match layer_sizes");
    }
    for (std::size_t l = 0; l < m.network.layers().size(); ++l) {
      auto& layer = m.network.layers()[l];
      layer.weights = weights[l].get<std::vector<double>>();
      layer.biases = biases[l].get<std::vector<double>>();
    }
    m.network.validate();
    m.hyperparams = hyperparams_from_json(doc.at("hyperparams"), std::move(sizes));
    m.test_mse = doc.at("test_mse").get<double>();
    m.initial_test_mse = doc.value("initial_test_mse", 0.0);
    m.best_epoch = doc.value("best_epoch", std::size_t{0});
    return m;
  } catch (const json::exception& e) {
    throw Error("malformed model file " + path.string() + ": " + e.what());
  }
}

void write_loss_curve_csv(const TrainedModel& model, std::ostream& out) {
  out << "epoch,train_loss,test_mse\n" << std::setprecision(17);
  for (std::size_t e = 0; e < model.train_loss_curve.size(); ++e) {
    out << e + 1 << ',' << model.train_loss_curve[e] << ',' << model.test_loss_curve[e] << '\n';
  }
}

}  // namespace metatutor
