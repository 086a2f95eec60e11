#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "metatutor/harness.hpp"

int main(int argc, char** argv) {
  namespace mt = metatutor;

  CLI::App app{"Simulate students, train an intervention policy and analyze its deployment."};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::size_t k = 6;
  std::optional<long> total;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "Directory for artifacts")->capture_default_str();
    sub->add_option("--seed", seed, "Override the config seed");
  };

  auto* generate = app.add_subcommand("generate", "Write a synthetic logged dataset");
  auto* train = app.add_subcommand("train", "Train the Q-network on the dataset");
  auto* simulate = app.add_subcommand("simulate", "Deploy the policy on DRL, control and CDL cohorts");
  auto* report = app.add_subcommand("report", "Summaries, decision tables and statistics");
  auto* mine = app.add_subcommand("mine", "Mine compliance rules from session logs");
  auto* print_default = app.add_subcommand("print-default-config", "Print the default config");
  for (auto* sub : {generate, train, simulate, report, mine}) add_common(sub);
  mine->add_option("--k", k, "Number of rules to print")->capture_default_str()->check(CLI::Range(1, 18));
  mine->add_option("--total", total, "Total used as the support denominator");

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_default->parsed()) {
      std::cout << mt::config_to_json(mt::default_config());
      return 0;
    }
    mt::ExperimentConfig config = mt::load_config(config_path);
    if (seed) config.seed = *seed;
    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);

    if (generate->parsed()) mt::cmd_generate(config, out, std::cout);
    if (train->parsed()) mt::cmd_train(config, out, std::cout);
    if (simulate->parsed()) mt::cmd_simulate(config, out, std::cout);
    if (report->parsed()) mt::cmd_report(config, out, std::cout);
    if (mine->parsed()) mt::cmd_mine(config, out, k, total, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
