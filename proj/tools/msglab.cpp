#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "msglab/harness.hpp"

namespace {

msglab::ExperimentConfig base_config(const std::string& path) {
  return path.empty() ? msglab::ExperimentConfig{} : msglab::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"msglab: Markov signaling game experiments"};
  app.require_subcommand(1);

  std::string config_path, algo, env, seeds, out, lambda_grid, epsilon_grid;
  std::optional<double> lambda, epsilon;
  std::optional<long> episodes;
  std::optional<int> jobs;
  bool quiet = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--algo", algo, "pg, pgoc, dial, sg or sgoc");
    sub->add_option("--env", env, "recletter, goals3 or goals5");
    sub->add_option("--seeds", seeds, "a..b or a comma list");
    sub->add_option("--lambda", lambda, "constraint weight");
    sub->add_option("--epsilon", epsilon, "honesty margin");
    sub->add_option("--episodes", episodes, "total training episodes");
    sub->add_option("--jobs", jobs, "worker threads");
    sub->add_option("--out", out, "output directory");
  };

  auto* run = app.add_subcommand("run", "train every seed and write CSVs");
  add_common(run);
  run->add_flag("--quiet", quiet, "suppress the final summary");

  auto* sweep = app.add_subcommand("sweep", "honesty heatmap over a lambda x epsilon grid");
  add_common(sweep);
  sweep->add_option("--lambda-grid", lambda_grid, "comma list")->required();
  sweep->add_option("--epsilon-grid", epsilon_grid, "comma list")->required();

  auto* oracle = app.add_subcommand("oracle", "run the exact-solution checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (oracle->parsed()) {
      const auto rep = msglab::run_oracle_suite(std::cout);
      return rep.all_passed() ? 0 : 1;
    }
    msglab::ExperimentConfig cfg = base_config(config_path);
    if (!algo.empty()) msglab::apply_setting(cfg, "algo", algo);
    if (!env.empty()) msglab::apply_setting(cfg, "env", env);
    if (!seeds.empty()) cfg.seeds = msglab::parse_seeds(seeds);
    if (lambda) cfg.train.lagrange.lambda = *lambda;
    if (epsilon) cfg.train.lagrange.epsilon = *epsilon;
    if (episodes) cfg.train.total_episodes = *episodes;
    if (jobs) cfg.jobs = *jobs;
    if (!out.empty()) cfg.output_dir = out;

    if (sweep->parsed()) {
      const auto cells = msglab::run_honesty_sweep(cfg, msglab::parse_grid(lambda_grid),
                                                   msglab::parse_grid(epsilon_grid));
      std::cout << "lambda,epsilon,honesty_mean,honesty_std\n";
      for (const auto& c : cells)
        std::cout << msglab::format_number(c.lambda) << "," << msglab::format_number(c.epsilon) << ","
                  << msglab::format_number(c.honesty_mean) << ","
                  << msglab::format_number(c.honesty_std) << "\n";
      return 0;
    }

    const auto res = msglab::run_experiment(cfg);
    if (!quiet) {
      std::cout << "seed,reward_sender,reward_receiver,honesty\n";
      for (std::size_t i = 0; i < res.seeds.size(); ++i) {
        const auto& rows = res.rows[i];
        std::cout << res.seeds[i] << ","
                  << msglab::format_number(msglab::final_mean(rows, &msglab::MetricsRow::reward_sender))
                  << ","
                  << msglab::format_number(msglab::final_mean(rows, &msglab::MetricsRow::reward_receiver))
                  << "," << msglab::format_number(msglab::final_mean(rows, &msglab::MetricsRow::honesty))
                  << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
