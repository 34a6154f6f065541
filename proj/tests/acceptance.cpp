// Acceptance run: one PASS/FAIL line per criterion. Optional arguments pick
// criteria by number, e.g. `acceptance 1 2 8`.

#include <boost/math/distributions/students_t.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "msglab/harness.hpp"
#include "msglab/oracle.hpp"

using namespace msglab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "msglab_acceptance" / name;
  fs::remove_all(p);
  return p;
}

ExperimentConfig config(const std::string& file) {
  return load_config(std::string(MSGLAB_CONFIG_DIR) + "/" + file);
}

std::vector<double> finals(const ExperimentResult& r, double MetricsRow::*field) {
  std::vector<double> out;
  for (const auto& rows : r.rows) out.push_back(final_mean(rows, field));
  return out;
}

double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double variance(const std::vector<double>& xs) {
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

// One-sided Welch test of mean(a) > mean(b).
double welch_p_greater(const std::vector<double>& a, const std::vector<double>& b) {
  const double va = variance(a) / static_cast<double>(a.size());
  const double vb = variance(b) / static_cast<double>(b.size());
  const double se = std::sqrt(va + vb);
  const double diff = mean(a) - mean(b);
  if (se == 0.0) return diff > 0.0 ? 0.0 : 1.0;
  const double df = (va + vb) * (va + vb) /
                    (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  boost::math::students_t dist(df);
  return boost::math::cdf(boost::math::complement(dist, diff / se));
}

Outcome lp_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sol = oracle::solve_persuasion_lp(oracle::recletter_game<double>());
  const double dt = seconds_since(t0);
  const double ve = std::abs(sol.sender_value - 2.0 / 3.0);
  const double se = std::max(std::abs(sol.scheme.phi(0, 1) - 1.0), std::abs(sol.scheme.phi(1, 1) - 0.5));
  return {ve <= 1e-9 && se <= 1e-6 && dt < 1.0,
          "value " + fmt(sol.sender_value, 12) + " (err " + fmt(ve) + "), phi(rec|S) " +
              fmt(sol.scheme.phi(0, 1)) + ", phi(rec|W) " + fmt(sol.scheme.phi(1, 1)) + ", " +
              fmt(dt) + " s"};
}

Outcome equilibrium_values() {
  const auto t0 = std::chrono::steady_clock::now();
  RecommendationLetter env;
  using M = oracle::Mat<double>;
  M hire(2, 2), never(2, 2), babble(2, 2), honest(2, 2);
  hire << 1, 0, 0, 1;
  never << 1, 0, 1, 0;
  babble << 0.5, 0.5, 0.5, 0.5;
  honest << 0, 1, 1, 0;
  struct Case {
    M phi, pi;
    double vi, vj;
  };
  std::vector<Case> cases{{babble, never, 0.0, 0.0}, {honest, hire, 1.0 / 3.0, 1.0 / 3.0}};
  for (double eps : {0.1, 0.25}) {
    M lie(2, 2);
    lie << 0, 1, 0.5 + eps, 0.5 - eps;
    cases.push_back({lie, hire, 2.0 / 3.0 - 2.0 * eps / 3.0, 2.0 * eps / 3.0});
  }
  double worst = 0.0;
  std::string values;
  for (const auto& c : cases) {
    const auto v = oracle::exact_msg_value(env, c.phi, {c.pi}, 0.0);
    worst = std::max({worst, std::abs(v.value_i - c.vi), std::abs(v.value_j - c.vj)});
    values += " (" + fmt(v.value_i) + "," + fmt(v.value_j) + ")";
  }
  const double dt = seconds_since(t0);
  return {worst <= 1e-9 && dt < 1.0, "max err " + fmt(worst) + ";" + values + ", " + fmt(dt) + " s"};
}

Outcome lemma1() {
  const auto t0 = std::chrono::steady_clock::now();
  const Lemma1Result r = lemma1_check(100000, 2024);
  const double dt = seconds_since(t0);
  return {r.signaling_rel_error <= 0.02 && r.pg_rel_error > 0.10 && dt < 120.0,
          "signaling rel err " + fmt(r.signaling_rel_error) + ", PG rel err " + fmt(r.pg_rel_error) +
              ", " + fmt(dt) + " s"};
}

Outcome autodiff() {
  const auto t0 = std::chrono::steady_clock::now();
  int checks = 0, failed = 0;
  double worst = 0.0;
  std::string bad;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto results = gradcheck::all_ops(seed);
    results.push_back(gradcheck::two_layer_network(seed));
    for (const auto& r : results) {
      ++checks;
      worst = std::max(worst, r.worst);
      if (!r.ok) {
        ++failed;
        bad += " " + r.name;
      }
    }
  }
  const double dt = seconds_since(t0);
  return {failed == 0 && dt < 30.0, std::to_string(checks) + " checks, " + std::to_string(failed) +
                                        " failed" + bad + ", worst ratio " + fmt(worst) + ", " + fmt(dt) + " s"};
}

Outcome letter_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  auto run = [](Algorithm a) {
    ExperimentConfig c = config("recletter.cfg");
    c.train.algorithm = a;
    c.seeds = parse_seeds("0..14");
    c.output_dir = scratch("letter_" + to_string(a)).string();
    return run_experiment(c);
  };
  const auto sgoc = run(Algorithm::SGOC), dial = run(Algorithm::DIAL), pg = run(Algorithm::PG),
             sg = run(Algorithm::SG);
  const double dt = seconds_since(t0);

  const auto sgoc_i = finals(sgoc, &MetricsRow::reward_sender);
  const int good = static_cast<int>(std::count_if(sgoc_i.begin(), sgoc_i.end(), [](double v) { return v >= 0.55; }));
  const double dial_i = mean(finals(dial, &MetricsRow::reward_sender));
  const double dial_j = mean(finals(dial, &MetricsRow::reward_receiver));
  const double pg_i = mean(finals(pg, &MetricsRow::reward_sender));
  const double sg_i = mean(finals(sg, &MetricsRow::reward_sender));
  const bool ok = good >= 12 && std::abs(dial_i - 1.0 / 3.0) <= 0.1 && std::abs(dial_j - 1.0 / 3.0) <= 0.1 &&
                  pg_i <= 0.1 && sg_i <= 0.1 && dt <= 600.0;
  return {ok, "SGOC >=0.55 in " + std::to_string(good) + "/15 (mean " + fmt(mean(sgoc_i)) + "), DIAL (" +
                  fmt(dial_i) + "," + fmt(dial_j) + "), PG " + fmt(pg_i) + ", SG " + fmt(sg_i) + ", " +
                  fmt(dt) + " s"};
}

Outcome honesty_sweep() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig c = config("recletter.cfg");
  c.train.algorithm = Algorithm::SGOC;
  c.seeds = parse_seeds("0..7");
  c.output_dir = scratch("sweep").string();
  const std::vector<double> lambdas{0.0, 2.5, 5.0}, epsilons{0.0, 0.15, 0.3};
  const auto cells = run_honesty_sweep(c, lambdas, epsilons);
  const double dt = seconds_since(t0);
  auto at = [&](std::size_t li, std::size_t ei) { return cells[li * epsilons.size() + ei].honesty_mean; };
  const double h0 = at(0, 0), h1 = at(1, 1), h2 = at(2, 2);
  const bool ok = cells.size() == 9 && h2 - h0 >= 0.2 && h1 >= h0 && h2 >= h1 && dt <= 900.0;
  return {ok, "diagonal honesty " + fmt(h0) + " -> " + fmt(h1) + " -> " + fmt(h2) + ", " + fmt(dt) + " s"};
}

Outcome goals() {
  const auto t0 = std::chrono::steady_clock::now();
  auto run = [](Algorithm a, bool frozen, const std::string& tag) {
    ExperimentConfig c = config("goals3.cfg");
    c.train.algorithm = a;
    c.train.freeze_sender = frozen;
    c.train.total_episodes = 20000;
    c.seeds = parse_seeds("0..7");
    c.output_dir = scratch("goals_" + tag).string();
    return run_experiment(c);
  };
  const auto sgoc = run(Algorithm::SGOC, false, "sgoc");
  const auto sg = run(Algorithm::SG, false, "sg");
  const auto ctrl = run(Algorithm::SG, true, "control");
  const double dt = seconds_since(t0);

  const auto a_i = finals(sgoc, &MetricsRow::reward_sender), b_i = finals(sg, &MetricsRow::reward_sender),
             c_i = finals(ctrl, &MetricsRow::reward_sender);
  const double a_j = mean(finals(sgoc, &MetricsRow::reward_receiver));
  const double c_j = mean(finals(ctrl, &MetricsRow::reward_receiver));
  const double p_sg = welch_p_greater(a_i, b_i), p_ctrl = welch_p_greater(a_i, c_i);
  const bool ok = p_sg < 0.05 && p_ctrl < 0.05 && a_j >= c_j - 0.1 * std::abs(c_j) && dt <= 7200.0;
  return {ok, "sender SGOC " + fmt(mean(a_i)) + " SG " + fmt(mean(b_i)) + " control " + fmt(mean(c_i)) +
                  " (p " + fmt(p_sg) + ", " + fmt(p_ctrl) + "); receiver SGOC " + fmt(a_j) + " control " +
                  fmt(c_j) + ", " + fmt(dt) + " s"};
}

TrainResult tiny_run(Algorithm a, Environment& env) {
  TrainConfig cfg;
  cfg.algorithm = a;
  const bool letter = env.kind() == EnvKind::RecommendationLetter;
  cfg.gamma = letter ? 0.0 : 0.99;
  cfg.agent.arch = letter ? Architecture::Tabular : Architecture::Mlp;
  cfg.agent.hidden = 16;
  cfg.lagrange.lambda = 0.0;
  cfg.lagrange.epsilon = 0.0;
  cfg.batch_episodes = 8;
  cfg.total_episodes = letter ? 1600 : 64;
  cfg.eval_interval = 16;
  return train(cfg, env, 11);
}

bool bit_identical(TrainResult a, TrainResult b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    if (a.rows[i].reward_sender != b.rows[i].reward_sender || a.rows[i].reward_receiver != b.rows[i].reward_receiver ||
        a.rows[i].honesty != b.rows[i].honesty || a.rows[i].min_constraint_slack != b.rows[i].min_constraint_slack)
      return false;
  const auto na = a.agents.networks(), nb = b.agents.networks();
  for (std::size_t i = 0; i < na.size(); ++i)
    if (na[i]->flat_parameters() != nb[i]->flat_parameters()) return false;
  return true;
}

Outcome properties() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> failures;
  double worst_norm = 0.0;
  long diag_checks = 0, bellman_checks = 0;

  RecommendationLetter letter(3);
  auto goals = make_reaching_goals(3);
  for (Environment* env : {static_cast<Environment*>(&letter), goals.get()}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      RngStreams rng(seed);
      AgentOptions o;
      o.arch = env == &letter ? Architecture::Tabular : Architecture::Mlp;
      o.init_scale = 1.0;
      o.hidden = 16;
      AgentSet ag = make_agents(env->spaces(), o, rng.init);
      const auto trajs = rollout(*env, ag, 4, rng);
      const double gamma = 0.97;
      const Batch b = Batch::from(trajs, gamma, env->spaces().signal_count, env->spaces().action_count);

      const Eigen::MatrixXd phi = ag.scheme.distribution(b.states);
      const Eigen::MatrixXd pi = ag.policy.distribution(b.observations, receiver_features(ag.policy, ag.scheme, b.signals));
      worst_norm = std::max({worst_norm, (phi.rowwise().sum().array() - 1.0).abs().maxCoeff(),
                             (pi.rowwise().sum().array() - 1.0).abs().maxCoeff()});

      const Eigen::MatrixXd e = expected_receiver_value(ag.policy, ag.scheme, ag.sender_w_j, b);
      const Eigen::MatrixXd c = constraint_matrix(phi, e);
      for (Eigen::Index k = 0; k < c.rows(); ++k, ++diag_checks)
        if (c(k, k) != 0.0) failures.push_back("C(s,s) != 0");
      const int k = b.signals.front();
      const auto est = constraint_value_and_grad(ag.scheme, ag.policy, ag.sender_w_j, b, k, k);
      if (est.value != 0.0 || est.grad_eta.cwiseAbs().maxCoeff() != 0.0) failures.push_back("C(s,s) grad != 0");

      for (const auto& t : trajs) {
        const ReturnsBuffer g = compute_returns(t, gamma);
        for (std::size_t i = 0; i < t.length(); ++i, ++bellman_checks) {
          const auto n = static_cast<Eigen::Index>(i);
          const double next_i = i + 1 < t.length() ? g.g_i[n + 1] : 0.0;
          const double next_j = i + 1 < t.length() ? g.g_j[n + 1] : 0.0;
          if (g.g_i[n] != t.transitions[i].reward_sender + gamma * next_i ||
              g.g_j[n] != t.transitions[i].reward_receiver + gamma * next_j)
            failures.push_back("Bellman");
        }
      }
    }
  }
  if (worst_norm > 1e-9) failures.push_back("normalization " + fmt(worst_norm));

  RecommendationLetter one;
  if (!bit_identical(tiny_run(Algorithm::SGOC, one), tiny_run(Algorithm::SG, one))) failures.push_back("SGOC!=SG letter");
  if (!bit_identical(tiny_run(Algorithm::PGOC, one), tiny_run(Algorithm::PG, one))) failures.push_back("PGOC!=PG letter");
  if (!bit_identical(tiny_run(Algorithm::SGOC, *goals), tiny_run(Algorithm::SG, *goals))) failures.push_back("SGOC!=SG goals");
  if (!bit_identical(tiny_run(Algorithm::PGOC, *goals), tiny_run(Algorithm::PG, *goals))) failures.push_back("PGOC!=PG goals");

  const auto game = oracle::recletter_game<double>();
  double lp_min = 1e300;
  for (const auto& r : oracle::check_incentive_compatibility(game, oracle::solve_persuasion_lp(game).scheme))
    if (r.reachable) lp_min = std::min(lp_min, r.slack);
  oracle::ExactScheme<double> blind{oracle::Mat<double>(2, 2)};
  blind.phi << 0, 1, 0, 1;
  const auto b = oracle::check_incentive_compatibility(game, blind);
  if (lp_min < -1e-9) failures.push_back("IC rejects LP scheme");
  if (b[1].follows || std::abs(b[1].slack + 1.0 / 3.0) > 1e-9) failures.push_back("IC accepts uninformative scheme");

  const double dt = seconds_since(t0);
  if (dt >= 60.0) failures.push_back("runtime");
  std::string detail = std::to_string(diag_checks) + " diagonal, " + std::to_string(bellman_checks) +
                       " Bellman checks, max normalization err " + fmt(worst_norm) + ", IC slacks " + fmt(lp_min) +
                       " / " + fmt(b[1].slack) + ", " + fmt(dt) + " s";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"LP oracle on the letter game", lp_oracle},
      {"exact equilibrium values", equilibrium_values},
      {"signaling gradient unbiased, PG biased", lemma1},
      {"autodiff finite-difference checks", autodiff},
      {"letter game end to end", letter_end_to_end},
      {"honesty sweep trend", honesty_sweep},
      {"reaching goals 3x3 ordering", goals},
      {"property suites", properties},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << criteria[i].first << " -- "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
