#include "msglab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "msglab/oracle.hpp"

namespace msglab {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end)
    throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) {
    // Accept integral values written as 2e4.
    const double d = to_double(key, v);
    if (d != std::floor(d)) throw std::invalid_argument("config: '" + key + "' expects an integer");
    return static_cast<long>(d);
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: '" + key + "' expects a boolean, got '" + v + "'");
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p))
    throw std::runtime_error("output directory '" + dir + "' is not writable");
  const fs::path probe = p / ".msglab_probe";
  {
    std::ofstream f(probe);
    if (!f) throw std::runtime_error("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
  return p;
}

}  // namespace

// -- Config --------------------------------------------------------------------------

TrainConfig ExperimentConfig::resolved_train() const {
  TrainConfig t = train;
  const bool letter = env == "recletter";
  t.gamma = gamma.value_or(letter ? 0.0 : 0.99);
  t.agent.arch = arch.value_or(letter ? Architecture::Tabular : Architecture::Mlp);
  return t;
}

std::vector<std::string> ExperimentConfig::violations() const {
  std::vector<std::string> v = resolved_train().violations();
  if (env != "recletter" && env != "goals3" && env != "goals5")
    v.push_back("env must be recletter, goals3 or goals5");
  if (stream_length < 1) v.push_back("stream_length must be >= 1");
  if (seeds.empty()) v.push_back("seeds must be non-empty");
  if (jobs < 1) v.push_back("jobs must be >= 1");
  if (env != "recletter" && arch == Architecture::Tabular)
    v.push_back("tabular networks need one-hot inputs; use arch=mlp for the grid");
  return v;
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  TrainConfig& t = c.train;
  const std::string& v = value;
  if (key == "env") c.env = v;
  else if (key == "algo" || key == "algorithm") t.algorithm = parse_algorithm(v);
  else if (key == "obs") c.obs_mode = parse_obs_mode(v);
  else if (key == "stream_length") c.stream_length = static_cast<int>(to_long(key, v));
  else if (key == "gamma") c.gamma = to_double(key, v);
  else if (key == "lr_critic") t.lr_critic = to_double(key, v);
  else if (key == "lr_actor") t.lr_actor = to_double(key, v);
  else if (key == "lr_scheme") t.lr_scheme = to_double(key, v);
  else if (key == "lr_multiplier") t.lagrange.multiplier_lr = to_double(key, v);
  else if (key == "batch") t.batch_episodes = static_cast<int>(to_long(key, v));
  else if (key == "episodes") t.total_episodes = to_long(key, v);
  else if (key == "eval_interval") t.eval_interval = to_long(key, v);
  else if (key == "lambda") t.lagrange.lambda = to_double(key, v);
  else if (key == "epsilon") t.lagrange.epsilon = to_double(key, v);
  else if (key == "constraint_samples") t.lagrange.constraint_samples = static_cast<int>(to_long(key, v));
  else if (key == "mode") {
    if (v == "lagrangian") t.lagrange.mode = LagrangeMode::Lagrangian;
    else if (v == "dgd") t.lagrange.mode = LagrangeMode::DGD;
    else throw std::invalid_argument("config: mode must be lagrangian or dgd");
  } else if (key == "temperature") t.agent.temperature = to_double(key, v);
  else if (key == "hard") t.agent.hard = to_bool(key, v);
  else if (key == "hidden") t.agent.hidden = static_cast<int>(to_long(key, v));
  else if (key == "init_scale") t.agent.init_scale = to_double(key, v);
  else if (key == "target_sync") t.agent.sync_interval = static_cast<int>(to_long(key, v));
  else if (key == "arch") {
    if (v == "tabular") c.arch = Architecture::Tabular;
    else if (v == "mlp") c.arch = Architecture::Mlp;
    else throw std::invalid_argument("config: arch must be tabular or mlp");
  } else if (key == "freeze_sender") t.freeze_sender = to_bool(key, v);
  else if (key == "bootstrap") t.bootstrap = to_bool(key, v);
  else if (key == "sender_baseline") t.sender_baseline = to_bool(key, v);
  else if (key == "entropy") t.entropy_coef = to_double(key, v);
  else if (key == "max_grad_norm") t.max_grad_norm = to_double(key, v);
  else if (key == "seeds") c.seeds = parse_seeds(v);
  else if (key == "out") c.output_dir = v;
  else if (key == "jobs") c.jobs = static_cast<int>(to_long(key, v));
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& in, const std::string& origin) {
  ExperimentConfig cfg;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(n) + ": expected key=value");
    try {
      apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config " + path);
  return parse_config(f, path);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  const std::string t = trim(text);
  if (const auto dots = t.find(".."); dots != std::string::npos) {
    const long a = to_long("seeds", trim(t.substr(0, dots)));
    const long b = to_long("seeds", trim(t.substr(dots + 2)));
    if (a < 0 || b < a) throw std::invalid_argument("seeds: range must be a..b with 0 <= a <= b");
    for (long s = a; s <= b; ++s) out.push_back(static_cast<std::uint64_t>(s));
    return out;
  }
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const long s = to_long("seeds", item);
    if (s < 0) throw std::invalid_argument("seeds: must be non-negative");
    out.push_back(static_cast<std::uint64_t>(s));
  }
  if (out.empty()) throw std::invalid_argument("seeds: empty list");
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double("grid", item));
  }
  if (out.empty()) throw std::invalid_argument("grid: empty");
  return out;
}

std::unique_ptr<Environment> make_environment(const ExperimentConfig& cfg) {
  if (cfg.env == "recletter") return make_recletter(cfg.stream_length);
  if (cfg.env == "goals3") return make_reaching_goals(3, cfg.obs_mode);
  if (cfg.env == "goals5") return make_reaching_goals(5, cfg.obs_mode);
  throw std::invalid_argument("unknown env '" + cfg.env + "'");
}

std::string resolve_output_dir(const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv("MSGLAB_OUT"); env != nullptr && *env != '\0') return env;
  return "msglab_out";
}

// -- CSV ---------------------------------------------------------------------------------

std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string metrics_csv_header() {
  return "seed,episode,reward_sender,reward_receiver,social_welfare,honesty,min_constraint_slack\n";
}

std::string metrics_csv_line(const MetricsRow& r) {
  std::string s = std::to_string(r.seed) + "," + std::to_string(r.episode_index);
  for (double v : {r.reward_sender, r.reward_receiver, r.social_welfare, r.honesty,
                   r.min_constraint_slack})
    s += "," + format_number(v);
  return s + "\n";
}

// -- Runner ------------------------------------------------------------------------------

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (auto v = cfg.violations(); !v.empty()) {
    std::ostringstream os;
    os << "invalid experiment config:";
    for (const auto& s : v) os << "\n  - " << s;
    throw std::invalid_argument(os.str());
  }
  const fs::path dir = prepare_dir(resolve_output_dir(cfg.output_dir));
  const TrainConfig tc = cfg.resolved_train();
  const std::string stem = cfg.env + "_" + to_string(tc.algorithm);

  ExperimentResult res;
  res.seeds = cfg.seeds;
  res.rows.resize(cfg.seeds.size());
  std::vector<double> wall(cfg.seeds.size(), 0.0);
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      try {
        auto env = make_environment(cfg);
        const auto t0 = std::chrono::steady_clock::now();
        TrainResult r = train(tc, *env, cfg.seeds[i]);
        wall[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string csv = metrics_csv_header();
        for (const auto& row : r.rows) csv += metrics_csv_line(row);
        write_file(dir / (stem + "_seed" + std::to_string(cfg.seeds[i]) + ".csv"), csv);
        res.rows[i] = std::move(r.rows);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int jobs = std::min<int>(cfg.jobs, static_cast<int>(cfg.seeds.size()));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (auto s : cfg.seeds)
    res.files.push_back((dir / (stem + "_seed" + std::to_string(s) + ".csv")).string());

  // Aggregate over every seed, row by row.
  std::string agg =
      "episode,n_seeds,reward_sender_mean,reward_sender_std,reward_receiver_mean,"
      "reward_receiver_std,social_welfare_mean,social_welfare_std,honesty_mean,honesty_std,"
      "min_constraint_slack_mean,min_constraint_slack_std\n";
  std::size_t n_rows = 0;
  for (const auto& r : res.rows) n_rows = std::max(n_rows, r.size());
  using Field = double MetricsRow::*;
  const Field fields[] = {&MetricsRow::reward_sender, &MetricsRow::reward_receiver,
                          &MetricsRow::social_welfare, &MetricsRow::honesty,
                          &MetricsRow::min_constraint_slack};
  for (std::size_t k = 0; k < n_rows; ++k) {
    long episode = 0;
    std::size_t present = 0;
    for (const auto& r : res.rows)
      if (k < r.size()) {
        episode = r[k].episode_index;
        ++present;
      }
    std::string line = std::to_string(episode) + "," + std::to_string(present);
    for (Field f : fields) {
      std::vector<double> xs;
      for (const auto& r : res.rows)
        if (k < r.size()) xs.push_back(r[k].*f);
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      line += "," + format_number(mean) + "," + format_number(sample_std(xs, mean));
    }
    agg += line + "\n";
  }
  write_file(dir / "aggregate.csv", agg);
  res.files.push_back((dir / "aggregate.csv").string());

  std::string timing = "seed,wallclock_seconds,rows\n";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    timing += std::to_string(cfg.seeds[i]) + "," + format_number(wall[i]) + "," +
              std::to_string(res.rows[i].size()) + "\n";
  write_file(dir / "timing.csv", timing);
  return res;
}

std::vector<HeatmapCell> run_honesty_sweep(const ExperimentConfig& base,
                                           const std::vector<double>& lambda_grid,
                                           const std::vector<double>& epsilon_grid) {
  if (lambda_grid.empty() || epsilon_grid.empty())
    throw std::invalid_argument("sweep: grids must be non-empty");
  const fs::path dir = prepare_dir(resolve_output_dir(base.output_dir));
  std::vector<HeatmapCell> cells;
  std::string csv = "lambda,epsilon,honesty_mean,honesty_std,n_seeds\n";
  for (double l : lambda_grid)
    for (double e : epsilon_grid) {
      ExperimentConfig cfg = base;
      cfg.train.lagrange.lambda = l;
      cfg.train.lagrange.epsilon = e;
      cfg.output_dir = (dir / ("lambda" + format_number(l) + "_epsilon" + format_number(e))).string();
      const ExperimentResult r = run_experiment(cfg);
      std::vector<double> h;
      for (const auto& rows : r.rows)
        if (!rows.empty()) h.push_back(final_mean(rows, &MetricsRow::honesty));
      HeatmapCell cell{l, e, 0.0, 0.0, h.size()};
      for (double x : h) cell.honesty_mean += x;
      if (!h.empty()) cell.honesty_mean /= static_cast<double>(h.size());
      cell.honesty_std = sample_std(h, cell.honesty_mean);
      cells.push_back(cell);
      csv += format_number(l) + "," + format_number(e) + "," + format_number(cell.honesty_mean) +
             "," + format_number(cell.honesty_std) + "," + std::to_string(cell.seeds) + "\n";
    }
  write_file(dir / "honesty_heatmap.csv", csv);
  return cells;
}

// -- Oracle suite -------------------------------------------------------------------------

bool OracleReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const OracleCheck& c) { return c.passed; });
}

Lemma1Result lemma1_check(long samples, std::uint64_t seed) {
  using oracle::Mat;
  const auto game = oracle::recletter_game<double>();
  RecommendationLetter env;
  const Spaces sp = env.spaces();
  const double beta = 6.0;
  Mat<double> eta(2, 2);
  eta << 1.0, -1.0, 0.0, 0.0;

  // Receiver that knows the committed scheme: pi(.|sigma) = softmax(beta mu(.|sigma)' w^j).
  auto policy_table = [&](const Mat<double>& phi) {
    Mat<double> mu = (game.prior.asDiagonal() * phi).transpose();
    mu = mu.array().colwise() / mu.rowwise().sum().array();
    Mat<double> logits = beta * mu * game.receiver_payoff;
    Mat<double> e = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp();
    return Mat<double>(e.array().colwise() / e.rowwise().sum().array());
  };
  auto scheme_table = [](const Mat<double>& logits) {
    Mat<double> e = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp();
    return Mat<double>(e.array().colwise() / e.rowwise().sum().array());
  };
  auto value = [&](const Eigen::VectorXd& flat) {
    const Mat<double> phi = scheme_table(Eigen::Map<const Mat<double>>(flat.data(), 2, 2));
    return oracle::exact_msg_value(env, phi, {policy_table(phi)}, 0.0).value_i;
  };

  Lemma1Result out;
  const Eigen::VectorXd flat = eta.reshaped();
  out.finite_difference = oracle::finite_difference_grad<double>(value, flat, 1e-5);
  out.exact_value = value(flat);

  AgentOptions opts;
  RngStreams rng(seed);
  AgentSet ag = make_agents(sp, opts, rng.init);
  ag.scheme.network().set_flat_parameters(flat);
  ag.policy.use_posterior_decoding(game.prior);
  ag.policy.network().set_flat_parameters((beta * game.receiver_payoff).reshaped());
  const Mat<double> phi = scheme_table(eta);
  const Mat<double> pi = policy_table(phi);
  const Mat<double> q = game.sender_payoff * pi.transpose();  // Q^i(s, sigma)
  const Eigen::VectorXd v = (phi.array() * q.array()).rowwise().sum();
  ag.sender_w_i.network().set_flat_parameters(game.sender_payoff.reshaped());
  ag.sender_q_i.network().set_flat_parameters(q.reshaped());
  ag.sender_v_i.network().set_flat_parameters(v);

  const auto trajs = rollout(env, ag, static_cast<int>(samples), rng);
  const Batch batch = Batch::from(trajs, 0.0, sp.signal_count, sp.action_count);
  const SenderCritics sc{&ag.sender_w_i, &ag.sender_v_i, &ag.sender_q_i, &ag.sender_w_j};
  out.signaling = signaling_gradient(ag.scheme, ag.policy, sc, batch, true);
  out.policy_gradient = pg_signal_gradient(ag.scheme, sc, batch, false);
  const double ref = out.finite_difference.norm();
  out.signaling_rel_error = (out.signaling - out.finite_difference).norm() / ref;
  out.pg_rel_error = (out.policy_gradient - out.finite_difference).norm() / ref;
  out.mc_value = batch.r_i.mean();
  const double var = (batch.r_i.array() - out.mc_value).square().sum() / static_cast<double>(batch.size() - 1);
  out.mc_stderr = std::sqrt(var / static_cast<double>(batch.size()));
  return out;
}

OracleReport run_oracle_suite(std::ostream& log) {
  using oracle::Mat;
  OracleReport rep;
  auto add = [&](std::string name, bool ok, double measured, double tol, std::string detail) {
    rep.checks.push_back({std::move(name), ok, measured, tol, std::move(detail)});
    const auto& c = rep.checks.back();
    log << (c.passed ? "PASS " : "FAIL ") << c.name << "  measured=" << format_number(c.measured)
        << " tol=" << format_number(c.tolerance) << "  " << c.detail << "\n";
  };
  const auto game = oracle::recletter_game<double>();

  const auto lp = oracle::solve_persuasion_lp(game);
  const double lp_err = std::abs(lp.sender_value - 2.0 / 3.0);
  add("lp_value", lp_err <= 1e-9, lp_err, 1e-9, "sender value " + format_number(lp.sender_value));
  const double scheme_err = std::max(std::abs(lp.scheme.phi(0, 1) - 1.0), std::abs(lp.scheme.phi(1, 1) - 0.5));
  add("lp_scheme", scheme_err <= 1e-6, scheme_err, 1e-6, "phi(rec|S), phi(rec|W)");

  const auto simplex = oracle::solve_persuasion_lp(game, oracle::LpMethod::Simplex);
  const double agree = std::abs(simplex.sender_value - lp.sender_value);
  add("lp_methods_agree", agree <= 1e-9, agree, 1e-9, "vertex enumeration vs simplex");

  const auto ic = oracle::check_incentive_compatibility(game, lp.scheme);
  double min_slack = 1e300;
  for (const auto& r : ic)
    if (r.reachable) min_slack = std::min(min_slack, r.slack);
  add("ic_lp_scheme", min_slack >= -1e-9, min_slack, 1e-9, "minimum obedience slack");

  oracle::ExactScheme<double> uninformative{Mat<double>(2, 2)};
  uninformative.phi << 0.0, 1.0, 0.0, 1.0;
  const auto ic_u = oracle::check_incentive_compatibility(game, uninformative);
  const double u_err = std::abs(ic_u[1].slack + 1.0 / 3.0);
  add("ic_uninformative", !ic_u[1].follows && u_err <= 1e-9, ic_u[1].slack, 1e-9,
      "hire slack under the prior");

  RecommendationLetter env;
  Mat<double> hire(2, 2), never(2, 2);
  hire << 1.0, 0.0, 0.0, 1.0;
  never << 1.0, 0.0, 1.0, 0.0;
  auto regime = [&](const std::string& name, const Mat<double>& phi, const Mat<double>& pi,
                    double vi, double vj) {
    const auto v = oracle::exact_msg_value(env, phi, {pi}, 0.0);
    const double err = std::max(std::abs(v.value_i - vi), std::abs(v.value_j - vj));
    add(name, err <= 1e-9, err, 1e-9,
        "(" + format_number(v.value_i) + ", " + format_number(v.value_j) + ")");
  };
  Mat<double> babble(2, 2), honest(2, 2);
  babble << 0.5, 0.5, 0.5, 0.5;
  honest << 0.0, 1.0, 1.0, 0.0;
  regime("value_uninformative", babble, never, 0.0, 0.0);
  regime("value_honest", honest, hire, 1.0 / 3.0, 1.0 / 3.0);
  for (double eps : {0.1, 0.25}) {
    Mat<double> lie(2, 2);
    lie << 0.0, 1.0, 0.5 + eps, 0.5 - eps;
    regime("value_optimal_eps" + format_number(eps), lie, hire, 2.0 / 3.0 - 2.0 * eps / 3.0,
           2.0 * eps / 3.0);
  }

  const auto grid = oracle::extended_obedience_grid_search(game, 2, 100);
  const double l2 = std::abs(grid.sender_value - lp.sender_value);
  add("extended_obedience_grid", l2 <= 1e-3, l2, 1e-3, "grid optimum vs LP optimum");

  const Lemma1Result l1 = lemma1_check(100000, 7);
  const double z = std::abs(l1.mc_value - l1.exact_value) / l1.mc_stderr;
  add("exact_vs_monte_carlo", z <= 3.0, z, 3.0, "standard errors between rollout mean and exact value");
  add("signaling_gradient_unbiased", l1.signaling_rel_error <= 0.02, l1.signaling_rel_error, 0.02,
      "relative L2 error vs finite differences");
  add("pg_gradient_biased", l1.pg_rel_error > 0.10, l1.pg_rel_error, 0.10,
      "relative L2 error must exceed tolerance");
  return rep;
}

}  // namespace msglab
