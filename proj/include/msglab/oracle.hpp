#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace msglab {
class Environment;
}

namespace msglab::oracle {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
Scalar default_tolerance() {
  return std::numeric_limits<Scalar>::epsilon() * Scalar(1e4);
}

/// One-shot persuasion game: prior P(s) and payoffs w(s, a).
template <typename Scalar>
struct TabularGame {
  Vec<Scalar> prior;
  Mat<Scalar> sender_payoff;
  Mat<Scalar> receiver_payoff;

  Eigen::Index states() const { return prior.size(); }
  Eigen::Index actions() const { return sender_payoff.cols(); }

  void validate() const {
    using std::abs;
    if (prior.size() == 0) throw std::invalid_argument("game: empty prior");
    if ((prior.array() < Scalar(0)).any() || abs(prior.sum() - Scalar(1)) > Scalar(1e-9))
      throw std::invalid_argument("game: prior must be a probability vector");
    if (sender_payoff.rows() != states() || receiver_payoff.rows() != states() ||
        receiver_payoff.cols() != actions() || actions() == 0)
      throw std::invalid_argument("game: payoff shapes must be |S| x |A|");
    if (!sender_payoff.allFinite() || !receiver_payoff.allFinite())
      throw std::invalid_argument("game: payoffs must be finite");
  }
};

/// phi(sigma | s), one row per state.
template <typename Scalar>
struct ExactScheme {
  Mat<Scalar> phi;

  void validate(Scalar tol = Scalar(1e-9)) const {
    using std::abs;
    if ((phi.array() < -tol).any()) throw std::invalid_argument("scheme: negative entry");
    for (Eigen::Index s = 0; s < phi.rows(); ++s)
      if (abs(phi.row(s).sum() - Scalar(1)) > tol)
        throw std::invalid_argument("scheme: row " + std::to_string(s) + " does not sum to 1");
  }
};

/// Game used by the letter benchmark; state 0 is a strong student and
/// action 1 is hire.
template <typename Scalar = double>
TabularGame<Scalar> recletter_game() {
  TabularGame<Scalar> g;
  g.prior.resize(2);
  g.prior << Scalar(1) / Scalar(3), Scalar(2) / Scalar(3);
  g.sender_payoff.resize(2, 2);
  g.sender_payoff << 0, 1, 0, 1;
  g.receiver_payoff.resize(2, 2);
  g.receiver_payoff << 0, 1, 0, -1;
  return g;
}

// -- Linear programming -----------------------------------------------------------

/// Maximizes c'y subject to A y = b, y >= 0, with b >= 0. Two-phase dense
/// tableau, Bland's rule. Returns nullopt when infeasible or unbounded.
template <typename Scalar>
std::optional<Vec<Scalar>> simplex_maximize(const Mat<Scalar>& A, const Vec<Scalar>& b,
                                            const Vec<Scalar>& c,
                                            Scalar tol = default_tolerance<Scalar>()) {
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  if (b.size() != m || c.size() != n) throw std::invalid_argument("simplex: shape mismatch");
  if ((b.array() < Scalar(0)).any()) throw std::invalid_argument("simplex: b must be >= 0");

  // Columns: n originals, m artificials, rhs.
  Mat<Scalar> t = Mat<Scalar>::Zero(m, n + m + 1);
  t.leftCols(n) = A;
  t.block(0, n, m, m).setIdentity();
  t.col(n + m) = b;
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

  auto pivot = [&](Eigen::Index r, Eigen::Index col) {
    t.row(r) /= t(r, col);
    for (Eigen::Index i = 0; i < m; ++i)
      if (i != r && t(i, col) != Scalar(0)) t.row(i) -= t(i, col) * t.row(r);
    basis[static_cast<std::size_t>(r)] = col;
  };

  // Returns false when unbounded.
  auto run = [&](const Vec<Scalar>& cost, Eigen::Index allowed) {
    for (;;) {
      Vec<Scalar> cb(m);
      for (Eigen::Index i = 0; i < m; ++i) cb[i] = cost[basis[static_cast<std::size_t>(i)]];
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed; ++j) {
        const Scalar reduced = cb.dot(t.col(j)) - cost[j];
        if (reduced < -tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      Scalar best = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index i = 0; i < m; ++i) {
        if (t(i, enter) <= tol) continue;
        const Scalar ratio = t(i, n + m) / t(i, enter);
        if (ratio < best - tol ||
            (ratio <= best + tol && leave >= 0 &&
             basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  };

  Vec<Scalar> phase1 = Vec<Scalar>::Zero(n + m);
  phase1.tail(m).setConstant(Scalar(-1));
  run(phase1, n + m);
  Scalar residual = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    if (basis[static_cast<std::size_t>(i)] >= n) residual += t(i, n + m);
  if (residual > tol * Scalar(10) * (Scalar(1) + b.sum())) return std::nullopt;
  // Drive remaining artificials out of the basis.
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[static_cast<std::size_t>(i)] < n) continue;
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::abs(t(i, j)) > tol) {
        pivot(i, j);
        break;
      }
  }
  Vec<Scalar> phase2 = Vec<Scalar>::Zero(n + m);
  phase2.head(n) = c;
  if (!run(phase2, n)) return std::nullopt;
  Vec<Scalar> y = Vec<Scalar>::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i)
    if (basis[static_cast<std::size_t>(i)] < n) y[basis[static_cast<std::size_t>(i)]] = t(i, n + m);
  return y;
}

enum class LpMethod { Auto, VertexEnumeration, Simplex };

template <typename Scalar>
struct LpSolution {
  ExactScheme<Scalar> scheme;
  Scalar sender_value = 0;
  LpMethod method = LpMethod::Auto;
};

namespace detail {

/// Obedience rows g'x >= 0 over x(s, a) = phi(a | s), flattened s * |A| + a.
template <typename Scalar>
Mat<Scalar> obedience_rows(const TabularGame<Scalar>& g) {
  const Eigen::Index S = g.states(), A = g.actions();
  Mat<Scalar> rows = Mat<Scalar>::Zero(A * (A - 1), S * A);
  Eigen::Index r = 0;
  for (Eigen::Index a = 0; a < A; ++a)
    for (Eigen::Index b = 0; b < A; ++b) {
      if (a == b) continue;
      for (Eigen::Index s = 0; s < S; ++s)
        rows(r, s * A + a) = g.prior[s] * (g.receiver_payoff(s, a) - g.receiver_payoff(s, b));
      ++r;
    }
  return rows;
}

template <typename Scalar>
Vec<Scalar> objective(const TabularGame<Scalar>& g) {
  const Eigen::Index S = g.states(), A = g.actions();
  Vec<Scalar> c(S * A);
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index a = 0; a < A; ++a) c[s * A + a] = g.prior[s] * g.sender_payoff(s, a);
  return c;
}

inline double binomial(Eigen::Index n, Eigen::Index k) {
  double out = 1.0;
  for (Eigen::Index i = 1; i <= k; ++i) out = out * static_cast<double>(n - k + i) / static_cast<double>(i);
  return out;
}

template <typename Scalar>
LpSolution<Scalar> to_solution(const TabularGame<Scalar>& g, const Vec<Scalar>& x, LpMethod m) {
  LpSolution<Scalar> sol;
  sol.scheme.phi = x.head(g.states() * g.actions()).reshaped(g.actions(), g.states()).transpose();
  sol.sender_value = objective(g).dot(x.head(g.states() * g.actions()));
  sol.method = m;
  return sol;
}

template <typename Scalar>
LpSolution<Scalar> solve_by_vertices(const TabularGame<Scalar>& g, Scalar tol) {
  const Eigen::Index S = g.states(), A = g.actions(), n = S * A;
  Mat<Scalar> eq = Mat<Scalar>::Zero(S, n);
  for (Eigen::Index s = 0; s < S; ++s) eq.block(s, s * A, 1, A).setOnes();
  const Mat<Scalar> ob = obedience_rows(g);
  Mat<Scalar> ineq(n + ob.rows(), n);
  ineq << Mat<Scalar>::Identity(n, n), ob;
  const Eigen::Index m = ineq.rows(), k = n - S;
  const Vec<Scalar> c = objective(g);

  std::optional<Vec<Scalar>> best;
  Scalar best_value = -std::numeric_limits<Scalar>::infinity();
  std::vector<Eigen::Index> pick(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) pick[static_cast<std::size_t>(i)] = i;
  Mat<Scalar> sys(n, n);
  Vec<Scalar> rhs = Vec<Scalar>::Zero(n);
  rhs.head(S).setOnes();
  sys.topRows(S) = eq;
  for (;;) {
    for (Eigen::Index i = 0; i < k; ++i) sys.row(S + i) = ineq.row(pick[static_cast<std::size_t>(i)]);
    Eigen::FullPivLU<Mat<Scalar>> lu(sys);
    if (lu.rank() == n) {
      const Vec<Scalar> x = lu.solve(rhs);
      if ((ineq * x).minCoeff() >= -tol) {
        const Scalar v = c.dot(x);
        if (v > best_value + tol) {
          best_value = v;
          best = x;
        }
      }
    }
    // Next combination in lexicographic order.
    Eigen::Index i = k - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == m - k + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i + 1; j < k; ++j)
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  if (!best) throw std::logic_error("persuasion LP: no feasible vertex");
  return to_solution(g, *best, LpMethod::VertexEnumeration);
}

template <typename Scalar>
LpSolution<Scalar> solve_by_simplex(const TabularGame<Scalar>& g, Scalar tol) {
  const Eigen::Index S = g.states(), A = g.actions(), n = S * A;
  const Mat<Scalar> ob = obedience_rows(g);
  const Eigen::Index q = ob.rows();
  // Variables [x, surplus]; obedience rows become g'x - t = 0.
  Mat<Scalar> a = Mat<Scalar>::Zero(S + q, n + q);
  for (Eigen::Index s = 0; s < S; ++s) a.block(s, s * A, 1, A).setOnes();
  a.block(S, 0, q, n) = ob;
  a.block(S, n, q, q) = -Mat<Scalar>::Identity(q, q);
  Vec<Scalar> b = Vec<Scalar>::Zero(S + q);
  b.head(S).setOnes();
  Vec<Scalar> c = Vec<Scalar>::Zero(n + q);
  c.head(n) = objective(g);
  auto y = simplex_maximize<Scalar>(a, b, c, tol);
  if (!y) throw std::logic_error("persuasion LP: simplex found no optimum");
  return to_solution(g, *y, LpMethod::Simplex);
}

}  // namespace detail

/// Optimal direct scheme of the one-shot persuasion problem with |Sigma| = |A|.
/// Auto enumerates vertices when there are at most 1e5 candidate bases.
template <typename Scalar>
LpSolution<Scalar> solve_persuasion_lp(const TabularGame<Scalar>& game,
                                       LpMethod method = LpMethod::Auto,
                                       Scalar tol = default_tolerance<Scalar>()) {
  game.validate();
  if (method == LpMethod::Auto) {
    const Eigen::Index S = game.states(), A = game.actions(), n = S * A;
    const double bases = detail::binomial(n + A * (A - 1), n - S);
    method = bases <= 1e5 ? LpMethod::VertexEnumeration : LpMethod::Simplex;
  }
  return method == LpMethod::VertexEnumeration ? detail::solve_by_vertices(game, tol)
                                               : detail::solve_by_simplex(game, tol);
}

// -- Exact Markov signaling game evaluation -------------------------------------------

/// Finite MSG: rewards R(s, a), transitions p(. | s, a), deterministic emission
/// o(s). `transition[s]` is |A| x |S|.
template <typename Scalar>
struct TabularMsg {
  Vec<Scalar> initial;
  std::vector<int> observation_of_state;
  int observation_count = 1;
  int signal_count = 0;
  Mat<Scalar> sender_reward;
  Mat<Scalar> receiver_reward;
  std::vector<Mat<Scalar>> transition;

  Eigen::Index states() const { return initial.size(); }
  Eigen::Index actions() const { return sender_reward.cols(); }

  void validate() const {
    const Eigen::Index S = states();
    if (S == 0 || static_cast<Eigen::Index>(observation_of_state.size()) != S ||
        static_cast<Eigen::Index>(transition.size()) != S)
      throw std::invalid_argument("tabular msg: per-state tables have inconsistent sizes");
    if (sender_reward.rows() != S || receiver_reward.rows() != S ||
        receiver_reward.cols() != actions())
      throw std::invalid_argument("tabular msg: reward shapes must be |S| x |A|");
    for (const auto& p : transition)
      if (p.rows() != actions() || p.cols() != S)
        throw std::invalid_argument("tabular msg: transition blocks must be |A| x |S|");
  }
};

template <typename Scalar>
struct MsgValue {
  Vec<Scalar> v_i, v_j;
  Mat<Scalar> w_i, w_j;
  /// Normalized discounted occupancy d = h / sum(h).
  Vec<Scalar> occupancy;
  /// Values under the initial distribution.
  Scalar value_i = 0, value_j = 0;
};

/// Solves V = (I - gamma P)^-1 r under scheme |S| x |Sigma| and policy
/// `policy[o]` of shape |Sigma| x |A|. Requires 0 <= gamma < 1.
template <typename Scalar>
MsgValue<Scalar> exact_msg_value(const TabularMsg<Scalar>& msg, const Mat<Scalar>& scheme,
                                 const std::vector<Mat<Scalar>>& policy, Scalar gamma) {
  msg.validate();
  const Eigen::Index S = msg.states(), A = msg.actions();
  if (!(gamma >= Scalar(0) && gamma < Scalar(1)))
    throw std::invalid_argument("exact_msg_value: gamma must lie in [0, 1)");
  if (scheme.rows() != S || scheme.cols() != msg.signal_count)
    throw std::invalid_argument("exact_msg_value: scheme must be |S| x |Sigma|");
  if (static_cast<int>(policy.size()) != msg.observation_count)
    throw std::invalid_argument("exact_msg_value: one policy table per observation");
  for (const auto& p : policy)
    if (p.rows() != msg.signal_count || p.cols() != A)
      throw std::invalid_argument("exact_msg_value: policy tables must be |Sigma| x |A|");

  // Action distribution per state.
  Mat<Scalar> act(S, A);
  for (Eigen::Index s = 0; s < S; ++s)
    act.row(s) = scheme.row(s) * policy[static_cast<std::size_t>(msg.observation_of_state[s])];
  Mat<Scalar> p(S, S);
  for (Eigen::Index s = 0; s < S; ++s) p.row(s) = act.row(s) * msg.transition[s];
  const Vec<Scalar> r_i = (act.array() * msg.sender_reward.array()).rowwise().sum();
  const Vec<Scalar> r_j = (act.array() * msg.receiver_reward.array()).rowwise().sum();

  const Mat<Scalar> m = Mat<Scalar>::Identity(S, S) - gamma * p;
  Eigen::PartialPivLU<Mat<Scalar>> lu(m);
  MsgValue<Scalar> out;
  out.v_i = lu.solve(r_i);
  out.v_j = lu.solve(r_j);
  out.w_i.resize(S, A);
  out.w_j.resize(S, A);
  for (Eigen::Index s = 0; s < S; ++s) {
    out.w_i.row(s) = msg.sender_reward.row(s) + gamma * (msg.transition[s] * out.v_i).transpose();
    out.w_j.row(s) = msg.receiver_reward.row(s) + gamma * (msg.transition[s] * out.v_j).transpose();
  }
  const Vec<Scalar> h = m.transpose().partialPivLu().solve(msg.initial);
  out.occupancy = h / h.sum();
  out.value_i = msg.initial.dot(out.v_i);
  out.value_j = msg.initial.dot(out.v_j);
  return out;
}

/// Environment overload; throws std::invalid_argument when the game has no
/// finite model.
MsgValue<double> exact_msg_value(const Environment& env, const Mat<double>& scheme,
                                 const std::vector<Mat<double>>& policy, double gamma);

// -- Finite differences ---------------------------------------------------------------

template <typename Scalar>
Vec<Scalar> finite_difference_grad(const std::function<Scalar(const Vec<Scalar>&)>& f,
                                   const Vec<Scalar>& x, Scalar step = Scalar(1e-5)) {
  if (!(step > Scalar(0))) throw std::invalid_argument("finite_difference_grad: step must be > 0");
  Vec<Scalar> g(x.size());
  Vec<Scalar> probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + step;
    const Scalar up = f(probe);
    probe[k] = x[k] - step;
    const Scalar down = f(probe);
    probe[k] = x[k];
    g[k] = (up - down) / (Scalar(2) * step);
  }
  return g;
}

// -- Incentive compatibility ----------------------------------------------------------

template <typename Scalar>
struct SignalReport {
  bool reachable = false;
  Vec<Scalar> posterior;
  int best_response = -1;
  bool follows = true;
  /// min over a' of sum_s P(s) phi(a|s) [w^j(s,a) - w^j(s,a')].
  Scalar slack = 0;
};

/// Treats signal a as the recommendation to play action a. Ties at zero slack
/// follow the recommendation.
template <typename Scalar>
std::vector<SignalReport<Scalar>> check_incentive_compatibility(
    const TabularGame<Scalar>& game, const ExactScheme<Scalar>& scheme,
    Scalar tol = Scalar(1e-9)) {
  game.validate();
  const Eigen::Index S = game.states(), A = game.actions();
  if (scheme.phi.rows() != S || scheme.phi.cols() != A)
    throw std::invalid_argument("incentive check: scheme must be |S| x |A|");
  std::vector<SignalReport<Scalar>> out(static_cast<std::size_t>(A));
  for (Eigen::Index a = 0; a < A; ++a) {
    auto& rep = out[static_cast<std::size_t>(a)];
    const Vec<Scalar> joint = game.prior.cwiseProduct(scheme.phi.col(a));
    const Scalar mass = joint.sum();
    if (mass <= Scalar(0)) continue;
    rep.reachable = true;
    rep.posterior = joint / mass;
    const Vec<Scalar> payoff = game.receiver_payoff.transpose() * rep.posterior;
    rep.slack = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index b = 0; b < A; ++b) {
      if (b == a) continue;
      rep.slack = std::min(rep.slack, joint.dot(game.receiver_payoff.col(a) - game.receiver_payoff.col(b)));
    }
    if (A == 1) rep.slack = 0;
    rep.follows = rep.slack >= -tol;
    Eigen::Index best = 0;
    payoff.maxCoeff(&best);
    rep.best_response = payoff[a] >= payoff[best] - tol ? static_cast<int>(a) : static_cast<int>(best);
  }
  return out;
}

// -- Extended obedience ---------------------------------------------------------------

/// C(sigma, sigma') = sum_s d(s) phi(sigma|s) sum_a [pi(a|sigma) - pi(a|sigma')] W^j(s,a).
template <typename Scalar>
Mat<Scalar> extended_obedience(const Vec<Scalar>& d, const Mat<Scalar>& scheme,
                               const Mat<Scalar>& policy, const Mat<Scalar>& w_j) {
  const Eigen::Index K = scheme.cols();
  // e(s, sigma) = sum_a pi(a|sigma) W^j(s, a)
  const Mat<Scalar> e = w_j * policy.transpose();
  Mat<Scalar> c(K, K);
  for (Eigen::Index x = 0; x < K; ++x)
    for (Eigen::Index y = 0; y < K; ++y) {
      Scalar acc = 0;
      for (Eigen::Index s = 0; s < d.size(); ++s) acc += d[s] * scheme(s, x) * (e(s, x) - e(s, y));
      c(x, y) = acc;
    }
  return c;
}

template <typename Scalar>
struct GridSearchResult {
  Scalar sender_value = -std::numeric_limits<Scalar>::infinity();
  Mat<Scalar> scheme;
  std::vector<int> response;
};

/// Best sender value over schemes on a grid and deterministic receiver
/// responses sigma -> a that satisfy every extended obedience constraint.
/// Responses must reach every action, otherwise some deviations have no
/// sigma' to express them. Needs |Sigma| >= |A|.
template <typename Scalar>
GridSearchResult<Scalar> extended_obedience_grid_search(const TabularGame<Scalar>& game,
                                                        int signal_count, int resolution,
                                                        Scalar tol = Scalar(1e-12)) {
  game.validate();
  const Eigen::Index S = game.states(), A = game.actions();
  const int K = signal_count;
  if (K < 1 || resolution < 1) throw std::invalid_argument("grid search: bad grid");
  if (K < A) throw std::invalid_argument("grid search: needs at least one signal per action");

  // Every grid point of the |Sigma|-simplex.
  std::vector<Vec<Scalar>> simplex;
  std::vector<int> parts(static_cast<std::size_t>(K), 0);
  std::function<void(int, int)> fill = [&](int k, int left) {
    if (k == K - 1) {
      parts[static_cast<std::size_t>(k)] = left;
      Vec<Scalar> v(K);
      for (int i = 0; i < K; ++i) v[i] = Scalar(parts[static_cast<std::size_t>(i)]) / Scalar(resolution);
      simplex.push_back(v);
      return;
    }
    for (int q = 0; q <= left; ++q) {
      parts[static_cast<std::size_t>(k)] = q;
      fill(k + 1, left - q);
    }
  };
  fill(0, resolution);

  std::vector<std::vector<int>> responses;
  std::vector<int> resp(static_cast<std::size_t>(K), 0);
  std::function<void(int)> enumerate = [&](int k) {
    if (k == K) {
      std::vector<char> hit(static_cast<std::size_t>(A), 0);
      for (int a : resp) hit[static_cast<std::size_t>(a)] = 1;
      if (std::all_of(hit.begin(), hit.end(), [](char h) { return h != 0; })) responses.push_back(resp);
      return;
    }
    for (int a = 0; a < A; ++a) {
      resp[static_cast<std::size_t>(k)] = a;
      enumerate(k + 1);
    }
  };
  enumerate(0);

  GridSearchResult<Scalar> best;
  Mat<Scalar> scheme(S, K);
  std::vector<std::size_t> idx(static_cast<std::size_t>(S), 0);
  for (;;) {
    for (Eigen::Index s = 0; s < S; ++s) scheme.row(s) = simplex[idx[static_cast<std::size_t>(s)]].transpose();
    for (const auto& r : responses) {
      Mat<Scalar> policy = Mat<Scalar>::Zero(K, A);
      for (int k = 0; k < K; ++k) policy(k, r[static_cast<std::size_t>(k)]) = 1;
      const Mat<Scalar> c = extended_obedience<Scalar>(game.prior, scheme, policy, game.receiver_payoff);
      if (c.minCoeff() < -tol) continue;
      const Mat<Scalar> act = scheme * policy;
      const Scalar v = game.prior.dot((act.array() * game.sender_payoff.array()).rowwise().sum().matrix());
      if (v > best.sender_value + tol) {
        best.sender_value = v;
        best.scheme = scheme;
        best.response = r;
      }
    }
    Eigen::Index s = 0;
    while (s < S && ++idx[static_cast<std::size_t>(s)] == simplex.size()) idx[static_cast<std::size_t>(s++)] = 0;
    if (s == S) break;
  }
  return best;
}

/// Expected sender payoff of a scheme under a |Sigma| x |A| policy table.
template <typename Scalar>
Scalar sender_value(const TabularGame<Scalar>& game, const Mat<Scalar>& scheme,
                    const Mat<Scalar>& policy) {
  const Mat<Scalar> act = scheme * policy;
  return game.prior.dot((act.array() * game.sender_payoff.array()).rowwise().sum().matrix());
}

}  // namespace msglab::oracle
