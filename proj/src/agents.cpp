#include "msglab/agents.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace msglab {

namespace {

Eigen::MatrixXd normal_matrix(Eigen::Index r, Eigen::Index c, double std, std::mt19937_64& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = std * standard_normal(rng);
  return m;
}

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd e = (x.colwise() - x.rowwise().maxCoeff()).array().exp();
  return e.array().colwise() / e.rowwise().sum().array();
}

void check_cols(const char* what, const Eigen::MatrixXd& m, Eigen::Index cols) {
  if (m.cols() != cols)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(cols) +
                                " columns, got " + std::to_string(m.cols()));
}

}  // namespace

double standard_normal(std::mt19937_64& rng) {
  const double u1 = std::max(ad::uniform01(rng), 1e-300);
  const double u2 = ad::uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// -- Network --------------------------------------------------------------------

Network::Network(NetworkSpec spec, std::mt19937_64& init_rng) : spec_(spec) {
  if (spec.input_dim < 1 || spec.output_dim < 1)
    throw std::invalid_argument("network: dims must be positive");
  if (spec.arch == Architecture::Tabular) {
    params_.push_back(ad::Tensor::parameter(
        normal_matrix(spec.input_dim, spec.output_dim, spec.init_scale, init_rng)));
    return;
  }
  const int h = spec.hidden;
  params_.push_back(ad::Tensor::parameter(
      normal_matrix(spec.input_dim, h, 1.0 / std::sqrt(spec.input_dim), init_rng)));
  params_.push_back(ad::Tensor::parameter(Eigen::MatrixXd::Zero(1, h)));
  params_.push_back(ad::Tensor::parameter(
      normal_matrix(h, spec.output_dim, spec.init_scale / std::sqrt(h), init_rng)));
  params_.push_back(ad::Tensor::parameter(Eigen::MatrixXd::Zero(1, spec.output_dim)));
}

ad::Tensor Network::forward(const ad::Tensor& input) const {
  if (input.cols() != spec_.input_dim)
    throw ad::ShapeError("network: input has " + std::to_string(input.cols()) +
                         " columns, expected " + std::to_string(spec_.input_dim));
  if (spec_.arch == Architecture::Tabular) return ad::matmul(input, params_[0]);
  ad::Tensor h = ad::tanh(ad::add_row(ad::matmul(input, params_[0]), params_[1]));
  return ad::add_row(ad::matmul(h, params_[2]), params_[3]);
}

Eigen::MatrixXd Network::evaluate(const Eigen::MatrixXd& input) const {
  check_cols("network", input, spec_.input_dim);
  if (spec_.arch == Architecture::Tabular) return input * params_[0].value();
  Eigen::MatrixXd h = input * params_[0].value();
  h.rowwise() += params_[1].value().row(0);
  h = h.array().tanh();
  Eigen::MatrixXd out = h * params_[2].value();
  out.rowwise() += params_[3].value().row(0);
  return out;
}

Eigen::Index Network::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

Eigen::VectorXd Network::flat_parameters() const {
  Eigen::VectorXd out(parameter_count());
  Eigen::Index k = 0;
  for (const auto& p : params_) {
    out.segment(k, p.size()) = p.value().reshaped();
    k += p.size();
  }
  return out;
}

void Network::set_flat_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count())
    throw std::invalid_argument("network: flat parameter length mismatch");
  Eigen::Index k = 0;
  for (auto& p : params_) {
    p.leaf_value().reshaped() = flat.segment(k, p.size());
    k += p.size();
  }
}

Eigen::VectorXd Network::flat_grad() const {
  Eigen::VectorXd out(parameter_count());
  Eigen::Index k = 0;
  for (const auto& p : params_) {
    out.segment(k, p.size()) = p.grad().reshaped();
    k += p.size();
  }
  return out;
}

void Network::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

Network Network::clone() const {
  Network n;
  n.spec_ = spec_;
  for (const auto& p : params_) n.params_.push_back(ad::Tensor::parameter(p.value()));
  return n;
}

void Network::copy_from(const Network& other) {
  if (other.params_.size() != params_.size())
    throw std::invalid_argument("network: copy between different architectures");
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].leaf_value() = other.params_[i].value();
}

// -- SignalingScheme --------------------------------------------------------------

SignalingScheme::SignalingScheme(NetworkSpec spec, std::mt19937_64& init_rng, double temperature,
                                 bool hard)
    : net_(spec, init_rng), hard_(hard) {
  set_temperature(temperature);
}

void SignalingScheme::set_temperature(double t) {
  if (!(t > 0.0)) throw std::invalid_argument("scheme: temperature must be > 0");
  temperature_ = t;
}

Eigen::MatrixXd SignalingScheme::distribution(const Eigen::MatrixXd& states) const {
  return row_softmax(logits(states));
}

Eigen::VectorXd SignalingScheme::distribution(const MsgState& state, const Observation&) const {
  return distribution(state.encoding.transpose()).row(0).transpose();
}

SampledSignals SignalingScheme::sample(const Eigen::MatrixXd& states, std::mt19937_64& rng) const {
  SampledSignals out;
  const Eigen::MatrixXd l = logits(states);
  out.noise = ad::gumbel_noise(l.rows(), l.cols(), rng);
  out.probs = row_softmax(l);
  out.index.resize(static_cast<std::size_t>(l.rows()));
  for (Eigen::Index r = 0; r < l.rows(); ++r) {
    Eigen::Index best = 0;
    (l.row(r) + out.noise.row(r)).maxCoeff(&best);
    out.index[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

Signal SignalingScheme::sample(const MsgState& state, const Observation&,
                               std::mt19937_64& rng) const {
  SampledSignals s = sample(Eigen::MatrixXd(state.encoding.transpose()), rng);
  Signal sig;
  sig.index = s.index[0];
  sig.one_hot = Eigen::VectorXd::Unit(signal_count(), sig.index);
  return sig;
}

ad::Tensor SignalingScheme::signal_graph(const ad::Tensor& l, const std::vector<int>& index,
                                         const Eigen::MatrixXd& noise) const {
  if (noise.size() == 0)
    throw std::invalid_argument("scheme: signal pathway requested without Gumbel noise");
  if (static_cast<Eigen::Index>(index.size()) != l.rows())
    throw ad::ShapeError("scheme: signal count does not match logits");
  if (noise.rows() != l.rows() || noise.cols() != l.cols())
    throw ad::ShapeError("scheme: noise shape does not match logits");
  ad::Tensor soft =
      ad::softmax(ad::scale(l + ad::Tensor::constant(noise), 1.0 / temperature_));
  if (!hard_) return soft;
  Eigen::MatrixXd one_hot = Eigen::MatrixXd::Zero(l.rows(), l.cols());
  for (Eigen::Index r = 0; r < l.rows(); ++r) one_hot(r, index[static_cast<std::size_t>(r)]) = 1.0;
  return ad::straight_through(one_hot, soft);
}

// -- ReceiverPolicy ---------------------------------------------------------------

ReceiverPolicy::ReceiverPolicy(int obs_dim, NetworkSpec spec, std::mt19937_64& init_rng)
    : net_(spec, init_rng), obs_dim_(obs_dim) {
  if (obs_dim < 0 || obs_dim >= spec.input_dim)
    throw std::invalid_argument("receiver: observation dim must leave room for the signal");
}

void ReceiverPolicy::use_posterior_decoding(Eigen::VectorXd prior) {
  if (prior.size() != signal_feature_dim())
    throw std::invalid_argument("receiver: prior length must equal the signal feature dim");
  encoding_ = SignalEncoding::Posterior;
  prior_ = std::move(prior);
}

Eigen::MatrixXd ReceiverPolicy::signal_features(const SignalingScheme& scheme) const {
  const int k = scheme.signal_count();
  if (encoding_ == SignalEncoding::OneHot) return Eigen::MatrixXd::Identity(k, k);
  const Eigen::Index n = prior_.size();
  if (scheme.state_dim() != n)
    throw std::invalid_argument("receiver: posterior decoding needs one-hot states");
  // mu(s | sigma) proportional to P(s) phi(sigma | s).
  Eigen::MatrixXd joint = prior_.asDiagonal() * scheme.distribution(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd mu = joint.transpose();
  return mu.array().colwise() / mu.rowwise().sum().array();
}

Eigen::MatrixXd ReceiverPolicy::logits(const Eigen::MatrixXd& obs,
                                       const Eigen::MatrixXd& features) const {
  if (obs.rows() != features.rows())
    throw std::invalid_argument("receiver: observation and signal batch sizes differ");
  check_cols("receiver observation", obs, obs_dim_);
  if (obs_dim_ == 0) return net_.evaluate(features);
  Eigen::MatrixXd in(obs.rows(), obs.cols() + features.cols());
  in << obs, features;
  return net_.evaluate(in);
}

Eigen::MatrixXd ReceiverPolicy::distribution(const Eigen::MatrixXd& obs,
                                             const Eigen::MatrixXd& features) const {
  return row_softmax(logits(obs, features));
}

Eigen::VectorXd ReceiverPolicy::distribution(const Observation& obs, const Signal& signal) const {
  return distribution(obs.encoding.transpose(), signal.one_hot.transpose()).row(0).transpose();
}

ad::Tensor ReceiverPolicy::logits_graph(const ad::Tensor& obs, const ad::Tensor& features) const {
  if (obs_dim_ == 0) return net_.forward(features);
  return net_.forward(ad::concat_cols(obs, features));
}

// -- Critic -----------------------------------------------------------------------

std::string to_string(CriticKind kind) {
  switch (kind) {
    case CriticKind::ReceiverV: return "receiver_v";
    case CriticKind::SenderW_i: return "sender_w_i";
    case CriticKind::SenderW_j: return "sender_w_j";
    case CriticKind::SenderV_i: return "sender_v_i";
    case CriticKind::SenderQ_i: return "sender_q_i";
  }
  return "?";
}

Critic::Critic(CriticKind kind, NetworkSpec spec, std::mt19937_64& init_rng, int sync_interval)
    : kind_(kind), net_(spec, init_rng), sync_interval_(sync_interval) {
  if (sync_interval < 1) throw std::invalid_argument("critic: sync interval must be >= 1");
  target_ = net_.clone();
}

double Critic::value(const Eigen::VectorXd& input, int head) const {
  const Eigen::MatrixXd out = evaluate(input.transpose());
  if (head < 0 || head >= out.cols()) throw std::out_of_range("critic: head out of range");
  return out(0, head);
}

void Critic::after_update() {
  if (++updates_ % sync_interval_ == 0) sync_target();
}

void Critic::sync_target() { target_.copy_from(net_); }

// -- AgentSet ---------------------------------------------------------------------

std::vector<Network*> AgentSet::networks() {
  return {&scheme.network(),      &policy.network(),      &receiver_v.network(),
          &sender_w_i.network(), &sender_w_j.network(), &sender_v_i.network(),
          &sender_q_i.network()};
}

AgentSet make_agents(const Spaces& sp, const AgentOptions& o, std::mt19937_64& rng) {
  auto spec = [&](int in, int out) { return NetworkSpec{in, out, o.arch, o.hidden, o.init_scale}; };
  AgentSet a;
  a.scheme = SignalingScheme(spec(sp.state_dim, sp.signal_count), rng, o.temperature, o.hard);
  a.policy = ReceiverPolicy(sp.obs_dim, spec(sp.obs_dim + sp.signal_count, sp.action_count), rng);
  a.receiver_v = Critic(CriticKind::ReceiverV, spec(sp.obs_dim + sp.signal_count, 1), rng,
                        o.sync_interval);
  a.sender_w_i = Critic(CriticKind::SenderW_i, spec(sp.state_dim, sp.action_count), rng,
                        o.sync_interval);
  a.sender_w_j = Critic(CriticKind::SenderW_j, spec(sp.state_dim, sp.action_count), rng,
                        o.sync_interval);
  a.sender_v_i = Critic(CriticKind::SenderV_i, spec(sp.state_dim, 1), rng, o.sync_interval);
  a.sender_q_i = Critic(CriticKind::SenderQ_i, spec(sp.state_dim, sp.signal_count), rng,
                        o.sync_interval);
  return a;
}

// -- Persistence ------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'M', 'S', 'G', 'L', 'A', 'B', '0', '1'};

template <typename T>
void put(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw std::runtime_error("load_parameters: truncated file");
  return v;
}

}  // namespace

void save_parameters(const std::string& path, AgentSet& agents, const std::string& env_id,
                     std::uint64_t seed) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_parameters: cannot open " + path);
  f.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(env_id.size()));
  f.write(env_id.data(), static_cast<std::streamsize>(env_id.size()));
  put<std::uint64_t>(f, seed);
  std::vector<const ad::Tensor*> tensors;
  for (Network* n : agents.networks())
    for (const auto& p : n->parameters()) tensors.push_back(&p);
  put<std::uint32_t>(f, static_cast<std::uint32_t>(tensors.size()));
  for (const auto* t : tensors) {
    put<std::int64_t>(f, t->rows());
    put<std::int64_t>(f, t->cols());
  }
  for (const auto* t : tensors)
    f.write(reinterpret_cast<const char*>(t->value().data()),
            static_cast<std::streamsize>(t->size() * sizeof(double)));
  if (!f) throw std::runtime_error("save_parameters: write failed for " + path);
}

ParameterHeader load_parameters(const std::string& path, AgentSet& agents) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_parameters: cannot open " + path);
  char magic[sizeof(kMagic)];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_parameters: bad magic in " + path);
  ParameterHeader h;
  h.env_id.resize(get<std::uint32_t>(f));
  f.read(h.env_id.data(), static_cast<std::streamsize>(h.env_id.size()));
  h.seed = get<std::uint64_t>(f);
  const auto count = get<std::uint32_t>(f);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto r = get<std::int64_t>(f);
    const auto c = get<std::int64_t>(f);
    h.dims.emplace_back(r, c);
  }
  std::vector<ad::Tensor*> tensors;
  for (Network* n : agents.networks())
    for (auto& p : n->parameters()) tensors.push_back(&p);
  if (tensors.size() != h.dims.size())
    throw std::runtime_error("load_parameters: tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (tensors[i]->rows() != h.dims[i].first || tensors[i]->cols() != h.dims[i].second)
      throw std::runtime_error("load_parameters: dims mismatch at tensor " + std::to_string(i));
  for (auto* t : tensors) {
    f.read(reinterpret_cast<char*>(t->leaf_value().data()),
           static_cast<std::streamsize>(t->size() * sizeof(double)));
    if (!f) throw std::runtime_error("load_parameters: truncated payload");
  }
  for (Critic* c : {&agents.receiver_v, &agents.sender_w_i, &agents.sender_w_j,
                    &agents.sender_v_i, &agents.sender_q_i})
    c->sync_target();
  return h;
}

}  // namespace msglab
