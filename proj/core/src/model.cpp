#include "s2p2/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "s2p2/rng.hpp"

namespace s2p2 {

using ad::Tensor;
using ad::Var;

namespace {

// Rows of Monte-Carlo queries evaluated at once when no gradient is needed.
constexpr std::size_t kQueryChunk = 16384;

void check_tensor(const Tensor& t, std::size_t r, std::size_t c, bool complex,
                  const std::string& name) {
  if (t.rows != r || t.cols != c || t.is_complex != complex ||
      t.data.size() != r * c * (complex ? 2 : 1)) {
    throw ValidationError("parameter " + name + " has the wrong shape");
  }
  for (double v : t.data) {
    if (!std::isfinite(v)) throw ValidationError("parameter " + name + " is not finite");
  }
}

// u_next = LayerNorm(GELU(y) + u); u undefined means zero.
Var residual_block(const ModelVars& vars, std::size_t l, const Var& y, const Var& u) {
  Var z = ad::gelu(y);
  if (u.defined()) z = ad::add(z, u);
  return ad::layer_norm(z, vars.norm_gamma[l], vars.norm_beta[l]);
}

std::vector<std::size_t> mark_indices(const EventSequence& seq, int num_marks) {
  std::vector<std::size_t> out(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Mark k = seq.mark(i);
    if (k >= num_marks) {
      throw ValidationError("mark " + std::to_string(k) + " at event " + std::to_string(i) +
                            " exceeds the model's " + std::to_string(num_marks) + " marks");
    }
    out[i] = static_cast<std::size_t>(k);
  }
  return out;
}

double origin_time_of(const EventSequence& seq, std::size_t origin) {
  return origin == 0 ? seq.t_start() : seq.time(origin - 1);
}

}  // namespace

void S2P2Config::validate() const {
  if (num_marks < 1 || hidden < 1 || state < 1 || layers < 1) {
    throw ValidationError("num_marks, hidden, state and layers must be positive");
  }
  if (mc_points < 1) throw ValidationError("mc_points must be >= 1");
}

S2P2Model::S2P2Model(const S2P2Config& cfg) : config(cfg) {
  cfg.validate();
  Philox rng(cfg.seed);
  const auto k = static_cast<std::size_t>(cfg.num_marks);
  const auto h = static_cast<std::size_t>(cfg.hidden);
  const auto p = static_cast<std::size_t>(cfg.state);
  mark_embeddings = Tensor(k, h);
  for (double& v : mark_embeddings.data) v = rng.normal();
  for (int l = 0; l < cfg.layers; ++l) {
    layers.push_back(LLHLayerParams::init(h, p, cfg.input_dependent, cfg.zoh_mode, rng));
    norm_gamma.push_back(Tensor::full(1, h, 1.0));
    norm_beta.push_back(Tensor(1, h));
  }
  head_W = Tensor(k, h);
  for (double& v : head_W.data) v = rng.normal(0.0, 0.1);
  head_b = Tensor(1, k);
  head_log_s = Tensor(1, k);
}

std::vector<std::pair<std::string, Tensor*>> S2P2Model::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out{{"mark_embeddings", &mark_embeddings}};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "layers." + std::to_string(l) + ".";
    for (auto& entry : layers[l].named(prefix)) out.push_back(entry);
    out.emplace_back(prefix + "norm_gamma", &norm_gamma[l]);
    out.emplace_back(prefix + "norm_beta", &norm_beta[l]);
  }
  out.emplace_back("head.W", &head_W);
  out.emplace_back("head.b", &head_b);
  out.emplace_back("head.log_s", &head_log_s);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> S2P2Model::named_parameters() const {
  auto mutable_view = const_cast<S2P2Model*>(this)->named_parameters();
  return {mutable_view.begin(), mutable_view.end()};
}

std::size_t S2P2Model::num_parameters() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_parameters()) n += t->data.size();
  return n;
}

void S2P2Model::validate() const {
  config.validate();
  const auto k = static_cast<std::size_t>(config.num_marks);
  const auto h = static_cast<std::size_t>(config.hidden);
  const auto p = static_cast<std::size_t>(config.state);
  const auto l = static_cast<std::size_t>(config.layers);
  if (layers.size() != l || norm_gamma.size() != l || norm_beta.size() != l) {
    throw ValidationError("model has the wrong number of layers");
  }
  check_tensor(mark_embeddings, k, h, false, "mark_embeddings");
  for (std::size_t i = 0; i < l; ++i) {
    layers[i].validate();
    if (layers[i].hidden() != h || layers[i].state() != p) {
      throw ValidationError("layer " + std::to_string(i) + " sizes differ from the config");
    }
    check_tensor(norm_gamma[i], 1, h, false, "norm_gamma");
    check_tensor(norm_beta[i], 1, h, false, "norm_beta");
  }
  check_tensor(head_W, k, h, false, "head.W");
  check_tensor(head_b, 1, k, false, "head.b");
  check_tensor(head_log_s, 1, k, false, "head.log_s");
}

ModelVars bind(const S2P2Model& model, ad::Tape& tape, bool trainable) {
  const auto put = [&](const Tensor& t) { return trainable ? tape.leaf(t) : tape.constant(t); };
  ModelVars v;
  v.mark_embeddings = put(model.mark_embeddings);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    v.layers.push_back(bind(model.layers[l], tape, trainable));
    v.norm_gamma.push_back(put(model.norm_gamma[l]));
    v.norm_beta.push_back(put(model.norm_beta[l]));
  }
  v.head_W = put(model.head_W);
  v.head_b = put(model.head_b);
  v.head_log_s = put(model.head_log_s);
  v.head_s = ad::exp(v.head_log_s);
  v.head_inv_s = ad::exp(ad::scale(v.head_log_s, -1.0));
  return v;
}

std::vector<Tensor> gradients(const ModelVars& v, const ad::Tape& tape) {
  std::vector<Tensor> out{tape.grad(v.mark_embeddings)};
  for (std::size_t l = 0; l < v.layers.size(); ++l) {
    for (auto& g : gradients(v.layers[l], tape)) out.push_back(std::move(g));
    out.push_back(tape.grad(v.norm_gamma[l]));
    out.push_back(tape.grad(v.norm_beta[l]));
  }
  out.push_back(tape.grad(v.head_W));
  out.push_back(tape.grad(v.head_b));
  out.push_back(tape.grad(v.head_log_s));
  return out;
}

GraphConditioning condition_graph(const ModelVars& vars, const EventSequence& seq,
                                  ad::Tape& tape) {
  const std::size_t n = seq.size();
  const auto marks = mark_indices(seq, static_cast<int>(vars.mark_embeddings.rows()));
  const std::size_t h = vars.mark_embeddings.cols();
  Tensor dt(n, 1);
  for (std::size_t i = 0; i < n; ++i) dt.data[i] = seq.time(i) - origin_time_of(seq, i);
  const Var dt_var = tape.constant(std::move(dt));
  const Var emb = ad::gather_rows(vars.mark_embeddings, marks);
  const Var zero_row = tape.constant(Tensor(1, h));

  GraphConditioning g;
  g.num_events = n;
  Var u_left;   // layer input at event left limits; undefined = 0
  Var u_right;  // layer input at right limits incl. origin 0 (forward ZOH)
  for (std::size_t l = 0; l < vars.layers.size(); ++l) {
    const LLHLayerVars& layer = vars.layers[l];
    const Var impulses = ad::matmul(emb, layer.E, true);
    Var scale;
    if (layer.input_dependent) {
      // Interval i is conditioned on u at the left limit of event i - 1, and
      // the first interval on u = 0.
      scale = u_left.defined() ? input_scale(layer, ad::concat_rows(zero_row, u_left))
                               : ad::softplus(layer.b_prime);
    }
    const Var scale_events =
        scale.defined() && scale.rows() == n + 1 ? ad::slice_rows(scale, 0, n) : scale;
    Var held;
    if (layer.zoh_mode == ZohMode::backward) {
      held = u_left;
    } else if (u_right.defined()) {
      held = ad::slice_rows(u_right, 0, n);
    }
    const LayerScan states = scan_layer(layer, dt_var, impulses, held, scale_events);
    const Var x_right = ad::concat_rows(layer.x0, states.right);
    g.x_right.push_back(x_right);
    g.scale.push_back(scale);
    g.u_right.push_back(u_right);

    const Var next_left = residual_block(vars, l, layer_output(layer, states.left, u_left), u_left);
    if (layer.zoh_mode == ZohMode::forward) {
      u_right = residual_block(vars, l, layer_output(layer, x_right, u_right), u_right);
    }
    u_left = next_left;
  }
  g.u_top = u_left;
  return g;
}

Var head(const ModelVars& vars, const Var& u) {
  const Var z = ad::add(ad::matmul(u, vars.head_W, true), vars.head_b);
  return ad::mul(ad::softplus(ad::mul(z, vars.head_inv_s)), vars.head_s);
}

Var query_graph(const ModelVars& vars, const GraphConditioning& cond,
                std::span<const std::size_t> origins, std::span<const double> deltas,
                ad::Tape& tape) {
  if (origins.size() != deltas.size()) throw ValidationError("origins and deltas differ in length");
  for (std::size_t o : origins) {
    if (o > cond.num_events) throw ValidationError("query origin out of range");
  }
  const Var delta = tape.constant(Tensor::from(deltas.size(), 1, {deltas.begin(), deltas.end()}));
  Var u;
  for (std::size_t l = 0; l < vars.layers.size(); ++l) {
    const LLHLayerVars& layer = vars.layers[l];
    const Var x = ad::gather_rows(cond.x_right[l], origins);
    Var scale = cond.scale[l];
    if (scale.defined() && scale.rows() != 1) scale = ad::gather_rows(scale, origins);
    Var held;
    if (layer.zoh_mode == ZohMode::backward) {
      held = u;
    } else if (cond.u_right[l].defined()) {
      held = ad::gather_rows(cond.u_right[l], origins);
    }
    const Var xq = evolve(layer, x, scale, delta, held);
    u = residual_block(vars, l, layer_output(layer, xq, u), u);
  }
  return head(vars, u);
}

Var log_likelihood_graph(const ModelVars& vars, const EventSequence& seq, int mc_points,
                         Philox& rng, ad::Tape& tape, LogLikelihood* parts) {
  if (mc_points < 1) throw ValidationError("mc_points must be >= 1");
  const GraphConditioning cond = condition_graph(vars, seq, tape);
  const std::size_t n = seq.size();
  const auto marks = mark_indices(seq, static_cast<int>(vars.mark_embeddings.rows()));
  const Var at_events = head(vars, cond.u_top);
  Var log_sum = n > 0 ? ad::sum(ad::log(ad::pick(at_events, marks)))
                      : tape.constant(Tensor::scalar(0.0));

  const auto m = static_cast<std::size_t>(mc_points);
  const std::size_t q = (n + 1) * m;
  std::vector<std::size_t> origins(q);
  std::vector<double> deltas(q);
  std::vector<double> weights(q);
  for (std::size_t j = 0; j <= n; ++j) {
    const double start = origin_time_of(seq, j);
    const double width = (j < n ? seq.time(j) : seq.t_end()) - start;
    for (std::size_t r = 0; r < m; ++r) {
      origins[j * m + r] = j;
      deltas[j * m + r] = rng.uniform() * width;
      weights[j * m + r] = width / static_cast<double>(m);
    }
  }
  const auto integral_of = [&](std::size_t begin, std::size_t count) {
    const Var lambda = query_graph(vars, cond, std::span(origins).subspan(begin, count),
                                   std::span(deltas).subspan(begin, count), tape);
    const Var w = tape.constant(
        Tensor::from(count, 1, {weights.begin() + static_cast<std::ptrdiff_t>(begin),
                                weights.begin() + static_cast<std::ptrdiff_t>(begin + count)}));
    return ad::sum(ad::mul(ad::row_sum(lambda), w));
  };
  Var integral;
  if (tape.recording() || q <= kQueryChunk) {
    integral = integral_of(0, q);
  } else {
    double total = 0.0;
    for (std::size_t begin = 0; begin < q; begin += kQueryChunk) {
      total += integral_of(begin, std::min(kQueryChunk, q - begin)).value().item();
    }
    integral = tape.constant(Tensor::scalar(total));
  }
  const Var total = ad::sub(log_sum, integral);
  if (parts) {
    const Tensor& ev = at_events.value();
    IntensityMatrix mat(ev.rows, ev.cols);
    mat.data = ev.data;
    *parts = decompose_log_likelihood(mat, seq.marks(), integral.value().item());
  }
  return total;
}

ConditionedState::ConditionedState(const S2P2Model& model, EventSequence seq)
    : seq_(std::move(seq)), tape_(std::make_unique<ad::Tape>(false)) {
  vars_ = bind(model, *tape_, false);
  graph_ = condition_graph(vars_, seq_, *tape_);
}

std::size_t ConditionedState::num_marks() const { return vars_.head_W.rows(); }

double ConditionedState::origin_time(std::size_t origin) const {
  if (origin > seq_.size()) throw std::out_of_range("origin out of range");
  return origin_time_of(seq_, origin);
}

IntensityMatrix ConditionedState::evolve(std::size_t origin, std::span<const double> deltas) const {
  const std::vector<std::size_t> origins(deltas.size(), origin);
  const Var lambda = query_graph(vars_, graph_, origins, deltas, *tape_);
  IntensityMatrix out(deltas.size(), num_marks());
  out.data = lambda.value().data;
  return out;
}

const Tensor& ConditionedState::right_limits(std::size_t l) const {
  return graph_.x_right.at(l).value();
}

std::unique_ptr<ConditionedState> condition(const S2P2Model& model, const EventSequence& seq) {
  return std::make_unique<ConditionedState>(model, seq);
}

std::vector<double> intensity_at(const ConditionedState& cond, double t) {
  const auto& seq = cond.sequence();
  if (t < seq.t_start() || t > seq.t_end()) {
    throw ValidationError("time " + std::to_string(t) + " outside the observation window");
  }
  const auto times = seq.times();
  const auto origin =
      static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
  const double delta = t - cond.origin_time(origin);
  const auto row = cond.evolve(origin, std::span<const double>(&delta, 1));
  return row.data;
}

LogLikelihood log_likelihood(const S2P2Model& model, const EventSequence& seq, int mc_points,
                             std::uint64_t seed, std::uint64_t stream) {
  ad::Tape tape(false);
  const ModelVars vars = bind(model, tape, false);
  Philox rng(seed, stream);
  LogLikelihood parts;
  log_likelihood_graph(vars, seq, mc_points, rng, tape, &parts);
  return parts;
}

IntensityMatrix intensity_trace(const S2P2Model& model, const EventSequence& seq,
                                std::span<const double> grid) {
  if (!std::is_sorted(grid.begin(), grid.end())) throw ValidationError("grid must be sorted");
  if (!grid.empty() && (grid.front() < seq.t_start() || grid.back() > seq.t_end())) {
    throw ValidationError("grid extends outside the observation window");
  }
  const ConditionedState cond(model, seq);
  return intensity_on_grid(cond, grid);
}

std::size_t S2P2Intensity::num_marks() const {
  return static_cast<std::size_t>(model_.config.num_marks);
}

std::unique_ptr<ConditionedIntensity> S2P2Intensity::condition(const EventSequence& seq) const {
  return std::make_unique<ConditionedState>(model_, seq);
}

LogLikelihood S2P2Intensity::log_likelihood(const EventSequence& seq, std::uint64_t stream) const {
  return s2p2::log_likelihood(model_, seq, mc_points_, seed_, stream);
}

}  // namespace s2p2
