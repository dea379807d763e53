#include "cprdraft/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "cprdraft/error.hpp"

namespace cprdraft::nn {

namespace {

constexpr double kEluAlpha = 1.0;

void check_same_length(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size())
    throw InputError(std::string(what) + ": length mismatch (" + std::to_string(x.size()) +
                     " vs " + std::to_string(y.size()) + ")");
}

void check_input(const ModelParams& params, std::span<const double> input) {
  if (input.size() != params.spec().input_dim)
    throw InputError("network input has " + std::to_string(input.size()) + " entries, expected " +
                     std::to_string(params.spec().input_dim));
  for (double v : input)
    if (!std::isfinite(v)) throw InputError("network input is not finite");
}

// out = W * x + b over the listed non-zero inputs only.
void affine_sparse(std::span<const double> w, std::span<const double> b, std::size_t in,
                   std::span<const double> x, std::span<const std::size_t> nonzero,
                   std::vector<double>& out) {
  out.assign(b.begin(), b.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* row = w.data() + i * in;
    double acc = out[i];
    for (std::size_t j : nonzero) acc += row[j] * x[j];
    out[i] = acc;
  }
}

void affine_dense(std::span<const double> w, std::span<const double> b, std::size_t in,
                  std::span<const double> x, std::vector<double>& out) {
  out.resize(b.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* row = w.data() + i * in;
    double acc = 0.0;
    for (std::size_t j = 0; j < in; ++j) acc += row[j] * x[j];
    out[i] = acc + b[i];
  }
}

double elu(double x) { return x > 0.0 ? x : kEluAlpha * std::expm1(x); }
double elu_grad(double x) { return x > 0.0 ? 1.0 : kEluAlpha * std::exp(x); }

void nonzero_indices(std::span<const double> input, std::vector<std::size_t>& out) {
  out.clear();
  for (std::size_t j = 0; j < input.size(); ++j)
    if (input[j] != 0.0) out.push_back(j);
}

}  // namespace

void NetworkSpec::validate() const {
  if (input_dim < 1) throw InputError("network input_dim must be at least 1");
  if (output_dim < 1) throw InputError("network output_dim must be at least 1");
  for (std::size_t h : hidden_dims)
    if (h < 1) throw InputError("hidden layer width must be at least 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw InputError("dropout_rate must lie in [0, 1)");
}

std::size_t NetworkSpec::in_dim(std::size_t layer) const {
  return layer == 0 ? input_dim : hidden_dims[layer - 1];
}

std::size_t NetworkSpec::out_dim(std::size_t layer) const {
  return layer < hidden_dims.size() ? hidden_dims[layer] : output_dim;
}

std::size_t NetworkSpec::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layer_count(); ++l) n += (in_dim(l) + 1) * out_dim(l);
  return n;
}

ModelParams::ModelParams(const NetworkSpec& spec) : spec_(spec) {
  spec_.validate();
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    offsets_.push_back(offset);
    offset += (spec_.in_dim(l) + 1) * spec_.out_dim(l);
  }
  values_.assign(offset, 0.0);
}

ModelParams ModelParams::zeros(const NetworkSpec& spec) { return ModelParams(spec); }

ModelParams ModelParams::initialize(const NetworkSpec& spec, Rng& rng) {
  ModelParams p(spec);
  const std::size_t last = spec.layer_count() - 1;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const double fan_in = double(spec.in_dim(l));
    const double fan_out = double(spec.out_dim(l));
    const double stddev =
        l == last ? std::sqrt(2.0 / (fan_in + fan_out)) : std::sqrt(2.0 / fan_in);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& w : p.weights(l)) w = dist(rng);
  }
  return p;
}

std::span<double> ModelParams::weights(std::size_t layer) {
  return {values_.data() + offsets_.at(layer), spec_.in_dim(layer) * spec_.out_dim(layer)};
}

std::span<const double> ModelParams::weights(std::size_t layer) const {
  return {values_.data() + offsets_.at(layer), spec_.in_dim(layer) * spec_.out_dim(layer)};
}

std::span<double> ModelParams::bias(std::size_t layer) {
  return {values_.data() + offsets_.at(layer) + spec_.in_dim(layer) * spec_.out_dim(layer),
          spec_.out_dim(layer)};
}

std::span<const double> ModelParams::bias(std::size_t layer) const {
  return {values_.data() + offsets_.at(layer) + spec_.in_dim(layer) * spec_.out_dim(layer),
          spec_.out_dim(layer)};
}

bool ModelParams::same_shape(const ModelParams& other) const {
  return spec_.input_dim == other.spec_.input_dim &&
         spec_.hidden_dims == other.spec_.hidden_dims &&
         spec_.output_dim == other.spec_.output_dim && values_.size() == other.values_.size();
}

bool ModelParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void ModelParams::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

ModelParams ModelParams::with_dropout(double rate) const {
  ModelParams copy = *this;
  copy.spec_.dropout_rate = rate;
  copy.spec_.validate();
  return copy;
}

std::vector<double> forward(const ModelParams& params, std::span<const double> input) {
  check_input(params, input);
  const NetworkSpec& spec = params.spec();
  std::vector<std::size_t> nonzero;
  nonzero_indices(input, nonzero);
  std::vector<double> current;
  std::vector<double> next;
  affine_sparse(params.weights(0), params.bias(0), spec.in_dim(0), input, nonzero, current);
  for (std::size_t l = 0;; ++l) {
    const bool is_output = l + 1 == spec.layer_count();
    if (is_output) {
      if (spec.output == OutputActivation::Tanh)
        for (double& v : current) v = std::tanh(v);
      return current;
    }
    for (double& v : current) v = elu(v);
    affine_dense(params.weights(l + 1), params.bias(l + 1), spec.in_dim(l + 1), current, next);
    std::swap(current, next);
  }
}

void forward_train(const ModelParams& params, std::span<const double> input, Rng& rng,
                   ForwardTrace& trace) {
  check_input(params, input);
  const NetworkSpec& spec = params.spec();
  const double rate = spec.dropout_rate;
  const double keep_scale = 1.0 / (1.0 - rate);
  trace.input.assign(input.begin(), input.end());
  nonzero_indices(input, trace.nonzero);
  trace.layers.resize(spec.layer_count());

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    LayerTrace& lt = trace.layers[l];
    if (l == 0)
      affine_sparse(params.weights(0), params.bias(0), spec.in_dim(0), trace.input, trace.nonzero,
                    lt.pre);
    else
      affine_dense(params.weights(l), params.bias(l), spec.in_dim(l), trace.layers[l - 1].post,
                   lt.pre);
    lt.post.resize(lt.pre.size());
    if (l + 1 == spec.layer_count()) {
      lt.mask.clear();
      for (std::size_t i = 0; i < lt.pre.size(); ++i)
        lt.post[i] = spec.output == OutputActivation::Tanh ? std::tanh(lt.pre[i]) : lt.pre[i];
    } else {
      lt.mask.resize(lt.pre.size());
      for (std::size_t i = 0; i < lt.pre.size(); ++i) {
        lt.mask[i] = rate > 0.0 ? (unit(rng) < rate ? 0.0 : keep_scale) : 1.0;
        lt.post[i] = elu(lt.pre[i]) * lt.mask[i];
      }
    }
  }
}

void backward(const ModelParams& params, const ForwardTrace& trace,
              std::span<const double> output_grad, Gradients& grads, double scale) {
  const NetworkSpec& spec = params.spec();
  if (trace.layers.size() != spec.layer_count() || trace.input.size() != spec.input_dim)
    throw InputError("forward trace does not match the network");
  if (!grads.same_shape(params)) throw InputError("gradient buffer does not match the network");
  check_same_length(output_grad, trace.output(), "backward");

  std::vector<double> delta(output_grad.begin(), output_grad.end());
  const LayerTrace& out = trace.layers.back();
  if (spec.output == OutputActivation::Tanh)
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= 1.0 - out.post[i] * out.post[i];
  for (double& d : delta) d *= scale;

  std::vector<double> upstream;
  for (std::size_t l = spec.layer_count(); l-- > 0;) {
    const std::size_t in = spec.in_dim(l);
    auto gw = grads.weights(l);
    auto gb = grads.bias(l);
    auto w = params.weights(l);
    for (std::size_t i = 0; i < delta.size(); ++i) gb[i] += delta[i];

    if (l == 0) {
      for (std::size_t i = 0; i < delta.size(); ++i) {
        double* grow = gw.data() + i * in;
        for (std::size_t j : trace.nonzero) grow[j] += delta[i] * trace.input[j];
      }
      break;
    }

    const std::vector<double>& x = trace.layers[l - 1].post;
    upstream.assign(in, 0.0);
    for (std::size_t i = 0; i < delta.size(); ++i) {
      const double d = delta[i];
      double* grow = gw.data() + i * in;
      const double* wrow = w.data() + i * in;
      for (std::size_t j = 0; j < in; ++j) {
        grow[j] += d * x[j];
        upstream[j] += d * wrow[j];
      }
    }
    const LayerTrace& below = trace.layers[l - 1];
    for (std::size_t j = 0; j < in; ++j)
      upstream[j] *= below.mask[j] * elu_grad(below.pre[j]);
    std::swap(delta, upstream);
  }
}

double euclidean_distance(std::span<const double> x, std::span<const double> y) {
  check_same_length(x, y, "euclidean_distance");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double triplet_loss(std::span<const double> a, std::span<const double> p,
                    std::span<const double> n, double margin) {
  check_same_length(a, p, "triplet_loss");
  check_same_length(a, n, "triplet_loss");
  return std::max(euclidean_distance(a, p) - euclidean_distance(a, n) + margin, 0.0);
}

TripletLossGrad triplet_loss_grad(std::span<const double> a, std::span<const double> p,
                                  std::span<const double> n, double margin) {
  TripletLossGrad g;
  g.loss = triplet_loss(a, p, n, margin);
  const std::size_t dim = a.size();
  g.anchor.assign(dim, 0.0);
  g.positive.assign(dim, 0.0);
  g.negative.assign(dim, 0.0);
  if (g.loss <= 0.0) return g;
  const double d_ap = euclidean_distance(a, p);
  const double d_an = euclidean_distance(a, n);
  for (std::size_t i = 0; i < dim; ++i) {
    const double u = d_ap > 0.0 ? (a[i] - p[i]) / d_ap : 0.0;
    const double v = d_an > 0.0 ? (a[i] - n[i]) / d_an : 0.0;
    g.anchor[i] = u - v;
    g.positive[i] = -u;
    g.negative[i] = v;
  }
  return g;
}

double triplet_backward(const ModelParams& params, const ForwardTrace& anchor,
                        const ForwardTrace& positive, const ForwardTrace& negative,
                        double margin, Gradients& grads, double scale) {
  const TripletLossGrad g =
      triplet_loss_grad(anchor.output(), positive.output(), negative.output(), margin);
  if (g.loss <= 0.0) return 0.0;
  backward(params, anchor, g.anchor, grads, scale);
  backward(params, positive, g.positive, grads, scale);
  backward(params, negative, g.negative, grads, scale);
  return g.loss;
}

AdamState::AdamState(const ModelParams& params, AdamConfig cfg)
    : config(cfg), first_moment(params.size(), 0.0), second_moment(params.size(), 0.0) {}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state) {
  if (!grads.same_shape(params) || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size())
    throw InputError("adam_step: shape mismatch");
  auto g = grads.values();
  for (double v : g)
    if (!std::isfinite(v)) throw InputError("adam_step: non-finite gradient");

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  auto p = params.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g[i];
    v = c.beta2 * v + (1.0 - c.beta2) * g[i] * g[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

GradCheckReport grad_check(const ModelParams& params, const TripletInputs& inputs, double margin,
                           double step, const GradientHook& hook) {
  ModelParams work = params.with_dropout(0.0);
  Rng unused(0);
  ForwardTrace ta, tp, tn;
  forward_train(work, inputs.anchor, unused, ta);
  forward_train(work, inputs.positive, unused, tp);
  forward_train(work, inputs.negative, unused, tn);
  Gradients analytic = Gradients::zeros(work.spec());
  GradCheckReport report;
  report.loss = triplet_backward(work, ta, tp, tn, margin, analytic);
  if (hook) hook(analytic);

  auto loss_at = [&](const ModelParams& m) {
    return triplet_loss(forward(m, inputs.anchor), forward(m, inputs.positive),
                        forward(m, inputs.negative), margin);
  };
  auto values = work.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double up = loss_at(work);
    values[i] = saved - step;
    const double down = loss_at(work);
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.values()[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    report.max_relative_error = std::max(report.max_relative_error, std::abs(a - numeric) / denom);
    report.max_abs_analytic = std::max(report.max_abs_analytic, std::abs(a));
    report.max_abs_numeric = std::max(report.max_abs_numeric, std::abs(numeric));
  }
  return report;
}

namespace {
constexpr std::string_view kModelMagic = "CPRM";
}

void save_model_file(const std::filesystem::path& path, const ModelParams& params,
                     std::uint64_t db_fingerprint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write model file " + path.string());
  const NetworkSpec& spec = params.spec();
  detail::LeWriter w(out);
  w.put_bytes(kModelMagic);
  w.put<std::uint32_t>(kModelFileVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.output));
  w.put<std::uint64_t>(spec.input_dim);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.hidden_dims.size()));
  for (std::size_t h : spec.hidden_dims) w.put<std::uint64_t>(h);
  w.put<std::uint64_t>(spec.output_dim);
  w.put_f64(spec.dropout_rate);
  w.put<std::uint64_t>(db_fingerprint);
  w.put<std::uint64_t>(params.size());
  for (double v : params.values()) w.put_f64(v);
  const std::uint64_t checksum = w.checksum();
  w.put<std::uint64_t>(checksum);
  if (!out) throw InputError("write failed for " + path.string());
}

ModelFile load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file " + path.string());
  detail::LeReader r(in, path.string());
  if (r.get_bytes(4) != kModelMagic) throw InputError(path.string() + ": not a model file");
  if (r.get<std::uint32_t>() != kModelFileVersion)
    throw InputError(path.string() + ": unsupported model file version");
  NetworkSpec spec;
  const auto activation = r.get<std::uint32_t>();
  if (activation > 1) throw InputError(path.string() + ": unknown output activation");
  spec.output = static_cast<OutputActivation>(activation);
  spec.input_dim = r.get<std::uint64_t>();
  const auto hidden = r.get<std::uint32_t>();
  if (hidden > 64) throw InputError(path.string() + ": implausible layer count");
  for (std::uint32_t i = 0; i < hidden; ++i) spec.hidden_dims.push_back(r.get<std::uint64_t>());
  spec.output_dim = r.get<std::uint64_t>();
  spec.dropout_rate = r.get_f64();
  ModelFile file;
  file.db_fingerprint = r.get<std::uint64_t>();
  const auto count = r.get<std::uint64_t>();
  spec.validate();
  if (count != spec.parameter_count())
    throw InputError(path.string() + ": parameter count does not match the network spec");
  file.params = ModelParams::zeros(spec);
  for (double& v : file.params.values()) v = r.get_f64();
  const std::uint64_t expected = r.checksum();
  if (r.get<std::uint64_t>() != expected) throw InputError(path.string() + ": checksum mismatch");
  if (!file.params.all_finite()) throw InputError(path.string() + ": non-finite parameters");
  return file;
}

std::uint64_t params_checksum(const ModelParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : params.values()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace cprdraft::nn
