#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "cprdraft/random.hpp"

namespace cprdraft::nn {

enum class OutputActivation : std::uint8_t { Tanh, Identity };

/// Fully-connected network: ELU hidden layers with inverted dropout, then an
/// affine output layer followed by tanh (embeddings) or nothing (scores).
struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 0;
  double dropout_rate = 0.5;
  OutputActivation output = OutputActivation::Tanh;

  void validate() const;
  std::size_t layer_count() const { return hidden_dims.size() + 1; }
  std::size_t in_dim(std::size_t layer) const;
  std::size_t out_dim(std::size_t layer) const;
  std::size_t parameter_count() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// All weights and biases in one flat buffer. Layer l stores an out x in
/// row-major weight matrix followed by its bias vector. Gradients and Adam
/// moments share this layout.
class ModelParams {
 public:
  ModelParams() = default;
  static ModelParams zeros(const NetworkSpec& spec);
  /// He-normal weights for ELU layers, Xavier-normal for the output layer,
  /// zero biases.
  static ModelParams initialize(const NetworkSpec& spec, Rng& rng);

  const NetworkSpec& spec() const { return spec_; }
  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  bool same_shape(const ModelParams& other) const;
  bool all_finite() const;
  void set_zero();
  /// Copy with a different dropout rate (shapes unchanged).
  ModelParams with_dropout(double rate) const;

  bool operator==(const ModelParams&) const = default;

 private:
  explicit ModelParams(const NetworkSpec& spec);

  NetworkSpec spec_;
  std::vector<double> values_;
  std::vector<std::size_t> offsets_;  // start of each layer's weights
};

using Gradients = ModelParams;

struct LayerTrace {
  std::vector<double> pre;   // affine output
  std::vector<double> post;  // after activation (and dropout for hidden layers)
  std::vector<double> mask;  // 0 or 1/(1-rate) per hidden unit; empty for the output layer
};

/// Intermediate values of one training-mode forward pass, needed by backward.
struct ForwardTrace {
  std::vector<double> input;
  std::vector<std::size_t> nonzero;  // indices of non-zero inputs
  std::vector<LayerTrace> layers;

  std::span<const double> output() const { return layers.back().post; }
};

/// Deterministic inference (no dropout). Throws InputError on a dimension
/// mismatch or non-finite input.
std::vector<double> forward(const ModelParams& params, std::span<const double> input);

/// Training-mode pass; dropout masks are drawn from `rng`. The trace buffers
/// are reused across calls.
void forward_train(const ModelParams& params, std::span<const double> input, Rng& rng,
                   ForwardTrace& trace);

/// Adds scale * dL/dparams to `grads`, given dL/doutput for the pass in
/// `trace`.
void backward(const ModelParams& params, const ForwardTrace& trace,
              std::span<const double> output_grad, Gradients& grads, double scale = 1.0);

double euclidean_distance(std::span<const double> x, std::span<const double> y);

struct TripletLossConfig {
  double margin = 1.0;
};

/// max(d(a, p) - d(a, n) + margin, 0)
double triplet_loss(std::span<const double> a, std::span<const double> p,
                    std::span<const double> n, double margin);

/// Loss value and its gradient with respect to each of the three embeddings.
/// A zero distance contributes a zero subgradient.
struct TripletLossGrad {
  double loss = 0.0;
  std::vector<double> anchor, positive, negative;
};

TripletLossGrad triplet_loss_grad(std::span<const double> a, std::span<const double> p,
                                  std::span<const double> n, double margin);

/// Backpropagates the triplet loss through the three passes of the shared
/// network, accumulating scale * gradient. Returns the loss; a clamped
/// triplet adds nothing.
double triplet_backward(const ModelParams& params, const ForwardTrace& anchor,
                        const ForwardTrace& positive, const ForwardTrace& negative,
                        double margin, Gradients& grads, double scale = 1.0);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(const ModelParams& params, AdamConfig config);
};

/// Bias-corrected Adam update. Throws InputError on a shape mismatch or a
/// non-finite gradient, leaving params untouched.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state);

struct TripletInputs {
  std::vector<double> anchor;
  std::vector<double> positive;
  std::vector<double> negative;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
  double loss = 0.0;
};

/// Applied to the analytic gradient before comparison; lets tests confirm a
/// broken gradient is caught.
using GradientHook = std::function<void(Gradients&)>;

/// Compares the analytic triplet gradient with central differences over
/// every parameter, dropout disabled. Relative error per parameter is
/// |g - f| / max(|g|, |f|, 1e-6).
GradCheckReport grad_check(const ModelParams& params, const TripletInputs& inputs, double margin,
                           double step = 1e-5, const GradientHook& hook = {});

inline constexpr std::uint32_t kModelFileVersion = 1;

struct ModelFile {
  ModelParams params;
  std::uint64_t db_fingerprint = 0;
};

/// "CPRM" magic, version, network spec, database fingerprint, then the
/// parameter block as little-endian float64, closed by an FNV-1a checksum
/// of all preceding bytes.
void save_model_file(const std::filesystem::path& path, const ModelParams& params,
                     std::uint64_t db_fingerprint);
ModelFile load_model_file(const std::filesystem::path& path);
std::uint64_t params_checksum(const ModelParams& params);

}  // namespace cprdraft::nn
