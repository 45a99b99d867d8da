#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace attrnoise::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown by adam_step when a gradient entry is NaN or infinite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Activation { identity, relu, sigmoid };
enum class LayerKind { dense, conv1d };

const char* to_string(Activation a);
const char* to_string(LayerKind k);
Activation activation_from_string(const std::string& s);

/// Dense layers map in_width -> out_width. Conv1d layers treat a row as
/// `length` positions of `channels_in` values (position-major), use stride 1
/// and symmetric zero padding so the length is preserved.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t in_width = 0;
  std::size_t out_width = 0;
  std::size_t channels_in = 0;
  std::size_t channels_out = 0;
  std::size_t kernel_size = 0;
  std::size_t length = 0;
  Activation activation = Activation::identity;

  static LayerSpec dense(std::size_t in, std::size_t out, Activation act);
  static LayerSpec conv1d(std::size_t length, std::size_t channels_in, std::size_t channels_out,
                          std::size_t kernel_size, Activation act);

  std::size_t input_width() const { return kind == LayerKind::dense ? in_width : length * channels_in; }
  std::size_t output_width() const {
    return kind == LayerKind::dense ? out_width : length * channels_out;
  }
  void validate() const;
  bool operator==(const LayerSpec&) const = default;
};

/// Dense weight is out x in. Conv1d weight is channels_out x (channels_in *
/// kernel_size) with column c * kernel_size + t for input channel c, tap t.
struct Layer {
  LayerSpec spec;
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct ModelParams {
  std::vector<Layer> layers;

  std::size_t input_width() const;
  std::size_t output_width() const;
  std::size_t parameter_count() const;
  /// Shapes chain from layer to layer and tensors match their specs.
  void validate() const;
};

/// Gradients share the parameter layout.
using Gradients = ModelParams;

struct LayerCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd pre_activation;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
};

struct ForwardResult {
  Eigen::MatrixXd output;
  ForwardCache cache;
};

/// Glorot-uniform weights, zero biases.
ModelParams init_params(const std::vector<LayerSpec>& specs, std::uint64_t seed);
ModelParams zeros_like(const ModelParams& params);

ForwardResult forward(const ModelParams& params, const Eigen::MatrixXd& input);
/// forward without keeping the cache.
Eigen::MatrixXd predict(const ModelParams& params, const Eigen::MatrixXd& input);

/// Sum over cells of mask * (pred - target)^2.
double masked_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                  const Eigen::MatrixXd& mask);

/// Exact gradient of masked_mse(forward(params, input), target, mask) with
/// respect to every parameter, using the cache of that forward call.
Gradients backward(const ModelParams& params, const ForwardCache& cache, const Eigen::MatrixXd& pred,
                   const Eigen::MatrixXd& target, const Eigen::MatrixXd& mask);

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  ModelParams first_moment;
  ModelParams second_moment;
  std::size_t step_count = 0;
  AdamHyper hyper;

  static AdamState for_params(const ModelParams& params, AdamHyper hyper = {});
};

/// One bias-corrected Adam update, in place.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state);

/// Default encoder-decoder: d -> max(ceil(d/2), 8) -> ceil(d/4) ->
/// max(ceil(d/2), 8) -> d, ReLU hidden, sigmoid output.
std::vector<LayerSpec> dense_autoencoder(std::size_t d);
/// 1D-convolution variant: channels 1 -> 16 -> 16 -> 1, kernel 3.
std::vector<LayerSpec> conv_autoencoder(std::size_t d);

/// Text format: a shape manifest line per layer followed by its values in
/// hexadecimal floating point, so a save/load round trip is exact.
void save_params(const ModelParams& params, std::ostream& out);
ModelParams load_params(std::istream& in);

}  // namespace attrnoise::nn
