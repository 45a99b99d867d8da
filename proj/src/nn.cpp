#include "attrnoise/nn.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace attrnoise::nn {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

const char* to_string(LayerKind k) { return k == LayerKind::dense ? "dense" : "conv1d"; }

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_width = in;
  s.out_width = out;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::conv1d(std::size_t length, std::size_t channels_in, std::size_t channels_out,
                            std::size_t kernel_size, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::conv1d;
  s.length = length;
  s.channels_in = channels_in;
  s.channels_out = channels_out;
  s.kernel_size = kernel_size;
  s.activation = act;
  return s;
}

void LayerSpec::validate() const {
  if (kind == LayerKind::dense) {
    if (in_width == 0 || out_width == 0) throw ShapeError("dense layer widths must be positive");
  } else {
    if (length == 0 || channels_in == 0 || channels_out == 0)
      throw ShapeError("conv1d length and channels must be positive");
    if (kernel_size % 2 == 0) throw ShapeError("conv1d kernel_size must be odd");
  }
}

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

std::pair<Eigen::Index, Eigen::Index> weight_shape(const LayerSpec& s) {
  if (s.kind == LayerKind::dense) return {idx(s.out_width), idx(s.in_width)};
  return {idx(s.channels_out), idx(s.channels_in * s.kernel_size)};
}

Eigen::Index bias_size(const LayerSpec& s) {
  return s.kind == LayerKind::dense ? idx(s.out_width) : idx(s.channels_out);
}

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::sigmoid: return (1.0 + (-z.array()).exp()).inverse().matrix();
  }
  return z;
}

// dL/dz from dL/dy for y = act(z).
Eigen::MatrixXd activation_backward(const Eigen::MatrixXd& grad_out, const Eigen::MatrixXd& z,
                                    Activation a) {
  switch (a) {
    case Activation::identity: return grad_out;
    case Activation::relu: return (z.array() > 0.0).select(grad_out, 0.0);
    case Activation::sigmoid: {
      const Eigen::ArrayXXd s = (1.0 + (-z.array()).exp()).inverse();
      return (grad_out.array() * s * (1.0 - s)).matrix();
    }
  }
  return grad_out;
}

// Input-channel x output-channel matrix for one kernel tap.
Eigen::MatrixXd conv_tap(const Layer& layer, std::size_t tap) {
  const auto& s = layer.spec;
  Eigen::MatrixXd w(idx(s.channels_in), idx(s.channels_out));
  for (std::size_t c = 0; c < s.channels_in; ++c)
    for (std::size_t o = 0; o < s.channels_out; ++o)
      w(idx(c), idx(o)) = layer.weight(idx(o), idx(c * s.kernel_size + tap));
  return w;
}

Eigen::MatrixXd affine(const Layer& layer, const Eigen::MatrixXd& x) {
  const auto& s = layer.spec;
  if (s.kind == LayerKind::dense) {
    Eigen::MatrixXd z = x * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    return z;
  }
  const auto cin = idx(s.channels_in);
  const auto cout = idx(s.channels_out);
  const auto half = static_cast<long>(s.kernel_size / 2);
  Eigen::MatrixXd z(x.rows(), idx(s.length * s.channels_out));
  for (std::size_t p = 0; p < s.length; ++p) z.middleCols(idx(p) * cout, cout).rowwise() = layer.bias.transpose();
  for (std::size_t t = 0; t < s.kernel_size; ++t) {
    const Eigen::MatrixXd w = conv_tap(layer, t);
    for (std::size_t p = 0; p < s.length; ++p) {
      const long src = static_cast<long>(p) + static_cast<long>(t) - half;
      if (src < 0 || src >= static_cast<long>(s.length)) continue;
      z.middleCols(idx(p) * cout, cout).noalias() += x.middleCols(src * cin, cin) * w;
    }
  }
  return z;
}

void check_shapes(const Layer& layer, const LayerSpec& spec) {
  const auto [r, c] = weight_shape(spec);
  if (layer.weight.rows() != r || layer.weight.cols() != c || layer.bias.size() != bias_size(spec))
    throw ShapeError("layer tensor shapes do not match its spec");
}

}  // namespace

std::size_t ModelParams::input_width() const {
  return layers.empty() ? 0 : layers.front().spec.input_width();
}

std::size_t ModelParams::output_width() const {
  return layers.empty() ? 0 : layers.back().spec.output_width();
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void ModelParams::validate() const {
  if (layers.empty()) throw ShapeError("model has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].spec.validate();
    check_shapes(layers[i], layers[i].spec);
    if (i > 0 && layers[i - 1].spec.output_width() != layers[i].spec.input_width())
      throw ShapeError("layer " + std::to_string(i) + " input width does not match previous output");
  }
}

ModelParams init_params(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams params;
  for (const auto& s : specs) {
    s.validate();
    const auto [rows, cols] = weight_shape(s);
    const double fan_in = s.kind == LayerKind::dense ? double(s.in_width) : double(s.channels_in * s.kernel_size);
    const double fan_out = s.kind == LayerKind::dense ? double(s.out_width) : double(s.channels_out * s.kernel_size);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer layer{s, Eigen::MatrixXd(rows, cols), Eigen::VectorXd::Zero(bias_size(s))};
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) layer.weight(r, c) = dist(rng);
    params.layers.push_back(std::move(layer));
  }
  params.validate();
  return params;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams z;
  for (const auto& l : params.layers)
    z.layers.push_back({l.spec, Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  return z;
}

ForwardResult forward(const ModelParams& params, const Eigen::MatrixXd& input) {
  if (params.layers.empty()) throw ShapeError("model has no layers");
  if (static_cast<std::size_t>(input.cols()) != params.input_width())
    throw ShapeError("input width " + std::to_string(input.cols()) + " does not match model input " +
                     std::to_string(params.input_width()));
  ForwardResult result;
  result.cache.layers.reserve(params.layers.size());
  Eigen::MatrixXd x = input;
  for (const auto& layer : params.layers) {
    Eigen::MatrixXd z = affine(layer, x);
    Eigen::MatrixXd y = activate(z, layer.spec.activation);
    result.cache.layers.push_back({std::move(x), std::move(z)});
    x = std::move(y);
  }
  result.output = std::move(x);
  return result;
}

Eigen::MatrixXd predict(const ModelParams& params, const Eigen::MatrixXd& input) {
  if (static_cast<std::size_t>(input.cols()) != params.input_width())
    throw ShapeError("input width does not match model");
  Eigen::MatrixXd x = input;
  for (const auto& layer : params.layers) x = activate(affine(layer, x), layer.spec.activation);
  return x;
}

double masked_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, const Eigen::MatrixXd& mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || pred.rows() != mask.rows() ||
      pred.cols() != mask.cols())
    throw ShapeError("masked_mse: shape mismatch");
  // Select rather than multiply so masked cells contribute exactly zero even
  // when the residual there is not finite.
  const Eigen::ArrayXXd r = pred.array() - target.array();
  return (mask.array() != 0.0).select(r.square(), 0.0).sum();
}

Gradients backward(const ModelParams& params, const ForwardCache& cache, const Eigen::MatrixXd& pred,
                   const Eigen::MatrixXd& target, const Eigen::MatrixXd& mask) {
  if (cache.layers.size() != params.layers.size()) throw ShapeError("stale forward cache: layer count");
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& s = params.layers[i].spec;
    if (static_cast<std::size_t>(cache.layers[i].input.cols()) != s.input_width() ||
        static_cast<std::size_t>(cache.layers[i].pre_activation.cols()) != s.output_width() ||
        cache.layers[i].input.rows() != pred.rows())
      throw ShapeError("stale forward cache: shape drift at layer " + std::to_string(i));
  }
  if (static_cast<std::size_t>(pred.cols()) != params.output_width())
    throw ShapeError("prediction width does not match model");
  if (target.rows() != pred.rows() || target.cols() != pred.cols() || mask.rows() != pred.rows() ||
      mask.cols() != pred.cols())
    throw ShapeError("backward: target/mask shape mismatch");

  Gradients grads = zeros_like(params);
  Eigen::MatrixXd grad =
      (mask.array() != 0.0).select(2.0 * (pred.array() - target.array()), 0.0).matrix();

  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const auto& layer = params.layers[li];
    const auto& s = layer.spec;
    const auto& lc = cache.layers[li];
    const Eigen::MatrixXd dz = activation_backward(grad, lc.pre_activation, s.activation);
    auto& g = grads.layers[li];

    if (s.kind == LayerKind::dense) {
      g.weight.noalias() = dz.transpose() * lc.input;
      g.bias = dz.colwise().sum().transpose();
      if (li > 0) grad = dz * layer.weight;
      continue;
    }

    const auto cin = idx(s.channels_in);
    const auto cout = idx(s.channels_out);
    const auto half = static_cast<long>(s.kernel_size / 2);
    const Eigen::RowVectorXd col_sums = dz.colwise().sum();
    for (std::size_t p = 0; p < s.length; ++p) g.bias += col_sums.segment(idx(p) * cout, cout).transpose();

    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(lc.input.rows(), lc.input.cols());
    for (std::size_t t = 0; t < s.kernel_size; ++t) {
      const Eigen::MatrixXd w = conv_tap(layer, t);
      Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(cin, cout);
      for (std::size_t p = 0; p < s.length; ++p) {
        const long src = static_cast<long>(p) + static_cast<long>(t) - half;
        if (src < 0 || src >= static_cast<long>(s.length)) continue;
        const auto dz_p = dz.middleCols(idx(p) * cout, cout);
        dw.noalias() += lc.input.middleCols(src * cin, cin).transpose() * dz_p;
        if (li > 0) dx.middleCols(src * cin, cin).noalias() += dz_p * w.transpose();
      }
      for (std::size_t c = 0; c < s.channels_in; ++c)
        for (std::size_t o = 0; o < s.channels_out; ++o)
          g.weight(idx(o), idx(c * s.kernel_size + t)) = dw(idx(c), idx(o));
    }
    if (li > 0) grad = std::move(dx);
  }
  return grads;
}

AdamState AdamState::for_params(const ModelParams& params, AdamHyper hyper) {
  return {zeros_like(params), zeros_like(params), 0, hyper};
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state) {
  if (grads.layers.size() != params.layers.size() || state.first_moment.layers.size() != params.layers.size())
    throw ShapeError("adam_step: layer count mismatch");
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& g = grads.layers[i];
    const auto& p = params.layers[i];
    if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() || g.bias.size() != p.bias.size())
      throw ShapeError("adam_step: gradient shape mismatch at layer " + std::to_string(i));
    if (!g.weight.allFinite() || !g.bias.allFinite())
      throw NonFiniteError("non-finite gradient at layer " + std::to_string(i) + " (step " +
                           std::to_string(state.step_count + 1) + ")");
  }

  const auto& h = state.hyper;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = h.beta1 * m + (1.0 - h.beta1) * grad;
    v = h.beta2 * v + (1.0 - h.beta2) * grad.cwiseProduct(grad);
    param.array() -= h.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + h.epsilon);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& p = params.layers[i];
    const auto& g = grads.layers[i];
    auto& m = state.first_moment.layers[i];
    auto& v = state.second_moment.layers[i];
    update(p.weight, g.weight, m.weight, v.weight);
    update(p.bias, g.bias, m.bias, v.bias);
  }
}

std::vector<LayerSpec> dense_autoencoder(std::size_t d) {
  if (d == 0) throw ShapeError("autoencoder width must be positive");
  const std::size_t half = std::max<std::size_t>((d + 1) / 2, 8);
  const std::size_t quarter = std::max<std::size_t>((d + 3) / 4, 1);
  return {LayerSpec::dense(d, half, Activation::relu), LayerSpec::dense(half, quarter, Activation::relu),
          LayerSpec::dense(quarter, half, Activation::relu), LayerSpec::dense(half, d, Activation::sigmoid)};
}

std::vector<LayerSpec> conv_autoencoder(std::size_t d) {
  if (d == 0) throw ShapeError("autoencoder width must be positive");
  return {LayerSpec::conv1d(d, 1, 16, 3, Activation::relu), LayerSpec::conv1d(d, 16, 16, 3, Activation::relu),
          LayerSpec::conv1d(d, 16, 1, 3, Activation::sigmoid)};
}

namespace {

void write_values(std::ostream& out, const double* data, Eigen::Index count) {
  char buf[64];
  for (Eigen::Index i = 0; i < count; ++i) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, data[i], std::chars_format::hex);
    out << (i ? " " : "") << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
  }
  out << '\n';
}

void read_values(std::istream& in, double* data, Eigen::Index count) {
  std::string tok;
  for (Eigen::Index i = 0; i < count; ++i) {
    if (!(in >> tok)) throw std::runtime_error("model file truncated");
    bool neg = !tok.empty() && tok[0] == '-';
    const char* first = tok.data() + (neg ? 1 : 0);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v, std::chars_format::hex);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) throw std::runtime_error("bad value '" + tok + "'");
    data[i] = neg ? -v : v;
  }
}

}  // namespace

void save_params(const ModelParams& params, std::ostream& out) {
  out << "attrnoise-model 1\n" << "layers " << params.layers.size() << '\n';
  for (const auto& l : params.layers) {
    const auto& s = l.spec;
    out << "layer " << to_string(s.kind) << ' ' << to_string(s.activation);
    if (s.kind == LayerKind::dense)
      out << ' ' << s.in_width << ' ' << s.out_width << '\n';
    else
      out << ' ' << s.length << ' ' << s.channels_in << ' ' << s.channels_out << ' ' << s.kernel_size << '\n';
    out << "weight " << l.weight.rows() << ' ' << l.weight.cols() << '\n';
    // Eigen storage is column-major.
    write_values(out, l.weight.data(), l.weight.size());
    out << "bias " << l.bias.size() << '\n';
    write_values(out, l.bias.data(), l.bias.size());
  }
}

ModelParams load_params(std::istream& in) {
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "attrnoise-model" || version != 1)
    throw std::runtime_error("not an attrnoise model file");
  std::size_t n_layers = 0;
  if (!(in >> word >> n_layers) || word != "layers") throw std::runtime_error("model file: missing layer count");
  ModelParams params;
  for (std::size_t i = 0; i < n_layers; ++i) {
    std::string kind, act;
    if (!(in >> word >> kind >> act) || word != "layer") throw std::runtime_error("model file: bad layer header");
    LayerSpec s;
    if (kind == "dense") {
      std::size_t a = 0, b = 0;
      in >> a >> b;
      s = LayerSpec::dense(a, b, activation_from_string(act));
    } else if (kind == "conv1d") {
      std::size_t len = 0, ci = 0, co = 0, k = 0;
      in >> len >> ci >> co >> k;
      s = LayerSpec::conv1d(len, ci, co, k, activation_from_string(act));
    } else {
      throw std::runtime_error("model file: unknown layer kind '" + kind + "'");
    }
    Eigen::Index rows = 0, cols = 0, nb = 0;
    if (!(in >> word >> rows >> cols) || word != "weight") throw std::runtime_error("model file: bad weight header");
    Layer layer{s, Eigen::MatrixXd(rows, cols), Eigen::VectorXd()};
    read_values(in, layer.weight.data(), layer.weight.size());
    if (!(in >> word >> nb) || word != "bias") throw std::runtime_error("model file: bad bias header");
    layer.bias.resize(nb);
    read_values(in, layer.bias.data(), nb);
    params.layers.push_back(std::move(layer));
  }
  params.validate();
  return params;
}

}  // namespace attrnoise::nn
