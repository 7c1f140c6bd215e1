#include "pf/nn.hpp"

#include <cmath>
#include <cstring>

namespace pf::nn {

namespace {
constexpr double kLeakySlope = 0.2;
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "elu") return Activation::elu;
  if (name == "tanh") return Activation::tanh;
  throw ValidationError("unknown activation: " + std::string(name));
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::elu: return "elu";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

template <typename T>
void activate(Activation a, std::span<const T> pre, std::span<T> out) {
  const std::size_t n = pre.size();
  switch (a) {
    case Activation::identity:
      std::copy(pre.begin(), pre.end(), out.begin());
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] > T{0} ? pre[i] : T{0};
      break;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < n; ++i)
        out[i] = pre[i] > T{0} ? pre[i] : static_cast<T>(kLeakySlope) * pre[i];
      break;
    case Activation::elu:
      for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] > T{0} ? pre[i] : std::expm1(pre[i]);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(pre[i]);
      break;
  }
}

template <typename T>
void activation_backward(Activation a, std::span<const T> pre, std::span<const T> post,
                         std::span<T> dpost) {
  const std::size_t n = pre.size();
  switch (a) {
    case Activation::identity:
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i)
        if (!(pre[i] > T{0})) dpost[i] = T{0};
      break;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < n; ++i)
        if (!(pre[i] > T{0})) dpost[i] *= static_cast<T>(kLeakySlope);
      break;
    case Activation::elu:
      for (std::size_t i = 0; i < n; ++i)
        if (!(pre[i] > T{0})) dpost[i] *= post[i] + T{1};
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < n; ++i) dpost[i] *= T{1} - post[i] * post[i];
      break;
  }
}

template <typename T>
BasicDense<T>::BasicDense(std::size_t in, std::size_t out) : weight_(out, in), bias_(1, out) {
  if (in == 0 || out == 0) throw ValidationError("dense: zero-width layer");
}

template <typename T>
void BasicDense<T>::init_xavier(Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
  for (T& w : weight_.value.flat()) w = static_cast<T>((2.0 * rng.uniform() - 1.0) * limit);
  bias_.value.fill(T{0});
}

template <typename T>
BasicMatrix<T> BasicDense<T>::forward(const BasicMatrix<T>& x) const {
  if (x.cols() != in_dim())
    throw ValidationError("dense: input has " + std::to_string(x.cols()) + " columns, expected " +
                          std::to_string(in_dim()));
  BasicMatrix<T> y(x.rows(), out_dim());
  linalg::gemm_nt(x.data(), weight_.value.data(), y.data(), x.rows(), out_dim(), in_dim(), false);
  const auto b = bias_.value.row(0);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto yr = y.row(r);
    for (std::size_t j = 0; j < yr.size(); ++j) yr[j] += b[j];
  }
  return y;
}

template <typename T>
BasicMatrix<T> BasicDense<T>::backward(const BasicMatrix<T>& x, const BasicMatrix<T>& dy,
                                       bool need_dx) {
  const std::size_t batch = x.rows();
  linalg::gemm_tn(dy.data(), x.data(), weight_.grad.data(), out_dim(), in_dim(), batch);
  auto db = bias_.grad.row(0);
  for (std::size_t r = 0; r < batch; ++r) {
    const auto d = dy.row(r);
    for (std::size_t j = 0; j < d.size(); ++j) db[j] += d[j];
  }
  if (!need_dx) return {};
  BasicMatrix<T> dx(batch, in_dim());
  linalg::gemm_nn(dy.data(), weight_.value.data(), dx.data(), batch, in_dim(), out_dim());
  return dx;
}

void MlpSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw ValidationError("mlp: zero input or output width");
  for (std::size_t h : hidden)
    if (h == 0) throw ValidationError("mlp: hidden widths must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("mlp: dropout must be in [0, 1)");
}

template <typename T>
BasicMlp<T>::BasicMlp(const MlpSpec& spec, Rng& init_rng) : spec_(spec) {
  spec_.validate();
  std::size_t in = spec_.input_dim;
  for (std::size_t h : spec_.hidden) {
    layers_.emplace_back(in, h);
    in = h;
  }
  layers_.emplace_back(in, spec_.output_dim);
  for (auto& l : layers_) l.init_xavier(init_rng);
}

template <typename T>
BasicMatrix<T> dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  BasicMatrix<T> mask(rows, cols);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (T& m : mask.flat()) m = rng.bernoulli(rate) ? T{0} : keep_scale;
  return mask;
}

template <typename T>
BasicMatrix<T> BasicMlp<T>::forward(const BasicMatrix<T>& x, Mode mode, Rng* rng,
                                    Trace* trace) const {
  const bool drop = mode == Mode::train && spec_.dropout > 0.0;
  if (drop && rng == nullptr) throw ValidationError("mlp: train-mode dropout needs an rng");
  if (trace) *trace = Trace{};

  BasicMatrix<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (trace) trace->inputs.push_back(h);
    BasicMatrix<T> pre = layers_[i].forward(h);
    if (i + 1 == layers_.size()) return pre;

    BasicMatrix<T> post(pre.rows(), pre.cols());
    activate<T>(spec_.activation, pre.flat(), post.flat());
    if (trace) {
      trace->pre.push_back(pre);
      trace->post.push_back(post);
    }
    if (drop) {
      BasicMatrix<T> mask = dropout_mask<T>(post.rows(), post.cols(), spec_.dropout, *rng);
      for (std::size_t k = 0; k < post.size(); ++k) post.flat()[k] *= mask.flat()[k];
      if (trace) trace->masks.push_back(std::move(mask));
    }
    h = std::move(post);
  }
  return h;
}

template <typename T>
BasicMatrix<T> BasicMlp<T>::backward(const Trace& trace, const BasicMatrix<T>& dy) {
  if (trace.inputs.size() != layers_.size()) throw ValidationError("mlp: backward without a forward trace");
  BasicMatrix<T> d = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i + 1 < layers_.size()) {
      if (!trace.masks.empty()) {
        const auto& mask = trace.masks[i];
        for (std::size_t k = 0; k < d.size(); ++k) d.flat()[k] *= mask.flat()[k];
      }
      activation_backward<T>(spec_.activation, trace.pre[i].flat(), trace.post[i].flat(), d.flat());
    }
    d = layers_[i].backward(trace.inputs[i], d, true);
  }
  return d;
}

template <typename T>
std::vector<BasicParameter<T>*> BasicMlp<T>::parameters() {
  std::vector<BasicParameter<T>*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
  return out;
}

template <typename T>
std::vector<const BasicParameter<T>*> BasicMlp<T>::parameters() const {
  std::vector<const BasicParameter<T>*> out;
  for (const auto& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
  return out;
}

template void activate<float>(Activation, std::span<const float>, std::span<float>);
template void activate<double>(Activation, std::span<const double>, std::span<double>);
template void activation_backward<float>(Activation, std::span<const float>,
                                         std::span<const float>, std::span<float>);
template void activation_backward<double>(Activation, std::span<const double>,
                                          std::span<const double>, std::span<double>);
template BasicMatrix<float> dropout_mask<float>(std::size_t, std::size_t, double, Rng&);
template BasicMatrix<double> dropout_mask<double>(std::size_t, std::size_t, double, Rng&);
template class BasicDense<float>;
template class BasicDense<double>;
template class BasicMlp<float>;
template class BasicMlp<double>;

void zero_grad(const ParamList& params) {
  for (Parameter* p : params) p->grad.fill(0.0f);
}

double grad_norm(const ParamList& params) {
  double acc = 0.0;
  for (const Parameter* p : params)
    for (float g : p->grad.flat()) acc += static_cast<double>(g) * g;
  return std::sqrt(acc);
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const float scale = static_cast<float>(max_norm / norm);
    for (Parameter* p : params)
      for (float& g : p->grad.flat()) g *= scale;
  }
  return norm;
}

bool grads_finite(const ParamList& params) {
  for (const Parameter* p : params)
    for (float g : p->grad.flat())
      if (!std::isfinite(g)) return false;
  return true;
}

std::uint64_t hash_values(const std::vector<const Parameter*>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Parameter* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (std::size_t i = 0; i < p->value.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

Adam::Adam(ParamList params, Options opt) : params_(std::move(params)), opt_(opt) {
  if (!(opt_.learning_rate > 0.0)) throw ValidationError("adam: learning rate must be positive");
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.size(), 0.0f);
    v_.emplace_back(p->value.size(), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  const float b1 = static_cast<float>(opt_.beta1);
  const float b2 = static_cast<float>(opt_.beta2);
  const float step = static_cast<float>(opt_.learning_rate / bc1);
  const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const float eps = static_cast<float>(opt_.epsilon);
  const float wd = static_cast<float>(opt_.weight_decay);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto value = params_[k]->value.flat();
    const auto grad = params_[k]->grad.flat();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const float g = grad[i] + wd * value[i];
      m[i] = b1 * m[i] + (1.0f - b1) * g;
      v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      value[i] -= step * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
    }
  }
}

}  // namespace pf::nn
