#pragma once
// Minimal feed-forward building blocks with explicit backward passes.
//
// Forward passes are const and record what backward needs into a caller-owned
// Trace, so one network can be applied to several batches (real and fake,
// joint and marginal) before any gradient is taken. backward() accumulates
// into the parameters' grad buffers; callers zero them between steps.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pf/rng.hpp"
#include "pf/tensor.hpp"

namespace pf::nn {

enum class Mode { eval, train };

enum class Activation { identity, relu, leaky_relu, elu, tanh };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

template <typename T>
struct BasicParameter {
  BasicMatrix<T> value;
  BasicMatrix<T> grad;

  BasicParameter() = default;
  BasicParameter(std::size_t rows, std::size_t cols) : value(rows, cols), grad(rows, cols) {}
};

template <typename T>
void activate(Activation a, std::span<const T> pre, std::span<T> out);
// dpre = dpost * f'(pre), written in place over dpost.
template <typename T>
void activation_backward(Activation a, std::span<const T> pre, std::span<const T> post,
                         std::span<T> dpost);

template <typename T>
class BasicDense {
 public:
  BasicDense() = default;
  BasicDense(std::size_t in, std::size_t out);

  // Glorot/Xavier uniform weights, zero bias.
  void init_xavier(Rng& rng);

  std::size_t in_dim() const { return weight_.value.cols(); }
  std::size_t out_dim() const { return weight_.value.rows(); }

  BasicMatrix<T> forward(const BasicMatrix<T>& x) const;
  // Accumulates dW, db. Returns dx when need_dx, otherwise an empty matrix.
  BasicMatrix<T> backward(const BasicMatrix<T>& x, const BasicMatrix<T>& dy, bool need_dx);

  BasicParameter<T>& weight() { return weight_; }
  BasicParameter<T>& bias() { return bias_; }
  const BasicParameter<T>& weight() const { return weight_; }
  const BasicParameter<T>& bias() const { return bias_; }

 private:
  BasicParameter<T> weight_;  // out x in
  BasicParameter<T> bias_;    // 1 x out
};

struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 0;
  Activation activation = Activation::relu;
  double dropout = 0.0;  // applied after every hidden activation

  void validate() const;
};

template <typename T>
class BasicMlp {
 public:
  struct Trace {
    std::vector<BasicMatrix<T>> inputs;  // input to each dense layer
    std::vector<BasicMatrix<T>> pre;     // hidden pre-activations
    std::vector<BasicMatrix<T>> post;    // hidden activations (before dropout)
    std::vector<BasicMatrix<T>> masks;   // scaled dropout masks (train mode only)
  };

  BasicMlp() = default;
  BasicMlp(const MlpSpec& spec, Rng& init_rng);

  const MlpSpec& spec() const { return spec_; }

  // rng is required in train mode when dropout > 0.
  BasicMatrix<T> forward(const BasicMatrix<T>& x, Mode mode = Mode::eval, Rng* rng = nullptr,
                         Trace* trace = nullptr) const;
  // Returns dx; gradients accumulate into the parameters.
  BasicMatrix<T> backward(const Trace& trace, const BasicMatrix<T>& dy);

  std::vector<BasicParameter<T>*> parameters();
  std::vector<const BasicParameter<T>*> parameters() const;

  std::vector<BasicDense<T>>& layers() { return layers_; }
  const std::vector<BasicDense<T>>& layers() const { return layers_; }

 private:
  MlpSpec spec_;
  std::vector<BasicDense<T>> layers_;
};

using Parameter = BasicParameter<float>;
using Dense = BasicDense<float>;
using Mlp = BasicMlp<float>;
using ParamList = std::vector<Parameter*>;

// Inverted dropout mask: entries are 0 or 1/(1-rate).
template <typename T>
BasicMatrix<T> dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

void zero_grad(const ParamList& params);
double grad_norm(const ParamList& params);
// Rescales gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(const ParamList& params, double max_norm);
bool grads_finite(const ParamList& params);
// FNV-1a over the raw bytes of every parameter value.
std::uint64_t hash_values(const std::vector<const Parameter*>& params);

class Adam {
 public:
  struct Options {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;  // L2 term added to the gradient
  };

  Adam() = default;
  Adam(ParamList params, Options opt);

  void step();
  void zero_grad() { nn::zero_grad(params_); }

  const ParamList& params() const { return params_; }
  double learning_rate() const { return opt_.learning_rate; }
  void set_learning_rate(double lr) { opt_.learning_rate = lr; }
  long steps_taken() const { return t_; }

 private:
  ParamList params_;
  Options opt_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  long t_ = 0;
};

}  // namespace pf::nn
