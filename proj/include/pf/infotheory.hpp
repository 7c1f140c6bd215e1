#pragma once
// Exact information quantities on finite distributions, plus the closed-form
// Gaussian formulas. Everything here works in nats unless a LogBase says
// otherwise, and everything is a pure function of its arguments.

#include <cstddef>
#include <iosfwd>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pf/rng.hpp"

namespace pf::info {

enum class LogBase { two, e };

// Probabilities at or below this are exact zeros for 0 log 0 purposes.
inline constexpr double kZeroMass = 1e-15;

// 2*pi*e; the latent noise variance is its reciprocal, which makes the
// noise vector's differential entropy exactly zero.
inline constexpr double kTwoPiE = 2.0 * std::numbers::pi * std::numbers::e;
inline constexpr double kUnitEntropyNoiseVariance = 1.0 / kTwoPiE;

class Pmf {
 public:
  // Throws ValidationError unless entries are >= 0 and sum to 1 within 1e-12.
  explicit Pmf(std::vector<double> probs);

  static Pmf uniform(std::size_t n);
  // Normalizes non-negative weights. Throws when all weights are zero.
  static Pmf from_weights(std::vector<double> weights);

  std::span<const double> probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  std::vector<double> probs_;
};

// Dense row-major table of doubles. Used for joints and for conditional pmf
// tables, where row r is the pmf conditioned on the r-th conditioning value.
class Table {
 public:
  Table() = default;
  Table(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Table(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> data() const { return data_; }
  double sum() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Throws ValidationError unless every row is a pmf (within 1e-12).
void require_row_stochastic(const Table& t, const std::string& what);

// Finite P_{S,X} together with a channel P_{Z|X}. Z depends on S only
// through X, so I(S;Z|X) = 0 holds by construction.
class DiscreteTriple {
 public:
  DiscreteTriple(Table joint_sx, Table channel_zx);

  const Table& joint_sx() const { return joint_sx_; }
  const Table& channel_zx() const { return channel_zx_; }
  std::size_t num_s() const { return joint_sx_.rows(); }
  std::size_t num_x() const { return joint_sx_.cols(); }
  std::size_t num_z() const { return channel_zx_.cols(); }

  double joint(std::size_t s, std::size_t x, std::size_t z) const {
    return joint_sx_(s, x) * channel_zx_(x, z);
  }

  Pmf marginal_s() const;
  Pmf marginal_x() const;
  Pmf marginal_z() const;

  // Exact P_{X|S,Z}: rows indexed s * num_z() + z, num_x() columns.
  // Rows for null (s, z) events are uniform.
  Table posterior_x_given_sz() const;
  // Exact P_{S|Z}: num_z() rows of num_s() columns; null rows uniform.
  Table posterior_s_given_z() const;

 private:
  Table joint_sx_;
  Table channel_zx_;
};

// Reads two whitespace-separated matrices (P_{S,X} then P_{Z|X}) separated
// by at least one blank line. Lines starting with '#' are ignored.
DiscreteTriple read_triple(std::istream& in);
DiscreteTriple read_triple_file(const std::string& path);

struct InfoDecomposition {
  double i_sz = 0.0;
  double i_xz = 0.0;
  double h_x_given_s = 0.0;
  double h_x_given_sz = 0.0;

  // I(S;Z) - (I(X;Z) - H(X|S) + H(X|S,Z)); zero for an exact computation.
  double identity_residual() const { return i_sz - (i_xz - h_x_given_s + h_x_given_sz); }
};

class GaussianDiag {
 public:
  GaussianDiag(std::vector<double> mean, std::vector<double> variance);
  static GaussianDiag standard(std::size_t d);

  std::size_t dim() const { return mean_.size(); }
  std::span<const double> mean() const { return mean_; }
  std::span<const double> variance() const { return variance_; }

 private:
  std::vector<double> mean_;
  std::vector<double> variance_;
};

double shannon_entropy(const Pmf& p, LogBase base = LogBase::e);

// KL(p || q) for diagonal Gaussians, in nats.
double kl_gaussian_diag(const GaussianDiag& p, const GaussianDiag& q);

// (d/2) ln(2 pi e variance) for an isotropic Gaussian.
double gaussian_differential_entropy(double variance, int d);

InfoDecomposition exact_decomposition(const DiscreteTriple& t);

struct IdentitySides {
  double lhs = 0.0;  // I(X;Z)
  double rhs = 0.0;  // KL(P_{Z|X} || q_z | P_X) - KL(P_Z || q_z)
};

IdentitySides complexity_identity_check(const DiscreteTriple& t, const Pmf& q_z);

// Complexity-plus-uncertainty upper bound on I(S;Z):
//   KL(P_{Z|X}||q_z|P_X) - KL(P_Z||q_z) + H_ce(X|S,Z; q) - H(X|S).
// q_x_given_sz has rows indexed s * num_z + z and num_x columns.
double leakage_upper_bound(const DiscreteTriple& t, const Pmf& q_z, const Table& q_x_given_sz);

// Classifier lower bound on I(S;Z): E[log q(S|Z)] + H(S).
// q_s_given_z has num_z rows and num_s columns.
double leakage_lower_bound(const DiscreteTriple& t, const Table& q_s_given_z);

// Donsker-Varadhan value mean(t_joint) - log(mean(exp(t_marginal))).
double dv_value(std::span<const double> t_joint, std::span<const double> t_marginal);

double to_bits(double nats);

// Random instances for property checks. zero_prob is the chance that any
// single entry is forced to zero before normalization.
Pmf random_pmf(Rng& rng, std::size_t n, double zero_prob = 0.0);
Table random_conditional(Rng& rng, std::size_t rows, std::size_t cols, double zero_prob = 0.0);
DiscreteTriple random_triple(Rng& rng, std::size_t max_card, double zero_prob = 0.0);

}  // namespace pf::info
