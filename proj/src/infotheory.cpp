#include "pf/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "pf/errors.hpp"

namespace pf::info {

namespace {

constexpr double kSumTol = 1e-12;

bool null_mass(double p) { return p <= kZeroMass; }

// p * log(p / q) with 0 log 0 = 0.
double plogr(double p, double q) { return null_mass(p) ? 0.0 : p * std::log(p / q); }

double neg_plogp(double p) { return null_mass(p) ? 0.0 : -p * std::log(p); }

void check_pmf_entries(std::span<const double> v, const std::string& what) {
  if (v.empty()) throw ValidationError(what + ": empty distribution");
  double s = 0.0;
  for (double p : v) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError(what + ": negative or non-finite entry");
    s += p;
  }
  if (std::abs(s - 1.0) > kSumTol)
    throw ValidationError(what + ": entries sum to " + std::to_string(s) + ", expected 1");
}

}  // namespace

Pmf::Pmf(std::vector<double> probs) : probs_(std::move(probs)) { check_pmf_entries(probs_, "pmf"); }

Pmf Pmf::uniform(std::size_t n) {
  if (n == 0) throw ValidationError("pmf: empty support");
  return Pmf(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Pmf Pmf::from_weights(std::vector<double> weights) {
  double s = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("pmf: negative or non-finite weight");
    s += w;
  }
  if (s <= 0.0) throw ValidationError("pmf: all weights are zero");
  for (double& w : weights) w /= s;
  return Pmf(std::move(weights));
}

Table::Table(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw ValidationError("table: data size does not match shape");
}

double Table::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

void require_row_stochastic(const Table& t, const std::string& what) {
  if (t.rows() == 0 || t.cols() == 0) throw ValidationError(what + ": empty table");
  for (std::size_t r = 0; r < t.rows(); ++r)
    check_pmf_entries(t.row(r), what + " row " + std::to_string(r));
}

DiscreteTriple::DiscreteTriple(Table joint_sx, Table channel_zx)
    : joint_sx_(std::move(joint_sx)), channel_zx_(std::move(channel_zx)) {
  check_pmf_entries(joint_sx_.data(), "joint P(S,X)");
  if (joint_sx_.rows() == 0 || joint_sx_.cols() == 0) throw ValidationError("joint P(S,X): empty");
  if (channel_zx_.rows() != joint_sx_.cols())
    throw ValidationError("channel P(Z|X): needs one row per value of X");
  require_row_stochastic(channel_zx_, "channel P(Z|X)");
}

Pmf DiscreteTriple::marginal_s() const {
  std::vector<double> p(num_s(), 0.0);
  for (std::size_t s = 0; s < num_s(); ++s)
    for (std::size_t x = 0; x < num_x(); ++x) p[s] += joint_sx_(s, x);
  return Pmf::from_weights(std::move(p));
}

Pmf DiscreteTriple::marginal_x() const {
  std::vector<double> p(num_x(), 0.0);
  for (std::size_t s = 0; s < num_s(); ++s)
    for (std::size_t x = 0; x < num_x(); ++x) p[x] += joint_sx_(s, x);
  return Pmf::from_weights(std::move(p));
}

Pmf DiscreteTriple::marginal_z() const {
  const Pmf px = marginal_x();
  std::vector<double> p(num_z(), 0.0);
  for (std::size_t x = 0; x < num_x(); ++x)
    for (std::size_t z = 0; z < num_z(); ++z) p[z] += px[x] * channel_zx_(x, z);
  return Pmf::from_weights(std::move(p));
}

Table DiscreteTriple::posterior_x_given_sz() const {
  Table q(num_s() * num_z(), num_x());
  for (std::size_t s = 0; s < num_s(); ++s) {
    for (std::size_t z = 0; z < num_z(); ++z) {
      const std::size_t r = s * num_z() + z;
      double norm = 0.0;
      for (std::size_t x = 0; x < num_x(); ++x) norm += joint(s, x, z);
      for (std::size_t x = 0; x < num_x(); ++x)
        q(r, x) = null_mass(norm) ? 1.0 / static_cast<double>(num_x()) : joint(s, x, z) / norm;
    }
  }
  return q;
}

Table DiscreteTriple::posterior_s_given_z() const {
  Table q(num_z(), num_s());
  for (std::size_t z = 0; z < num_z(); ++z) {
    double norm = 0.0;
    for (std::size_t s = 0; s < num_s(); ++s)
      for (std::size_t x = 0; x < num_x(); ++x) norm += joint(s, x, z);
    for (std::size_t s = 0; s < num_s(); ++s) {
      double psz = 0.0;
      for (std::size_t x = 0; x < num_x(); ++x) psz += joint(s, x, z);
      q(z, s) = null_mass(norm) ? 1.0 / static_cast<double>(num_s()) : psz / norm;
    }
  }
  return q;
}

namespace {

std::vector<std::vector<double>> read_matrix_block(std::istream& in, bool& hit_eof) {
  std::vector<std::vector<double>> rows;
  std::string line;
  hit_eof = true;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
      if (rows.empty()) continue;
      hit_eof = false;
      return rows;
    }
    if (line[first] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw FormatError("matrix file: not a number: '" + tok + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError("matrix file: ragged rows");
    rows.push_back(std::move(row));
  }
  return rows;
}

Table to_table(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw FormatError("matrix file: missing matrix");
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Table(rows.size(), rows.front().size(), std::move(flat));
}

}  // namespace

DiscreteTriple read_triple(std::istream& in) {
  bool eof = false;
  auto joint = read_matrix_block(in, eof);
  if (eof) throw FormatError("matrix file: expected two matrices separated by a blank line");
  auto channel = read_matrix_block(in, eof);
  return DiscreteTriple(to_table(joint), to_table(channel));
}

DiscreteTriple read_triple_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open matrix file: " + path);
  return read_triple(in);
}

GaussianDiag::GaussianDiag(std::vector<double> mean, std::vector<double> variance)
    : mean_(std::move(mean)), variance_(std::move(variance)) {
  if (mean_.size() != variance_.size())
    throw ValidationError("gaussian: mean and variance dimensions differ");
  for (double v : variance_)
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("gaussian: variance must be positive");
}

GaussianDiag GaussianDiag::standard(std::size_t d) {
  return GaussianDiag(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0));
}

double shannon_entropy(const Pmf& p, LogBase base) {
  double h = 0.0;
  for (double v : p.probs()) h += neg_plogp(v);
  return base == LogBase::two ? to_bits(h) : h;
}

double kl_gaussian_diag(const GaussianDiag& p, const GaussianDiag& q) {
  if (p.dim() != q.dim()) throw ValidationError("kl_gaussian_diag: dimension mismatch");
  double twice = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double vp = p.variance()[i];
    const double vq = q.variance()[i];
    const double dm = p.mean()[i] - q.mean()[i];
    twice += std::log(vq / vp) + (vp + dm * dm) / vq - 1.0;
  }
  return std::max(0.0, 0.5 * twice);
}

double gaussian_differential_entropy(double variance, int d) {
  if (!(variance > 0.0)) throw ValidationError("differential entropy: variance must be positive");
  if (d <= 0) throw ValidationError("differential entropy: dimension must be positive");
  return 0.5 * static_cast<double>(d) * std::log(kTwoPiE * variance);
}

InfoDecomposition exact_decomposition(const DiscreteTriple& t) {
  const std::size_t ns = t.num_s(), nx = t.num_x(), nz = t.num_z();
  const Pmf ps = t.marginal_s();
  const Pmf px = t.marginal_x();
  const Pmf pz = t.marginal_z();

  Table psz(ns, nz);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t z = 0; z < nz; ++z) psz(s, z) += t.joint(s, x, z);

  InfoDecomposition out;
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t z = 0; z < nz; ++z) out.i_sz += plogr(psz(s, z), ps[s] * pz[z]);

  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t z = 0; z < nz; ++z) {
      const double pxz = px[x] * t.channel_zx()(x, z);
      out.i_xz += plogr(pxz, px[x] * pz[z]);
    }

  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t x = 0; x < nx; ++x) {
      const double p = t.joint_sx()(s, x);
      if (!null_mass(p)) out.h_x_given_s -= p * std::log(p / ps[s]);
    }

  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t z = 0; z < nz; ++z) {
        const double p = t.joint(s, x, z);
        if (!null_mass(p)) out.h_x_given_sz -= p * std::log(p / psz(s, z));
      }

  out.i_sz = std::max(0.0, out.i_sz);
  out.i_xz = std::max(0.0, out.i_xz);
  out.h_x_given_s = std::max(0.0, out.h_x_given_s);
  out.h_x_given_sz = std::max(0.0, out.h_x_given_sz);
  return out;
}

namespace {

// KL(P_{Z|X} || q_z | P_X) - KL(P_Z || q_z)
double complexity_rhs(const DiscreteTriple& t, const Pmf& q_z) {
  if (q_z.size() != t.num_z()) throw ValidationError("q_z: support size differs from |Z|");
  const Pmf px = t.marginal_x();
  const Pmf pz = t.marginal_z();
  for (std::size_t z = 0; z < t.num_z(); ++z)
    if (!null_mass(pz[z]) && null_mass(q_z[z]))
      throw ValidationError("q_z: zero mass at z=" + std::to_string(z) + " where P_Z > 0");

  double cond_kl = 0.0;
  for (std::size_t x = 0; x < t.num_x(); ++x) {
    if (null_mass(px[x])) continue;
    double row = 0.0;
    for (std::size_t z = 0; z < t.num_z(); ++z) row += plogr(t.channel_zx()(x, z), q_z[z]);
    cond_kl += px[x] * row;
  }
  double marg_kl = 0.0;
  for (std::size_t z = 0; z < t.num_z(); ++z) marg_kl += plogr(pz[z], q_z[z]);
  return cond_kl - marg_kl;
}

}  // namespace

IdentitySides complexity_identity_check(const DiscreteTriple& t, const Pmf& q_z) {
  IdentitySides out;
  out.rhs = complexity_rhs(t, q_z);
  out.lhs = exact_decomposition(t).i_xz;
  return out;
}

double leakage_upper_bound(const DiscreteTriple& t, const Pmf& q_z, const Table& q_x_given_sz) {
  const std::size_t ns = t.num_s(), nx = t.num_x(), nz = t.num_z();
  if (q_x_given_sz.rows() != ns * nz || q_x_given_sz.cols() != nx)
    throw ValidationError("q(X|S,Z): expected |S||Z| rows of |X| columns");
  require_row_stochastic(q_x_given_sz, "q(X|S,Z)");

  double cross_entropy = 0.0;
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t z = 0; z < nz; ++z) {
        const double p = t.joint(s, x, z);
        if (null_mass(p)) continue;
        const double q = q_x_given_sz(s * nz + z, x);
        if (null_mass(q))
          throw ValidationError("q(X|S,Z): zero mass where the true conditional is positive");
        cross_entropy -= p * std::log(q);
      }
  return complexity_rhs(t, q_z) + cross_entropy - exact_decomposition(t).h_x_given_s;
}

double leakage_lower_bound(const DiscreteTriple& t, const Table& q_s_given_z) {
  const std::size_t ns = t.num_s(), nx = t.num_x(), nz = t.num_z();
  if (q_s_given_z.rows() != nz || q_s_given_z.cols() != ns)
    throw ValidationError("q(S|Z): expected |Z| rows of |S| columns");
  require_row_stochastic(q_s_given_z, "q(S|Z)");

  double expected_log = 0.0;
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t z = 0; z < nz; ++z) {
        const double p = t.joint(s, x, z);
        if (null_mass(p)) continue;
        const double q = q_s_given_z(z, s);
        if (null_mass(q)) throw ValidationError("q(S|Z): zero mass where the true posterior is positive");
        expected_log += p * std::log(q);
      }
  return expected_log + shannon_entropy(t.marginal_s());
}

double dv_value(std::span<const double> t_joint, std::span<const double> t_marginal) {
  if (t_joint.empty() || t_marginal.empty()) throw ValidationError("dv_value: empty input");
  double mean_joint = 0.0;
  for (double v : t_joint) mean_joint += v;
  mean_joint /= static_cast<double>(t_joint.size());

  const double peak = *std::max_element(t_marginal.begin(), t_marginal.end());
  double acc = 0.0;
  for (double v : t_marginal) acc += std::exp(v - peak);
  const double log_mean_exp = peak + std::log(acc / static_cast<double>(t_marginal.size()));
  return mean_joint - log_mean_exp;
}

double to_bits(double nats) { return nats / std::numbers::ln2; }

Pmf random_pmf(Rng& rng, std::size_t n, double zero_prob) {
  std::vector<double> w(n);
  for (;;) {
    double total = 0.0;
    for (double& v : w) {
      v = rng.bernoulli(zero_prob) ? 0.0 : -std::log(1.0 - rng.uniform());
      total += v;
    }
    if (total > 0.0) break;
  }
  return Pmf::from_weights(std::move(w));
}

Table random_conditional(Rng& rng, std::size_t rows, std::size_t cols, double zero_prob) {
  Table t(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const Pmf p = random_pmf(rng, cols, zero_prob);
    for (std::size_t c = 0; c < cols; ++c) t(r, c) = p[c];
  }
  return t;
}

DiscreteTriple random_triple(Rng& rng, std::size_t max_card, double zero_prob) {
  if (max_card < 1) throw ValidationError("random_triple: max_card must be >= 1");
  const std::size_t ns = 1 + rng.index(max_card);
  const std::size_t nx = 1 + rng.index(max_card);
  const std::size_t nz = 1 + rng.index(max_card);
  const Pmf joint = random_pmf(rng, ns * nx, zero_prob);
  return DiscreteTriple(Table(ns, nx, {joint.probs().begin(), joint.probs().end()}),
                        random_conditional(rng, nx, nz, zero_prob));
}

}  // namespace pf::info
