#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "pf/errors.hpp"
#include "pf/infotheory.hpp"

using namespace pf;
using namespace pf::info;

namespace {

// Brute-force oracles over the full joint P(s, x, z).
double h(const std::vector<double>& p) {
  double acc = 0.0;
  for (double v : p)
    if (v > 0.0) acc -= v * std::log(v);
  return acc;
}

struct Brute {
  double h_s, h_x, h_z, h_sx, h_sz, h_xz, h_sxz;
};

Brute brute(const DiscreteTriple& t) {
  const std::size_t ns = t.num_s(), nx = t.num_x(), nz = t.num_z();
  std::vector<double> ps(ns), px(nx), pz(nz), psx(ns * nx), psz(ns * nz), pxz(nx * nz), psxz(ns * nx * nz);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t z = 0; z < nz; ++z) {
        const double p = t.joint_sx()(s, x) * t.channel_zx()(x, z);
        ps[s] += p;
        px[x] += p;
        pz[z] += p;
        psx[s * nx + x] += p;
        psz[s * nz + z] += p;
        pxz[x * nz + z] += p;
        psxz[(s * nx + x) * nz + z] += p;
      }
  return {h(ps), h(px), h(pz), h(psx), h(psz), h(pxz), h(psxz)};
}

double exact_isz(const DiscreteTriple& t) {
  const Brute b = brute(t);
  return b.h_s + b.h_z - b.h_sz;
}

DiscreteTriple copy_triple() {
  // S = X uniform binary, Z = X.
  return DiscreteTriple(Table(2, 2, {0.5, 0.0, 0.0, 0.5}), Table(2, 2, {1.0, 0.0, 0.0, 1.0}));
}

DiscreteTriple independent_triple(Rng& rng) {
  Table ch(3, 2);
  for (std::size_t x = 0; x < 3; ++x) {
    ch(x, 0) = 0.3;
    ch(x, 1) = 0.7;
  }
  const Pmf p = random_pmf(rng, 6);
  return DiscreteTriple(Table(2, 3, std::vector<double>(p.probs().begin(), p.probs().end())), ch);
}

Table perturb(Rng& rng, const Table& t, double strength) {
  Table out(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < t.cols(); ++c) {
      out(r, c) = t(r, c) + strength * rng.uniform() + 1e-3;
      sum += out(r, c);
    }
    for (std::size_t c = 0; c < t.cols(); ++c) out(r, c) /= sum;
  }
  return out;
}

}  // namespace

TEST_CASE("shannon_entropy examples") {
  CHECK(shannon_entropy(Pmf::uniform(2), LogBase::two) == doctest::Approx(1.0).epsilon(1e-15));
  const Pmf p({0.5, 1.0 / 6.0, 1.0 / 3.0});
  const double oracle = -(0.5 * std::log2(0.5) + (1.0 / 6) * std::log2(1.0 / 6) + (1.0 / 3) * std::log2(1.0 / 3));
  CHECK(shannon_entropy(p, LogBase::two) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(shannon_entropy(p, LogBase::two) == doctest::Approx(1.45915).epsilon(1e-5));
  CHECK(shannon_entropy(Pmf({1.0, 0.0}), LogBase::two) == 0.0);
  CHECK(shannon_entropy(Pmf({1.0, 0.0}), LogBase::e) == 0.0);
}

TEST_CASE("pmf validation") {
  CHECK_THROWS_AS(Pmf({0.5, 0.4}), ValidationError);
  CHECK_THROWS_AS(Pmf({1.2, -0.2}), ValidationError);
  CHECK_THROWS_AS(Pmf::from_weights({0.0, 0.0}), ValidationError);
  CHECK(Pmf::from_weights({1.0, 3.0})[1] == doctest::Approx(0.75));
}

TEST_CASE("entropy never exceeds log of the support size") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng.index(8);
    const Pmf p = random_pmf(rng, n, 0.3);
    std::size_t support = 0;
    for (double v : p.probs()) support += v > kZeroMass;
    CHECK(shannon_entropy(p) <= std::log(static_cast<double>(support)) + 1e-12);
    CHECK(shannon_entropy(p) >= 0.0);
  }
}

TEST_CASE("kl_gaussian_diag examples") {
  CHECK(kl_gaussian_diag(GaussianDiag::standard(3), GaussianDiag::standard(3)) == 0.0);
  CHECK(kl_gaussian_diag(GaussianDiag({1.0, 0.0}, {1.0, 1.0}), GaussianDiag::standard(2)) ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(kl_gaussian_diag(GaussianDiag::standard(2), GaussianDiag::standard(3)), ValidationError);
  CHECK_THROWS_AS(GaussianDiag({0.0}, {0.0}), ValidationError);
}

TEST_CASE("kl_gaussian_diag agrees with a Monte-Carlo estimate") {
  Rng rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    const std::size_t d = 4;
    std::vector<double> mp(d), vp(d), mq(d), vq(d);
    for (std::size_t i = 0; i < d; ++i) {
      mp[i] = rng.normal();
      mq[i] = rng.normal();
      vp[i] = 0.3 + rng.uniform();
      vq[i] = 0.3 + rng.uniform();
    }
    const GaussianDiag p(mp, vp), q(mq, vq);
    double acc = 0.0;
    const int n = 100000;
    for (int s = 0; s < n; ++s) {
      double lr = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double x = mp[i] + std::sqrt(vp[i]) * rng.normal();
        lr += -0.5 * std::log(vp[i]) - 0.5 * (x - mp[i]) * (x - mp[i]) / vp[i];
        lr -= -0.5 * std::log(vq[i]) - 0.5 * (x - mq[i]) * (x - mq[i]) / vq[i];
      }
      acc += lr;
    }
    CHECK(acc / n == doctest::Approx(kl_gaussian_diag(p, q)).epsilon(0.01));
  }
}

TEST_CASE("kl_gaussian_diag is positive away from identical parameters") {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const GaussianDiag p({rng.normal(), rng.normal()}, {0.1 + rng.uniform(), 0.1 + rng.uniform()});
    const GaussianDiag q({rng.normal(), rng.normal()}, {0.1 + rng.uniform(), 0.1 + rng.uniform()});
    CHECK(kl_gaussian_diag(p, q) > 0.0);
    CHECK(kl_gaussian_diag(p, p) == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("gaussian_differential_entropy examples") {
  CHECK(gaussian_differential_entropy(kUnitEntropyNoiseVariance, 4) == 0.0);
  CHECK(gaussian_differential_entropy(kUnitEntropyNoiseVariance, 128) == 0.0);
  CHECK(gaussian_differential_entropy(1.0, 1) == doctest::Approx(0.5 * std::log(kTwoPiE)).epsilon(1e-15));
  CHECK(gaussian_differential_entropy(1.0, 1) == doctest::Approx(1.41894).epsilon(1e-5));
  CHECK_THROWS_AS(gaussian_differential_entropy(0.0, 1), ValidationError);
  CHECK_THROWS_AS(gaussian_differential_entropy(-1.0, 1), ValidationError);
}

TEST_CASE("exact_decomposition examples") {
  const InfoDecomposition c = exact_decomposition(copy_triple());
  CHECK(c.i_sz == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(c.i_xz == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(c.h_x_given_s == doctest::Approx(0.0));
  CHECK(c.h_x_given_sz == doctest::Approx(0.0));

  Rng rng(4);
  const DiscreteTriple ind = independent_triple(rng);
  const InfoDecomposition d = exact_decomposition(ind);
  CHECK(std::abs(d.i_sz) < 1e-14);
  CHECK(std::abs(d.i_xz) < 1e-14);
  CHECK(d.h_x_given_sz == doctest::Approx(d.h_x_given_s).epsilon(1e-12));
}

TEST_CASE("exact_decomposition matches brute-force enumeration") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const DiscreteTriple t(Table(2, 3, [&] {
                             const Pmf p = random_pmf(rng, 6);
                             return std::vector<double>(p.probs().begin(), p.probs().end());
                           }()),
                           random_conditional(rng, 3, 2));
    const Brute b = brute(t);
    const InfoDecomposition d = exact_decomposition(t);
    CHECK(d.i_sz == doctest::Approx(b.h_s + b.h_z - b.h_sz).epsilon(1e-12));
    CHECK(d.i_xz == doctest::Approx(b.h_x + b.h_z - b.h_xz).epsilon(1e-12));
    CHECK(d.h_x_given_s == doctest::Approx(b.h_sx - b.h_s).epsilon(1e-12));
    CHECK(d.h_x_given_sz == doctest::Approx(b.h_sxz - b.h_sz).epsilon(1e-12));
  }
}

TEST_CASE("decomposition identity over random triples, including zero masses") {
  Rng rng(6);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const InfoDecomposition d = exact_decomposition(random_triple(rng, 5, i % 2 ? 0.3 : 0.0));
    worst = std::max(worst, std::abs(d.identity_residual()));
    CHECK(d.i_sz >= -1e-12);
    CHECK(d.i_xz >= -1e-12);
    CHECK(d.h_x_given_s >= -1e-12);
    CHECK(d.h_x_given_sz >= -1e-12);
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("complexity identity") {
  Rng rng(8);
  // Optimal variational prior: second KL vanishes.
  const DiscreteTriple t = random_triple(rng, 5);
  const IdentitySides opt = complexity_identity_check(t, t.marginal_z());
  CHECK(opt.lhs == doctest::Approx(exact_decomposition(t).i_xz).epsilon(1e-12));
  CHECK(opt.rhs == doctest::Approx(opt.lhs).epsilon(1e-10));

  for (int i = 0; i < 200; ++i) {
    const DiscreteTriple r = random_triple(rng, 5, 0.2);
    const IdentitySides s = complexity_identity_check(r, random_pmf(rng, r.num_z()));
    CHECK(std::abs(s.lhs - s.rhs) < 1e-10);
  }

  const DiscreteTriple ind = independent_triple(rng);
  const IdentitySides z = complexity_identity_check(ind, Pmf({0.9, 0.1}));
  CHECK(std::abs(z.lhs) < 1e-12);
  CHECK(std::abs(z.rhs) < 1e-12);

  CHECK_THROWS_AS(complexity_identity_check(copy_triple(), Pmf({1.0, 0.0})), ValidationError);
}

TEST_CASE("leakage bounds sandwich the exact leakage") {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const DiscreteTriple t = random_triple(rng, 5, i % 3 == 0 ? 0.25 : 0.0);
    const double isz = exact_isz(t);
    const Pmf qz = random_pmf(rng, t.num_z());

    // tight at the exact posteriors
    CHECK(std::abs(leakage_upper_bound(t, qz, t.posterior_x_given_sz()) - isz) < 1e-10);
    CHECK(std::abs(leakage_lower_bound(t, t.posterior_s_given_z()) - isz) < 1e-10);

    // any other variational choice keeps the order
    const Table qx = perturb(rng, t.posterior_x_given_sz(), 0.5);
    const Table qs = perturb(rng, t.posterior_s_given_z(), 0.5);
    CHECK(leakage_upper_bound(t, qz, qx) >= isz - 1e-12);
    CHECK(leakage_lower_bound(t, qs) <= isz + 1e-12);
  }
}

TEST_CASE("leakage lower bound with uniform predictor") {
  Rng rng(10);
  const DiscreteTriple t = random_triple(rng, 4);
  Table uni(t.num_z(), t.num_s(), 1.0 / static_cast<double>(t.num_s()));
  const double lb = leakage_lower_bound(t, uni);
  CHECK(lb == doctest::Approx(shannon_entropy(t.marginal_s()) - std::log(static_cast<double>(t.num_s()))).epsilon(1e-12));
  CHECK(lb <= exact_isz(t) + 1e-12);

  const DiscreteTriple ind = independent_triple(rng);
  const double ub = leakage_upper_bound(ind, Pmf({0.5, 0.5}), perturb(rng, ind.posterior_x_given_sz(), 0.3));
  CHECK(ub >= 0.0);
}

TEST_CASE("leakage bounds reject invalid tables") {
  const DiscreteTriple t = copy_triple();
  CHECK_THROWS_AS(leakage_lower_bound(t, Table(2, 2, {0.5, 0.4, 0.5, 0.5})), ValidationError);
  CHECK_THROWS_AS(leakage_lower_bound(t, Table(3, 2, 0.5)), ValidationError);
  CHECK_THROWS_AS(leakage_upper_bound(t, Pmf::uniform(2), Table(4, 2, 0.4)), ValidationError);
  // zero mass where P is positive
  CHECK_THROWS_AS(leakage_lower_bound(t, Table(2, 2, {0.0, 1.0, 1.0, 0.0})), ValidationError);
}

TEST_CASE("dv_value examples") {
  const std::vector<double> zeros(5, 0.0);
  CHECK(dv_value(zeros, zeros) == 0.0);
  const std::vector<double> c(7, 3.25);
  CHECK(std::abs(dv_value(c, c)) < 1e-15);
  CHECK_THROWS_AS(dv_value({}, zeros), ValidationError);

  // P = (1/2, 1/4, 1/4), Q = (1/4, 1/4, 1/2); both enumerated exactly by
  // four equally weighted draws.
  const double p[3] = {0.5, 0.25, 0.25}, q[3] = {0.25, 0.25, 0.5};
  const int draws_p[4] = {0, 0, 1, 2}, draws_q[4] = {0, 1, 2, 2};
  double kl = 0.0;
  for (int i = 0; i < 3; ++i) kl += p[i] * std::log(p[i] / q[i]);
  auto dv_for = [&](const double* t) {
    std::vector<double> tj, tm;
    for (int i : draws_p) tj.push_back(t[i]);
    for (int i : draws_q) tm.push_back(t[i]);
    return dv_value(tj, tm);
  };
  const double ratio[3] = {std::log(p[0] / q[0]), std::log(p[1] / q[1]), std::log(p[2] / q[2])};
  CHECK(dv_for(ratio) == doctest::Approx(kl).epsilon(1e-14));

  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    const double t[3] = {3 * rng.normal(), 3 * rng.normal(), 3 * rng.normal()};
    CHECK(dv_for(t) <= kl + 1e-12);
  }
}

TEST_CASE("dv_value is shift invariant and overflow safe") {
  Rng rng(13);
  std::vector<double> tj(50), tm(50);
  for (auto& v : tj) v = rng.normal();
  for (auto& v : tm) v = rng.normal();
  const double base = dv_value(tj, tm);
  for (double shift : {-5.0, 0.5, 17.0, 1000.0}) {
    auto a = tj, b = tm;
    for (auto& v : a) v += shift;
    for (auto& v : b) v += shift;
    CHECK(std::abs(dv_value(a, b) - base) < 1e-9);
  }
}

TEST_CASE("read_triple parses two matrices with comments") {
  std::istringstream in("# joint\n0.25 0.25\n0.25 0.25\n\n# channel\n1 0\n0.5 0.5\n");
  const DiscreteTriple t = read_triple(in);
  CHECK(t.num_s() == 2);
  CHECK(t.num_x() == 2);
  CHECK(t.num_z() == 2);
  CHECK(t.channel_zx()(1, 0) == 0.5);

  std::istringstream bad("0.5 0.4\n\n1 0\n0 1\n");
  CHECK_THROWS_AS(read_triple(bad), ValidationError);
  std::istringstream ragged("0.5 0.5\n\n1 0\n1\n");
  CHECK_THROWS(read_triple(ragged));
}

TEST_CASE("to_bits") { CHECK(to_bits(std::log(2.0)) == doctest::Approx(1.0).epsilon(1e-15)); }
