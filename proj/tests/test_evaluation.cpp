#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "pf/evaluation.hpp"

using namespace pf;
using namespace pf::eval;

namespace {

Matrix one_hot_matrix(const std::vector<int>& s, std::size_t k) {
  Matrix m(s.size(), k);
  for (std::size_t i = 0; i < s.size(); ++i) m(i, static_cast<std::size_t>(s[i])) = 1.0f;
  return m;
}

std::vector<int> random_labels(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> s(n);
  for (int& v : s) v = static_cast<int>(rng.index(k));
  return s;
}

Matrix noise(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, d);
  rng.fill_normal(m.flat(), 1.0);
  return m;
}

}  // namespace

TEST_CASE("label entropy examples") {
  CHECK(label_entropy(std::vector<int>{0, 1, 0, 1}) == doctest::Approx(1.0));
  CHECK(label_entropy(std::vector<int>{0, 1, 2, 3, 4, 5}) == doctest::Approx(2.585).epsilon(1e-3));
  CHECK(label_entropy(std::vector<int>{4, 4, 4}) == 0.0);
  CHECK(label_entropy(std::vector<int>{0, 1}, info::LogBase::e) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(label_entropy(std::vector<int>{}), ValidationError);

  Rng rng(31);
  const info::Pmf p({0.5, 1.0 / 6, 1.0 / 3});
  std::vector<int> s(100000);
  for (int& v : s) {
    const double u = rng.uniform();
    v = u < p[0] ? 0 : (u < p[0] + p[1] ? 1 : 2);
  }
  // -(1/2 log 1/2 + 1/6 log 1/6 + 1/3 log 1/3) = 1.45915 bits
  CHECK(std::abs(label_entropy(s) - 1.459) <= 0.01);
}

TEST_CASE("adversary accuracy examples") {
  const auto s_tr = random_labels(600, 3, 1), s_te = random_labels(400, 3, 2);
  CHECK(adversary_accuracy(one_hot_matrix(s_tr, 3), s_tr, one_hot_matrix(s_te, 3), s_te).accuracy == 1.0);

  const auto r = adversary_accuracy(noise(600, 4, 3), s_tr, noise(400, 4, 4), s_te, 7);
  CHECK(std::abs(r.accuracy - 1.0 / 3) <= 0.05);
  CHECK_FALSE(r.warning.has_value());

  // Binary signal flipped with probability 0.2: the Bayes rate is 0.8.
  auto flipped = [](const std::vector<int>& s, std::uint64_t seed) {
    Rng rng(seed);
    Matrix z(s.size(), 1);
    for (std::size_t i = 0; i < s.size(); ++i) z(i, 0) = static_cast<float>(rng.bernoulli(0.2) ? 1 - s[i] : s[i]);
    return z;
  };
  const auto b_tr = random_labels(2000, 2, 5), b_te = random_labels(2000, 2, 6);
  CHECK(std::abs(adversary_accuracy(flipped(b_tr, 7), b_tr, flipped(b_te, 8), b_te).accuracy - 0.8) <= 0.05);
}

TEST_CASE("adversary edge cases") {
  const std::vector<int> one(10, 2), te{2, 2, 1, 0};
  const auto r = adversary_accuracy(noise(10, 2, 1), one, noise(4, 2, 2), te);
  CHECK(r.accuracy == 0.5);
  CHECK(r.warning.has_value());

  // Shuffled labels carry nothing.
  const auto s = random_labels(1000, 4, 9);
  const auto shuffled = random_labels(1000, 4, 10);
  const Matrix z = one_hot_matrix(s, 4);
  std::vector<std::size_t> tr(600), tst(400);
  for (std::size_t i = 0; i < 600; ++i) tr[i] = i;
  for (std::size_t i = 0; i < 400; ++i) tst[i] = 600 + i;
  const std::vector<int> sh_tr(shuffled.begin(), shuffled.begin() + 600), sh_te(shuffled.begin() + 600, shuffled.end());
  CHECK(std::abs(adversary_accuracy(gather_rows(z, tr), sh_tr, gather_rows(z, tst), sh_te).accuracy - 0.25) <= 0.05);

  CHECK_THROWS_AS(adversary_accuracy(noise(3, 2, 1), std::vector<int>{0, 1}, noise(2, 2, 1), std::vector<int>{0, 1}),
                  ValidationError);
  CHECK_THROWS_AS(adversary_accuracy(noise(2, 2, 1), std::vector<int>{0, 1}, noise(2, 3, 1), std::vector<int>{0, 1}),
                  ValidationError);
}

TEST_CASE("linear classifier is deterministic") {
  const auto s = random_labels(300, 3, 11);
  const Matrix z = noise(300, 5, 12);
  LinearClassifier a, b;
  a.fit(z, s, 3, {});
  b.fit(z, s, 3, {});
  CHECK(a.predict_proba(z) == b.predict_proba(z));
  for (const auto& row : a.predict_proba(z)) {
    double sum = 0;
    for (double p : row) sum += p;
    CHECK(sum == doctest::Approx(1.0));
  }
}

TEST_CASE("leakage estimates") {
  const auto s = random_labels(4000, 2, 13);
  const Matrix indep = noise(4000, 3, 14);
  const Matrix copy = one_hot_matrix(s, 2);
  LeakageOptions opt;
  opt.mine_iterations = 800;
  for (auto method : {LeakageMethod::plugin_classifier, LeakageMethod::mine}) {
    const double h = label_entropy(s);
    const double lo = leakage_mi(indep, s, method, opt);
    const double hi = leakage_mi(copy, s, method, opt);
    CHECK(lo <= 0.05);
    CHECK(lo >= 0.0);
    CHECK(hi >= 0.9);
    CHECK(hi <= h);
  }
  CHECK(parse_leakage_method("mine") == LeakageMethod::mine);
  CHECK(parse_leakage_method("plugin_classifier") == LeakageMethod::plugin_classifier);
  CHECK_THROWS_AS(parse_leakage_method("svm"), ValidationError);
  CHECK_THROWS_AS(leakage_mi(noise(3, 1, 1), std::vector<int>{0, 1, 0}, LeakageMethod::plugin_classifier),
                  ValidationError);
}

TEST_CASE("verification on the four-identity fixture matches brute force") {
  const auto fx = test::verification_fixture();
  const auto pairs = test::brute_force_pairs(fx.embeddings, fx.identities);
  REQUIRE(pairs.genuine.size() == 4);
  REQUIRE(pairs.imposter.size() == 24);

  std::vector<double> thresholds = pairs.genuine;
  thresholds.insert(thresholds.end(), pairs.imposter.begin(), pairs.imposter.end());
  thresholds.push_back(-1.0);
  thresholds.push_back(1.5);
  const auto rep = verification_metrics(fx.embeddings, fx.identities, thresholds);
  REQUIRE(rep.per_threshold.size() == thresholds.size());
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const auto expect = test::brute_force_rates(pairs, thresholds[i]);
    const auto& got = rep.per_threshold[i];
    CHECK(got.fmr == expect.fmr);
    CHECK(got.tmr == expect.tmr);
    CHECK(got.acc == expect.acc);
    CHECK(got.n_genuine == 4);
    CHECK(got.n_imposter == 24);
  }
  CHECK(rep.at_target.threshold == test::brute_force_threshold(pairs, 0.1));
  CHECK(rep.at_target.fmr <= 0.1);
  for (double target : {0.0, 0.05, 0.25, 0.5, 1.0})
    CHECK(threshold_for_fmr(pairs.genuine, pairs.imposter, target).threshold ==
          test::brute_force_threshold(pairs, target));
}

TEST_CASE("verification formulas and monotonicity") {
  // 5 false accepts out of 100 imposter attempts.
  std::vector<double> imposter(100, 0.1), genuine{0.9, 0.95, 0.2};
  for (int i = 0; i < 5; ++i) imposter[static_cast<std::size_t>(i)] = 0.8;
  const auto r = verification_at(genuine, imposter, 0.5);
  CHECK(r.fmr == 0.05);
  CHECK(r.tmr == doctest::Approx(2.0 / 3));
  CHECK(r.acc == doctest::Approx((2.0 + 95.0) / 103.0));

  // Two well-separated clusters.
  const Matrix e(4, 2, std::vector<float>{1, 0.01f, 1, -0.01f, -0.01f, 1, 0.01f, 1});
  const std::vector<int> ids{0, 0, 1, 1};
  const std::vector<double> ts{0.5};
  const auto sep = verification_metrics(e, ids, ts);
  CHECK(sep.per_threshold[0].tmr == 1.0);
  CHECK(sep.per_threshold[0].fmr == 0.0);

  Rng rng(3);
  const Matrix emb = noise(40, 4, 15);
  std::vector<int> id(40);
  for (int& v : id) v = static_cast<int>(rng.index(5));
  std::vector<double> grid;
  for (int i = -10; i <= 10; ++i) grid.push_back(i / 10.0);
  const auto rep = verification_metrics(emb, id, grid);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    CHECK(rep.per_threshold[i].fmr <= rep.per_threshold[i - 1].fmr);
    CHECK(rep.per_threshold[i].tmr <= rep.per_threshold[i - 1].tmr);
  }

  const std::vector<int> same{1, 1, 1, 1};
  CHECK_THROWS_AS(verification_metrics(e, same, ts), ValidationError);
  const std::vector<int> distinct{0, 1, 2, 3};
  CHECK_THROWS_AS(verification_metrics(e, distinct, ts), ValidationError);
  CHECK(cosine_similarity(std::vector<float>{1, 0}, std::vector<float>{0, 2}) == 0.0);
  CHECK(cosine_similarity(std::vector<float>{3, 4}, std::vector<float>{6, 8}) == doctest::Approx(1.0));
}

TEST_CASE("pair subsampling caps each pair type") {
  const Matrix emb = noise(60, 3, 16);
  std::vector<int> id(60);
  for (std::size_t i = 0; i < 60; ++i) id[i] = static_cast<int>(i % 3);
  VerificationOptions opt;
  opt.max_pairs = 50;
  const std::vector<double> ts{0.0};
  const auto a = verification_metrics(emb, id, ts, opt);
  CHECK(a.per_threshold[0].n_genuine == 50);
  CHECK(a.per_threshold[0].n_imposter == 50);
  CHECK(verification_metrics(emb, id, ts, opt).per_threshold[0].fmr == a.per_threshold[0].fmr);
}

TEST_CASE("sweep csv") {
  data::ColoredDigitConfig dc;
  dc.n = 240;
  dc.seed = 4;
  const auto ds = data::generate_colored_digits(dc);
  training::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 32;
  cfg.hidden = {16};
  cfg.prior_mode = models::PriorMode::fixed_standard;
  SweepOptions so;
  so.eval.with_mine = false;

  const std::vector<double> one{0.5};
  const auto single = tradeoff_sweep(cfg, one, ds, so);
  REQUIRE(single.size() == 1);
  CHECK(single[0].alpha == 0.5);

  const std::vector<double> two{0.1, 10.0};
  std::ostringstream a, b;
  const auto pts = tradeoff_sweep(cfg, two, ds, so);
  write_tradeoff_csv(pts, a);
  write_tradeoff_csv(tradeoff_sweep(cfg, two, ds, so), b);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind(std::string(kTradeoffHeader) + "\n", 0) == 0);
  for (const auto& p : pts) {
    CHECK(p.adversary_acc >= 0.0);
    CHECK(p.adversary_acc <= 1.0);
    CHECK(p.leakage_mi_bits >= 0.0);
    CHECK(p.leakage_mi_bits <= std::log2(3.0) + 0.05);
  }
  const std::vector<double> neg{-1.0};
  CHECK_THROWS_AS(tradeoff_sweep(cfg, neg, ds, so), ValidationError);
}
