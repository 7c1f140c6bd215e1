#include "pf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pf/errors.hpp"
#include "pf/infotheory.hpp"
#include "pf/rng.hpp"

namespace pf::info {

double OracleReport::worst() const {
  return std::max({decomposition, complexity, lower_bound, upper_bound, lower_gap, upper_gap, noise_entropy});
}

OracleReport run_oracles(const OracleOptions& opt) {
  if (opt.trials < 1) throw ValidationError("oracle: trials must be >= 1");
  if (opt.priors_per_triple < 1) throw ValidationError("oracle: priors_per_triple must be >= 1");
  if (opt.max_card < 2) throw ValidationError("oracle: max_card must be >= 2");
  Rng rng(derive_seed(opt.seed, "oracle"));
  OracleReport rep;
  rep.trials = opt.trials;
  for (int i = 0; i < opt.trials; ++i) {
    const DiscreteTriple t = random_triple(rng, opt.max_card, i % 2 ? opt.zero_prob : 0.0);
    const InfoDecomposition d = exact_decomposition(t);
    rep.decomposition = std::max(rep.decomposition, std::abs(d.identity_residual()));

    for (int k = 0; k < opt.priors_per_triple; ++k) {
      const IdentitySides s = complexity_identity_check(t, random_pmf(rng, t.num_z()));
      rep.complexity = std::max(rep.complexity, std::abs(s.lhs - s.rhs));
    }

    const Pmf qz = random_pmf(rng, t.num_z());
    const Table qs = random_conditional(rng, t.num_z(), t.num_s());
    const Table qx = random_conditional(rng, t.num_s() * t.num_z(), t.num_x());
    rep.lower_bound = std::max(rep.lower_bound, leakage_lower_bound(t, qs) - d.i_sz);
    rep.upper_bound = std::max(rep.upper_bound, d.i_sz - leakage_upper_bound(t, qz, qx));
    rep.lower_gap = std::max(rep.lower_gap, std::abs(leakage_lower_bound(t, t.posterior_s_given_z()) - d.i_sz));
    rep.upper_gap =
        std::max(rep.upper_gap, std::abs(leakage_upper_bound(t, qz, t.posterior_x_given_sz()) - d.i_sz));
  }
  const double v = 1.0 / (2.0 * std::numbers::pi * std::numbers::e);
  for (int dim : {1, 8, 128}) rep.noise_entropy = std::max(rep.noise_entropy, std::abs(gaussian_differential_entropy(v, dim)));
  return rep;
}

}  // namespace pf::info
