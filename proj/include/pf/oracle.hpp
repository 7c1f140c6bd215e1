#pragma once
// Randomized checks of the exact discrete identities and bounds. Each field
// is the largest violation seen over the trials.

#include <cstdint>

namespace pf::info {

struct OracleOptions {
  int trials = 1000;           // random triples
  int priors_per_triple = 5;   // random q_z per triple for the complexity identity
  std::size_t max_card = 5;    // |S|, |X|, |Z| drawn from [2, max_card]
  double zero_prob = 0.2;      // applied to every other triple
  std::uint64_t seed = 0;
};

struct OracleReport {
  int trials = 0;
  double decomposition = 0.0;  // |I(S;Z) - (I(X;Z) - H(X|S) + H(X|S,Z))|
  double complexity = 0.0;     // |I(X;Z) - (KL(P_Z|X || q_z | P_X) - KL(P_Z || q_z))|
  double lower_bound = 0.0;    // max(0, lower - I(S;Z)) for random classifiers
  double upper_bound = 0.0;    // max(0, I(S;Z) - upper) for random decoders
  double lower_gap = 0.0;      // |lower - I(S;Z)| at the exact posterior
  double upper_gap = 0.0;      // |upper - I(S;Z)| at the exact posterior
  double noise_entropy = 0.0;  // |h(N(0, I/(2 pi e)))| for d in {1, 8, 128}

  double worst() const;
};

OracleReport run_oracles(const OracleOptions& opt);

}  // namespace pf::info
