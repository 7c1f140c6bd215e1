#pragma once
// Fixtures shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <vector>

#include "pf/evaluation.hpp"

namespace pf::test {

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

// Two 28x28 images with pixel (i, j) of image k equal to (7k + 3i + j) mod 256.
inline std::vector<std::uint8_t> idx_image_fixture() {
  std::vector<std::uint8_t> b{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 28, 0, 0, 0, 28};
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 28; ++i)
      for (int j = 0; j < 28; ++j) b.push_back(static_cast<std::uint8_t>((7 * k + 3 * i + j) % 256));
  return b;
}

// Four identities, two samples each, small integer coordinates.
struct VerificationFixture {
  Matrix embeddings;
  std::vector<int> identities;
};

inline VerificationFixture verification_fixture() {
  return {Matrix(8, 3, std::vector<float>{1, 0, 0, 2, 1, 0,    //
                                          0, 1, 0, 0, 2, 1,    //
                                          0, 0, 1, 1, 0, 2,    //
                                          1, 1, 1, 1, 1, 0}),  //
          {0, 0, 1, 1, 2, 2, 3, 3}};
}

struct PairScores {
  std::vector<double> genuine, imposter;
};

// Every unordered pair, scored by cosine similarity written out longhand.
inline PairScores brute_force_pairs(const Matrix& e, const std::vector<int>& ids) {
  PairScores out;
  for (std::size_t i = 0; i < e.rows(); ++i)
    for (std::size_t j = i + 1; j < e.rows(); ++j) {
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t c = 0; c < e.cols(); ++c) {
        ab += double{e(i, c)} * e(j, c);
        aa += double{e(i, c)} * e(i, c);
        bb += double{e(j, c)} * e(j, c);
      }
      (ids[i] == ids[j] ? out.genuine : out.imposter).push_back(ab / std::sqrt(aa * bb));
    }
  return out;
}

struct BruteRates {
  double fmr, tmr, acc;
};

inline BruteRates brute_force_rates(const PairScores& p, double t) {
  double ta = 0, fa = 0;
  for (double s : p.genuine) ta += s >= t;
  for (double s : p.imposter) fa += s >= t;
  const double ng = static_cast<double>(p.genuine.size()), ni = static_cast<double>(p.imposter.size());
  return {fa / ni, ta / ng, (ta + ni - fa) / (ng + ni)};
}

// Lowest threshold among all observed scores (plus one above the maximum)
// whose FMR does not exceed target, found by scanning every candidate.
inline double brute_force_threshold(const PairScores& p, double target) {
  std::vector<double> cand = p.genuine;
  cand.insert(cand.end(), p.imposter.begin(), p.imposter.end());
  const double top = *std::max_element(cand.begin(), cand.end());
  cand.push_back(std::nextafter(top, INFINITY));
  double best = INFINITY;
  for (double t : cand)
    if (brute_force_rates(p, t).fmr <= target) best = std::min(best, t);
  return best;
}

}  // namespace pf::test
