// Uniform binary source with Hamming distortion: solver points against 1 - H_b(D).

#include <cmath>
#include <cstdio>

#include "semrd/semrd.hpp"

int main() {
  using namespace semrd;
  SemanticSource src;
  src.px = Distribution::uniform(2);
  src.py_given_x = ConditionalDistribution::identity(2);
  src.d_rd = hamming_matrix(2).costs();

  std::printf("%8s %10s %10s %10s\n", "lambda", "D", "R bits", "1-Hb(D)");
  for (double lambda : {0.1, 0.2, 0.3, 0.5, 0.8, 1.2, 2.0}) {
    SolverConfig cfg;
    cfg.lambda = lambda;
    const SolverResult r = solve(src, hamming_matrix(2), cfg);
    const double d = r.pixel_distortion;
    const double hb = d > 0.0 ? -(d * std::log2(d) + (1 - d) * std::log2(1 - d)) : 0.0;
    std::printf("%8.3f %10.6f %10.6f %10.6f\n", lambda, d, to_bits(r.rate_nats), std::max(0.0, 1.0 - hb));
  }
  return 0;
}
