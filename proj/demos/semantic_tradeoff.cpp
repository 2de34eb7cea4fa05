// Beta sweep on the reference source: rate, MSE, label information and
// task-B accuracy of the argmax quantizer at a fixed lambda.

#include <cstdio>

#include "semrd/semrd.hpp"

int main() {
  using namespace semrd;
  const SemanticSource src = generate_semantic_source(4, 2, GeometryConfig{}, 7);
  const DistortionMatrix pixel = pixel_distortion(src);

  std::printf("%6s %9s %9s %9s %9s %9s\n", "beta", "rate", "mse", "I(Xh;Y)", "acc_A", "acc_B");
  for (double beta : {0.0, 0.1, 0.5, 1.0, 2.0, 10.0, 50.0}) {
    SolverConfig cfg;
    cfg.lambda = 1.0;
    cfg.beta = beta;
    const SolverResult r = solve(src, pixel, cfg);
    const RDPoint p = to_rd_point(src, r, cfg.lambda, beta);
    const auto t = transfer_eval(src, {{cfg.lambda, beta, r.mapping}});
    std::printf("%6.2f %9.4f %9.4f %9.4f %9.3f %9.3f\n", beta, p.rate_bits, p.pixel_distortion, p.task_mi_bits, t[0].task_a_accuracy,
                t[0].task_b_accuracy);
  }
  return 0;
}
