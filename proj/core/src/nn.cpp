#include "emostress/nn.hpp"

#include <algorithm>
#include <cmath>

namespace emostress::nn {

double grad_check(const std::function<double(std::span<const double>)>& f, std::span<const double> point,
                  std::span<const double> analytic, double h) {
  if (point.size() != analytic.size()) throw Error(Errc::ShapeMismatch, "grad_check: gradient length mismatch");
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace emostress::nn
