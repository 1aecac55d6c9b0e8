#include "gazelab/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "gazelab/errors.hpp"

namespace gazelab {

double grad_check(const ParamSet& at,
                  const std::function<double(const ParamSet&)>& loss_fn,
                  const std::function<ParamSet(const ParamSet&)>& grad_fn,
                  double eps) {
    if (!(eps > 0.0 && eps <= 1e-2))
        throw std::invalid_argument("grad_check: eps must be in (0, 1e-2]");
    const double base = loss_fn(at);
    if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss");

    const ParamSet analytic = grad_fn(at);
    if (!analytic.same_structure(at))
        throw std::invalid_argument("grad_check: analytic gradient structure mismatch");
    double worst = 0.0;
    ParamSet work = at;
    for (std::size_t i = 0; i < work.branches.size(); ++i)
        for (std::size_t j = 0; j < work.branches[i].layers.size(); ++j)
            for (std::size_t k = 0; k < work.branches[i].layers[j].params.size(); ++k) {
                Tensor& t = work.branches[i].layers[j].params[k];
                const Tensor& g = analytic.branches[i].layers[j].params[k];
                for (std::size_t e = 0; e < t.numel(); ++e) {
                    const double orig = t.v[e];
                    t.v[e] = orig + eps;
                    const double up = loss_fn(work);
                    t.v[e] = orig - eps;
                    const double dn = loss_fn(work);
                    t.v[e] = orig;
                    if (!std::isfinite(up) || !std::isfinite(dn))
                        throw NumericError("grad_check: non-finite loss under perturbation");
                    const double numeric = (up - dn) / (2.0 * eps);
                    const double denom = std::max(1e-8, std::fabs(g.v[e]) + std::fabs(numeric));
                    worst = std::max(worst, std::fabs(g.v[e] - numeric) / denom);
                }
            }
    return worst;
}

}  // namespace gazelab
