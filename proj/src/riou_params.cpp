#include "riou/riou_params.hpp"

#include "riou/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace riou {

RiouParams solve_params(double beta)
{
    if (!std::isfinite(beta) || beta <= kBetaLower || beta >= kBetaUpper) {
        std::ostringstream msg;
        msg << "beta = " << beta << " is outside the open interval (0.5, 1)";
        if (beta == kBetaUpper) {
            msg << "; at beta = 1 the gradient pole sits at IoU = 1 and the constraint "
                   "system is singular";
        }
        throw BetaOutOfDomain(msg.str());
    }

    // Eliminating a, b, k from the three gradient constraints leaves
    // (c - beta)^2 = c (c - 1), i.e. c = beta^2 / (2 beta - 1). The
    // differences c - 1 and c - beta are formed directly to avoid cancellation
    // as beta approaches 1.
    const double denom = 2.0 * beta - 1.0;
    const double c = beta * beta / denom;
    const double c_minus_1 = (1.0 - beta) * (1.0 - beta) / denom;

    // With k = a c (c - 1) and b = k / c, the L(1) = 0 condition is linear in a.
    const double cc1 = c * c_minus_1;
    const double scale = 0.5 + c_minus_1 + cc1 * std::log(c_minus_1 / c);

    RiouParams p;
    p.beta = beta;
    p.c = c;
    p.a = 1.0 / scale;
    p.k = p.a * cc1;
    p.b = p.k / c;
    p.t = -p.k * std::log(c);

    if (!is_valid(p)) {
        std::ostringstream msg;
        msg << "closed-form solution for beta = " << beta
            << " failed its residual check (max |residual| = " << max_abs_residual(p) << ")";
        throw Error(msg.str());
    }
    return p;
}

std::array<double, 5> residuals(const RiouParams& p)
{
    return {
        p.b - p.k / p.c,
        p.a + p.b + p.k / (1.0 - p.c),
        p.c - std::sqrt(p.k / p.a) - p.beta,
        p.k * std::log(std::abs(p.c)) + p.t,
        p.a / 2.0 + p.b + p.k * std::log(std::abs(1.0 - p.c)) + p.t - 1.0,
    };
}

double max_abs_residual(const RiouParams& p)
{
    double worst = 0.0;
    for (double r : residuals(p)) {
        if (!std::isfinite(r)) {
            return std::numeric_limits<double>::infinity();
        }
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

bool is_valid(const RiouParams& p)
{
    if (!(p.a > 0.0 && p.b > 0.0 && p.k > 0.0 && p.c > 1.0)) {
        return false;
    }
    return max_abs_residual(p) < kResidualTolerance;
}

}  // namespace riou
