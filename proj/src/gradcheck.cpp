#include "riou/gradcheck.hpp"

#include "riou/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace riou {

namespace {

constexpr double kGradFloor = 1e-8;
constexpr double kEdgeMargin = 1e-2;

bool edges_separated(double p0, double p1, double g0, double g1)
{
    for (double p : {p0, p1}) {
        for (double g : {g0, g1}) {
            if (std::abs(p - g) < kEdgeMargin) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

double gradient_relative_error(const BoxGradient& analytic, const BoxGradient& numeric)
{
    double diff = 0.0;
    double scale = kGradFloor;
    for (std::size_t i = 0; i < 4; ++i) {
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
        scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    }
    if (!std::isfinite(diff)) {
        return std::numeric_limits<double>::infinity();
    }
    return diff / scale;
}

std::vector<BoxPair> random_differentiable_pairs(std::size_t count, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<BoxPair> out;
    out.reserve(count);
    while (out.size() < count) {
        const double gw = rng.uniform(2.0, 40.0);
        const double gh = rng.uniform(2.0, 40.0);
        const Box2D gt = Box2D::from_center(rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0),
                                            gw, gh);
        const Point2D gc = center(gt);
        const double pw = gw * rng.uniform(0.3, 2.0);
        const double ph = gh * rng.uniform(0.3, 2.0);
        const double px = gc.x + rng.uniform(-0.6, 0.6) * (gw + pw) / 2.0;
        const double py = gc.y + rng.uniform(-0.6, 0.6) * (gh + ph) / 2.0;
        const Box2D pred = Box2D::from_center(px, py, pw, ph);

        if (intersection_area(pred, gt) <= 0.0) {
            continue;
        }
        if (!edges_separated(pred.x_min(), pred.x_max(), gt.x_min(), gt.x_max()) ||
            !edges_separated(pred.y_min(), pred.y_max(), gt.y_min(), gt.y_max())) {
            continue;
        }
        out.push_back({pred, gt});
    }
    return out;
}

GradcheckResult check_gradients(const LossKind& kind, std::span<const BoxPair> pairs, double h,
                                const GradientFn& analytic)
{
    GradcheckResult result;
    result.type = kind.type();
    for (const BoxPair& pair : pairs) {
        const BoxGradient a = analytic(pair.pred, pair.gt, kind);
        const BoxGradient n = finite_diff_gradient(pair.pred, pair.gt, kind, h);
        const double err = gradient_relative_error(a, n);
        if (result.trials == 0 || err > result.max_rel_error || std::isnan(err)) {
            result.max_rel_error = std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
            result.worst = pair;
            result.worst_analytic = a;
            result.worst_numeric = n;
        }
        ++result.trials;
    }
    return result;
}

}  // namespace riou
