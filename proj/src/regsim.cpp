#include "riou/regsim.hpp"

#include "riou/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>

namespace riou::sim {

namespace {

constexpr double kBisectionTolerance = 1e-9;
constexpr int kBisectionMaxIter = 200;

// Ground truths have unit area, aspect ratio log-uniform on [1/2, 2] and
// centers uniform on [-4, 4]^2. IoU is scale invariant; fixing the area keeps
// the center and size steps comparable across samples.
Box2D draw_gt(Rng& rng)
{
    const double log_aspect = rng.uniform(-std::log(2.0), std::log(2.0));
    const double w = std::exp(0.5 * log_aspect);
    const double h = 1.0 / w;
    return Box2D::from_center(rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0), w, h);
}

Box2D scaled_about_center(const Box2D& b, double factor)
{
    const Point2D c = center(b);
    return Box2D::from_center(c.x, c.y, b.width() * factor, b.height() * factor);
}

}  // namespace

std::string_view to_string(PerturbMode mode) noexcept
{
    return mode == PerturbMode::Shift ? "shift" : "scale";
}

std::optional<PerturbMode> parse_perturb_mode(std::string_view text) noexcept
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "shift") {
        return PerturbMode::Shift;
    }
    if (lower == "scale") {
        return PerturbMode::Scale;
    }
    return std::nullopt;
}

std::vector<IouBucket> default_profile()
{
    return {{0.1, 0.4}, {0.2, 0.25}, {0.3, 0.15}, {0.4, 0.1}, {0.5, 0.05}, {0.6, 0.05}};
}

void validate(const SimConfig& cfg)
{
    if (cfg.sample_count == 0) {
        throw ConfigError("sample_count must be positive");
    }
    if (cfg.steps < 0) {
        throw ConfigError("steps must be non-negative");
    }
    if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
        throw ConfigError("learning_rate must be a positive finite number");
    }
    if (cfg.iou_distribution.empty()) {
        throw ConfigError("iou_distribution must list at least one bucket");
    }
    double total = 0.0;
    for (const IouBucket& b : cfg.iou_distribution) {
        if (!(b.lower >= 0.0 && b.lower < 1.0)) {
            std::ostringstream msg;
            msg << "iou_distribution bucket lower bound " << b.lower << " outside [0, 1)";
            throw ConfigError(msg.str());
        }
        if (!(b.weight >= 0.0) || !std::isfinite(b.weight)) {
            throw ConfigError("iou_distribution weights must be non-negative and finite");
        }
        total += b.weight;
    }
    if (!(total > 0.0)) {
        throw ConfigError("iou_distribution weights must have a positive sum");
    }
    if (cfg.loss_kind == LossType::Riou) {
        try {
            (void)solve_params(cfg.beta);
        } catch (const BetaOutOfDomain& e) {
            throw ConfigError(e.what());
        }
    }
}

LossKind resolve_loss(const SimConfig& cfg)
{
    switch (cfg.loss_kind) {
    case LossType::Iou:
        return LossKind::iou();
    case LossType::Giou:
        return LossKind::giou();
    case LossType::Diou:
        return LossKind::diou();
    case LossType::Riou:
        return LossKind::riou_beta(cfg.beta);
    }
    throw ConfigError("unknown loss kind");
}

SamplePair make_pair(const Box2D& gt, double target_iou, PerturbMode mode, Rng& rng)
{
    if (target_iou == 0.0) {
        throw TargetUnreachable("target IoU 0 needs an explicit disjoint construction");
    }
    if (!(target_iou > 0.0 && target_iou <= 1.0)) {
        throw DomainError("target IoU must lie in (0, 1]");
    }
    if (gt.degenerate()) {
        throw DomainError("ground-truth box must have positive area");
    }
    const double t = target_iou;

    if (mode == PerturbMode::Shift) {
        const bool along_x = rng.coin();
        const double sign = rng.coin() ? 1.0 : -1.0;
        const double extent = along_x ? gt.width() : gt.height();
        const double delta = sign * extent * (1.0 - t) / (1.0 + t);
        const Box2D anchor =
            along_x ? Box2D(gt.x_min() + delta, gt.y_min(), gt.x_max() + delta, gt.y_max())
                    : Box2D(gt.x_min(), gt.y_min() + delta, gt.x_max(), gt.y_max() + delta);
        return {anchor, gt, iou(anchor, gt)};
    }

    const bool grow = rng.coin();
    if (t == 1.0) {
        return {gt, gt, 1.0};
    }
    // IoU is s^2 when shrinking and 1/s^2 when growing; bisect on s so the
    // target is hit through the geometry rather than the closed form.
    double lo = grow ? 1.0 : 0.0;
    double hi = grow ? 2.0 / std::sqrt(t) : 1.0;
    Box2D anchor = gt;
    double value = 1.0;
    for (int it = 0; it < kBisectionMaxIter; ++it) {
        const double mid = 0.5 * (lo + hi);
        anchor = scaled_about_center(gt, mid);
        value = iou(anchor, gt);
        if (std::abs(value - t) < kBisectionTolerance) {
            break;
        }
        // IoU rises with s when shrinking and falls with s when growing.
        if ((value < t) != grow) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (!(std::abs(value - t) < kBisectionTolerance)) {
        throw Error("scale bisection failed to reach the target IoU");
    }
    return {anchor, gt, value};
}

std::vector<SamplePair> sample_population(const SimConfig& cfg)
{
    validate(cfg);
    Rng rng(cfg.seed);

    std::vector<double> cumulative;
    cumulative.reserve(cfg.iou_distribution.size());
    double total = 0.0;
    for (const IouBucket& b : cfg.iou_distribution) {
        total += b.weight;
        cumulative.push_back(total);
    }

    std::vector<SamplePair> pop;
    pop.reserve(cfg.sample_count);
    for (std::size_t i = 0; i < cfg.sample_count; ++i) {
        const double u = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        if (it == cumulative.end()) {
            --it;
        }
        const IouBucket& bucket = cfg.iou_distribution[std::distance(cumulative.begin(), it)];
        const double upper = std::min(bucket.lower + kBucketWidth, 1.0);
        double target = 0.0;
        while (target <= 0.0) {
            target = rng.uniform(bucket.lower, upper);
        }
        const Box2D gt = draw_gt(rng);
        pop.push_back(make_pair(gt, target, cfg.perturb_mode, rng));
    }
    return pop;
}

std::size_t bin_of(double iou) noexcept
{
    if (!(iou > 0.0)) {
        return 0;
    }
    const auto bin = static_cast<std::size_t>(iou * static_cast<double>(kHistogramBins));
    return std::min(bin, kHistogramBins - 1);
}

Histogram histogram(std::span<const double> ious)
{
    Histogram h{};
    for (double v : ious) {
        ++h[bin_of(v)];
    }
    return h;
}

BucketShares gradient_share(std::span<const SamplePair> pop, const LossKind& kind)
{
    if (pop.empty()) {
        throw DomainError("gradient share of an empty population");
    }
    BucketShares mass{};
    for (const SamplePair& s : pop) {
        mass[bin_of(s.initial_iou)] += std::abs(loss_grad_mag(s.initial_iou, kind));
    }
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    BucketShares shares{};
    if (total > 0.0) {
        for (std::size_t i = 0; i < kHistogramBins; ++i) {
            shares[i] = mass[i] / total;
        }
    }
    return shares;
}

DescentResult descend(const SamplePair& pair, const LossKind& kind, int steps,
                      double learning_rate, bool record_trace)
{
    const Point2D c0 = center(pair.anchor);
    double cx = c0.x;
    double cy = c0.y;
    const double log_min = std::log(kMinExtent);
    double log_w = std::log(std::max(pair.anchor.width(), kMinExtent));
    double log_h = std::log(std::max(pair.anchor.height(), kMinExtent));

    const auto current = [&] {
        return Box2D::from_center(cx, cy, std::exp(log_w), std::exp(log_h));
    };

    DescentResult result;
    if (record_trace) {
        result.loss_trace.reserve(static_cast<std::size_t>(steps) + 1);
        result.loss_trace.push_back(localization_loss(current(), pair.gt, kind));
    }
    for (int s = 0; s < steps; ++s) {
        const Box2D box = current();
        const BoxGradient g = loss_gradient_boxes(box, pair.gt, kind);
        // x_min = cx - w/2, x_max = cx + w/2, w = exp(log_w)
        const double g_cx = g.x_min() + g.x_max();
        const double g_cy = g.y_min() + g.y_max();
        const double g_lw = 0.5 * box.width() * (g.x_max() - g.x_min());
        const double g_lh = 0.5 * box.height() * (g.y_max() - g.y_min());
        cx -= learning_rate * g_cx;
        cy -= learning_rate * g_cy;
        log_w = std::max(log_w - learning_rate * g_lw, log_min);
        log_h = std::max(log_h - learning_rate * g_lh, log_min);
        if (record_trace) {
            result.loss_trace.push_back(localization_loss(current(), pair.gt, kind));
        }
    }
    result.final_anchor = current();
    result.final_iou = iou(result.final_anchor, pair.gt);
    return result;
}

SimReport run_descent(const SimConfig& cfg, const RunOptions& options)
{
    validate(cfg);
    const std::uint64_t work =
        static_cast<std::uint64_t>(cfg.steps) * static_cast<std::uint64_t>(cfg.sample_count);
    if (work > options.budget) {
        std::ostringstream msg;
        msg << "steps * sample_count = " << work << " exceeds the budget of "
            << options.budget;
        throw BudgetExceeded(msg.str());
    }

    const LossKind kind = resolve_loss(cfg);
    const std::vector<SamplePair> pop = sample_population(cfg);
    const std::size_t n = pop.size();

    std::vector<double> final_iou(n, 0.0);
    unsigned workers = options.workers != 0 ? options.workers : std::thread::hardware_concurrency();
    workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(std::min<std::size_t>(n, 256)));

    const auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            final_iou[i] = descend(pop[i], kind, cfg.steps, cfg.learning_rate).final_iou;
        }
    };
    if (workers == 1) {
        run_range(0, n);
    } else {
        std::vector<std::jthread> pool;
        std::vector<std::exception_ptr> errors(workers);
        const std::size_t chunk = (n + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t begin = std::min(n, w * chunk);
            const std::size_t end = std::min(n, begin + chunk);
            pool.emplace_back([&, w, begin, end] {
                try {
                    run_range(begin, end);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        pool.clear();
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    SimReport report;
    report.config = cfg;
    report.steps_executed = cfg.steps;
    report.initial_grad_share = gradient_share(pop, kind);

    std::vector<double> initial_iou(n);
    std::transform(pop.begin(), pop.end(), initial_iou.begin(),
                   [](const SamplePair& s) { return s.initial_iou; });
    report.initial_histogram = histogram(initial_iou);
    report.final_histogram = histogram(final_iou);

    double sum_initial = 0.0;
    double sum_final = 0.0;
    std::size_t ge07 = 0, ge08 = 0, ge09 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sum_initial += initial_iou[i];
        sum_final += final_iou[i];
        ge07 += final_iou[i] >= 0.7;
        ge08 += final_iou[i] >= 0.8;
        ge09 += final_iou[i] >= 0.9;
    }
    const auto dn = static_cast<double>(n);
    report.mean_initial_iou = sum_initial / dn;
    report.mean_final_iou = sum_final / dn;
    report.frac_final_ge_07 = static_cast<double>(ge07) / dn;
    report.frac_final_ge_08 = static_cast<double>(ge08) / dn;
    report.frac_final_ge_09 = static_cast<double>(ge09) / dn;
    return report;
}

}  // namespace riou::sim
