#include "doctest.h"

#include "riou/errors.hpp"
#include "riou/regsim.hpp"
#include "riou/sim_io.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

using namespace riou;
using namespace riou::sim;

namespace {

SimConfig small_config(LossType loss, std::size_t n = 400, int steps = 40)
{
    SimConfig cfg;
    cfg.sample_count = n;
    cfg.steps = steps;
    cfg.loss_kind = loss;
    return cfg;
}

std::vector<double> initial_ious(const std::vector<SamplePair>& pop)
{
    std::vector<double> out;
    for (const auto& p : pop) {
        out.push_back(p.initial_iou);
    }
    return out;
}

}  // namespace

TEST_CASE("make_pair hits the target IoU")
{
    Rng rng(1);
    const Box2D gt(0, 0, 10, 10);
    const SamplePair same = make_pair(gt, 1.0, PerturbMode::Shift, rng);
    CHECK(same.anchor == gt);
    CHECK(make_pair(gt, 1.0, PerturbMode::Scale, rng).anchor == gt);

    const double delta = 10.0 / 3.0;
    CHECK(iou(Box2D(delta, 0, 10 + delta, 10), gt) == doctest::Approx(0.5).epsilon(1e-14));
    for (int i = 0; i < 20; ++i) {
        const SamplePair p = make_pair(gt, 0.5, PerturbMode::Shift, rng);
        const double dx = std::abs(p.anchor.x_min() - gt.x_min());
        const double dy = std::abs(p.anchor.y_min() - gt.y_min());
        CHECK(std::max(dx, dy) == doctest::Approx(delta).epsilon(1e-12));
        CHECK(std::min(dx, dy) == 0.0);
        CHECK(std::abs(iou(p.anchor, gt) - 0.5) < 1e-9);
    }

    const Box2D wide(-3, 1, 5, 2.5);
    for (int i = 1; i < 100; ++i) {
        const double t = i / 100.0;
        CAPTURE(t);
        const SamplePair s = make_pair(wide, t, PerturbMode::Scale, rng);
        CHECK(std::abs(iou(s.anchor, wide) - t) < 1e-9);
        CHECK(center(s.anchor).x == doctest::Approx(center(wide).x));
        const SamplePair h = make_pair(wide, t, PerturbMode::Shift, rng);
        CHECK(std::abs(iou(h.anchor, wide) - t) < 1e-9);
        CHECK(h.initial_iou == iou(h.anchor, wide));
    }

    CHECK_THROWS_AS(make_pair(gt, 0.0, PerturbMode::Shift, rng), TargetUnreachable);
    CHECK_THROWS_AS(make_pair(gt, 1.5, PerturbMode::Shift, rng), DomainError);
    CHECK_THROWS_AS(make_pair(gt, -0.1, PerturbMode::Scale, rng), DomainError);
}

TEST_CASE("population follows the configured bucket weights")
{
    SimConfig cfg;
    cfg.sample_count = 20000;
    const auto pop = sample_population(cfg);
    REQUIRE(pop.size() == cfg.sample_count);

    const Histogram hist = histogram(initial_ious(pop));
    const auto profile = default_profile();
    double chi2 = 0.0;
    double total_weight = 0.0;
    for (const auto& b : profile) {
        total_weight += b.weight;
    }
    for (const auto& b : profile) {
        const double n = static_cast<double>(cfg.sample_count);
        const double p = b.weight / total_weight;
        const double expected = n * p;
        const double observed = static_cast<double>(hist[bin_of(b.lower + 0.05)]);
        CAPTURE(b.lower);
        CHECK(std::abs(observed - expected) < 3.0 * std::sqrt(n * p * (1 - p)));
        chi2 += (observed - expected) * (observed - expected) / expected;
    }
    // 5 degrees of freedom, 0.999 quantile
    CHECK(chi2 < 20.52);
    for (std::size_t i = 0; i < kHistogramBins; ++i) {
        if (i == 0 || i > 6) {
            CHECK(hist[i] == 0);
        }
    }
}

TEST_CASE("single-bucket population and determinism")
{
    SimConfig cfg;
    cfg.sample_count = 500;
    cfg.iou_distribution = {{0.3, 1.0}};
    const auto pop = sample_population(cfg);
    for (const auto& p : pop) {
        REQUIRE(p.initial_iou >= 0.3 - 1e-9);
        REQUIRE(p.initial_iou < 0.4 + 1e-9);
    }
    const auto again = sample_population(cfg);
    for (std::size_t i = 0; i < pop.size(); ++i) {
        REQUIRE(pop[i].anchor == again[i].anchor);
        REQUIRE(pop[i].gt == again[i].gt);
    }
    cfg.seed = 8;
    CHECK_FALSE(sample_population(cfg)[0].anchor == pop[0].anchor);
}

TEST_CASE("gradient shares")
{
    SimConfig cfg;
    cfg.sample_count = 5000;
    const auto pop = sample_population(cfg);
    const Histogram hist = histogram(initial_ious(pop));

    const BucketShares plain = gradient_share(pop, LossKind::iou());
    const BucketShares rect = gradient_share(pop, LossKind::riou_beta(0.95));
    double sum_plain = 0.0, sum_rect = 0.0;
    for (std::size_t i = 0; i < kHistogramBins; ++i) {
        CHECK(plain[i] == doctest::Approx(static_cast<double>(hist[i]) / 5000.0).epsilon(1e-12));
        sum_plain += plain[i];
        sum_rect += rect[i];
    }
    CHECK(std::abs(sum_plain - 1.0) < 1e-9);
    CHECK(std::abs(sum_rect - 1.0) < 1e-9);
    const double low_plain = plain[0] + plain[1] + plain[2] + plain[3];
    const double low_rect = rect[0] + rect[1] + rect[2] + rect[3];
    CHECK(low_rect < low_plain);

    // the default profile has no mass at or above 0.7, so use one that does
    cfg.iou_distribution = {{0.1, 0.4}, {0.3, 0.3}, {0.5, 0.15}, {0.7, 0.1}, {0.8, 0.05}};
    const auto wide = sample_population(cfg);
    const BucketShares wp = gradient_share(wide, LossKind::iou());
    const BucketShares wr = gradient_share(wide, LossKind::riou_beta(0.95));
    CHECK(wr[7] + wr[8] + wr[9] > wp[7] + wp[8] + wp[9]);

    Rng rng(4);
    const std::vector<SamplePair> one{make_pair(Box2D(0, 0, 1, 1), 0.55, PerturbMode::Shift, rng)};
    const BucketShares s = gradient_share(one, LossKind::riou_beta(0.95));
    CHECK(s[5] == 1.0);
    CHECK_THROWS_AS(gradient_share(std::vector<SamplePair>{}, LossKind::iou()), DomainError);
}

TEST_CASE("histogram binning")
{
    CHECK(bin_of(0.0) == 0);
    CHECK(bin_of(0.0999) == 0);
    CHECK(bin_of(0.1) == 1);
    CHECK(bin_of(0.95) == 9);
    CHECK(bin_of(1.0) == 9);
    const std::vector<double> v{0.05, 0.15, 0.15, 1.0};
    const Histogram h = histogram(v);
    CHECK(h[0] == 1);
    CHECK(h[1] == 2);
    CHECK(h[9] == 1);
}

TEST_CASE("zero steps leave the population untouched")
{
    SimConfig cfg = small_config(LossType::Riou, 300, 0);
    const SimReport r = run_descent(cfg);
    CHECK(r.steps_executed == 0);
    CHECK(r.initial_histogram == r.final_histogram);
    CHECK(r.mean_final_iou == doctest::Approx(r.mean_initial_iou).epsilon(1e-15));
}

TEST_CASE("single pair descent improves IoU")
{
    // scale perturbation keeps every edge off the ground-truth edges
    Rng rng(12);
    const SamplePair p = make_pair(Box2D(0, 0, 1, 1), 0.5, PerturbMode::Scale, rng);
    const DescentResult r = descend(p, LossKind::iou(), 300, 1e-3, true);
    CHECK(r.final_iou > 0.5);
    REQUIRE(r.loss_trace.size() == 301);
    for (std::size_t i = 1; i < r.loss_trace.size(); ++i) {
        REQUIRE(r.loss_trace[i] <= r.loss_trace[i - 1] + 1e-15);
    }
}

TEST_CASE("small learning rate gives non-increasing loss for every kind")
{
    SimConfig cfg;
    cfg.sample_count = 60;
    cfg.perturb_mode = PerturbMode::Scale;
    cfg.iou_distribution = {{0.1, 1}, {0.3, 1}, {0.5, 1}, {0.7, 1}, {0.8, 1}};
    const auto pop = sample_population(cfg);
    for (const LossKind& kind :
         {LossKind::iou(), LossKind::giou(), LossKind::diou(), LossKind::riou_beta(0.95)}) {
        CAPTURE(kind.name());
        for (const auto& p : pop) {
            const DescentResult r = descend(p, kind, 50, 1e-3, true);
            for (std::size_t i = 1; i < r.loss_trace.size(); ++i) {
                REQUIRE(r.loss_trace[i] <= r.loss_trace[i - 1] + 1e-12);
            }
        }
    }
}

TEST_CASE("report does not depend on the worker count")
{
    const SimConfig cfg = small_config(LossType::Riou, 257, 30);
    const SimReport one = run_descent(cfg, {1, 100'000'000});
    const SimReport many = run_descent(cfg, {7, 100'000'000});
    CHECK(one.final_histogram == many.final_histogram);
    CHECK(one.mean_final_iou == many.mean_final_iou);
    CHECK(one.frac_final_ge_09 == many.frac_final_ge_09);
    CHECK(histograms_csv(one) == histograms_csv(many));
    CHECK(scalars_csv(one) == scalars_csv(many));

    std::size_t total = 0;
    for (auto c : one.final_histogram) {
        total += c;
    }
    CHECK(total == cfg.sample_count);
}

TEST_CASE("budget and validation")
{
    SimConfig cfg = small_config(LossType::Iou, 1000, 200);
    CHECK_THROWS_AS(run_descent(cfg, {1, 1000}), BudgetExceeded);

    SimConfig bad;
    bad.sample_count = 0;
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = SimConfig{};
    bad.learning_rate = -1;
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = SimConfig{};
    bad.iou_distribution = {{0.1, 0.0}};
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = SimConfig{};
    bad.iou_distribution = {{1.0, 1.0}};
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = SimConfig{};
    bad.iou_distribution = {{0.2, -1.0}, {0.3, 2.0}};
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = SimConfig{};
    bad.beta = 1.0;
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad.loss_kind = LossType::Iou;
    CHECK_NOTHROW(validate(bad));
}

TEST_CASE("config text round trip")
{
    std::istringstream in(R"(# comment
sample_count = 123
iou_distribution = 0.1:0.5, 0.4:0.5   # trailing
perturb_mode = scale
steps = 9
learning_rate = 0.01
loss_kind = giou
beta = 0.9
seed = 42
)");
    const SimConfig cfg = parse_config(in);
    CHECK(cfg.sample_count == 123);
    CHECK(cfg.iou_distribution == std::vector<IouBucket>{{0.1, 0.5}, {0.4, 0.5}});
    CHECK(cfg.perturb_mode == PerturbMode::Scale);
    CHECK(cfg.steps == 9);
    CHECK(cfg.learning_rate == 0.01);
    CHECK(cfg.loss_kind == LossType::Giou);
    CHECK(cfg.beta == 0.9);
    CHECK(cfg.seed == 42);

    std::istringstream back(format_config(cfg));
    CHECK(parse_config(back) == cfg);

    std::istringstream empty("");
    CHECK(parse_config(empty) == SimConfig{});
}

TEST_CASE("config errors")
{
    const char* bad[] = {
        "unknown_key = 1\n",
        "steps = 1\nsteps = 2\n",
        "steps = many\n",
        "sample_count = -5\n",
        "learning_rate = 0\n",
        "loss_kind = ciou\n",
        "perturb_mode = rotate\n",
        "iou_distribution = 0.1-0.4\n",
        "just a line\n",
        "beta = 1.2\n",
        "seed = 1.5\n",
    };
    for (const char* text : bad) {
        CAPTURE(text);
        std::istringstream in(text);
        CHECK_THROWS_AS(parse_config(in), ConfigError);
    }
    CHECK_THROWS_AS(load_config("/nonexistent/dir/cfg.txt"), ConfigError);
}

TEST_CASE("report files")
{
    const SimConfig cfg = small_config(LossType::Iou, 100, 5);
    const SimReport r = run_descent(cfg);
    const std::string h = histograms_csv(r);
    CHECK(h.rfind("bin_lower,bin_upper,initial_count,final_count,initial_grad_share\n", 0) == 0);
    CHECK(std::count(h.begin(), h.end(), '\n') == 11);
    const std::string s = scalars_csv(r);
    CHECK(s.rfind("key,value\n", 0) == 0);
    CHECK(s.find("mean_final_iou,") != std::string::npos);
    CHECK(s.find("frac_final_iou_ge_0.9,") != std::string::npos);
    CHECK(summary_text(r).find("independent") != std::string::npos);
}
