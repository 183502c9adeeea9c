#pragma once

// Synthetic box-regression simulator.
//
// Each sample is an (anchor, ground truth) pair built at a chosen initial IoU.
// Anchors are regressed independently by plain gradient descent on
// (cx, cy, log w, log h), so any difference between losses comes from the
// shape of the loss alone. There is no shared model and no coupling between
// samples.

#include "riou/boxgeom.hpp"
#include "riou/losses.hpp"
#include "riou/random.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace riou::sim {

enum class PerturbMode { Shift, Scale };

std::string_view to_string(PerturbMode mode) noexcept;
std::optional<PerturbMode> parse_perturb_mode(std::string_view text) noexcept;

/// Samples drawn from this bucket get a target IoU uniform on
/// [lower, min(lower + kBucketWidth, 1)).
struct IouBucket {
    double lower = 0.0;
    double weight = 0.0;

    friend bool operator==(const IouBucket&, const IouBucket&) = default;
};

inline constexpr double kBucketWidth = 0.1;
inline constexpr std::size_t kHistogramBins = 10;
inline constexpr double kMinExtent = 1e-6;

/// Illustrative imbalanced profile: most mass at low IoU.
std::vector<IouBucket> default_profile();

struct SimConfig {
    std::size_t sample_count = 10000;
    std::vector<IouBucket> iou_distribution = default_profile();
    PerturbMode perturb_mode = PerturbMode::Shift;
    int steps = 200;
    double learning_rate = 0.05;
    LossType loss_kind = LossType::Riou;
    double beta = 0.95;  // used only when loss_kind is Riou
    std::uint64_t seed = 7;

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// Throws ConfigError naming the first violated constraint.
void validate(const SimConfig& cfg);

/// The loss a configuration selects; solves RIoU coefficients from beta.
LossKind resolve_loss(const SimConfig& cfg);

struct SamplePair {
    Box2D anchor;
    Box2D gt;
    double initial_iou = 0.0;
};

/// Builds an anchor at IoU `target_iou` with `gt`.
///
/// Shift: gt translated along a random axis and direction by
/// w (1 - t) / (1 + t), w being the gt extent on that axis.
/// Scale: gt shrunk or grown about its center (random choice) by a factor
/// found by bisection until |IoU - t| < 1e-9.
///
/// Throws TargetUnreachable for t = 0 and DomainError for t outside (0, 1].
SamplePair make_pair(const Box2D& gt, double target_iou, PerturbMode mode, Rng& rng);

/// `sample_count` pairs, deterministic in `seed`.
std::vector<SamplePair> sample_population(const SimConfig& cfg);

using Histogram = std::array<std::size_t, kHistogramBins>;
using BucketShares = std::array<double, kHistogramBins>;

/// Histogram bin of an IoU value; 1.0 falls into the last bin.
std::size_t bin_of(double iou) noexcept;

Histogram histogram(std::span<const double> ious);

/// Fraction of the population's total |dL/dIoU|, evaluated at each sample's
/// initial IoU, contributed by each IoU bin. Throws DomainError on an empty
/// population.
BucketShares gradient_share(std::span<const SamplePair> pop, const LossKind& kind);

struct DescentResult {
    Box2D final_anchor;
    double final_iou = 0.0;
    /// Loss before the first step and after every step, when requested.
    std::vector<double> loss_trace;
};

DescentResult descend(const SamplePair& pair, const LossKind& kind, int steps,
                      double learning_rate, bool record_trace = false);

struct RunOptions {
    /// 0 selects std::thread::hardware_concurrency().
    unsigned workers = 0;
    /// Upper bound on steps * sample_count.
    std::uint64_t budget = 100'000'000;
};

struct SimReport {
    SimConfig config;
    BucketShares initial_grad_share{};
    Histogram initial_histogram{};
    Histogram final_histogram{};
    double mean_initial_iou = 0.0;
    double mean_final_iou = 0.0;
    double frac_final_ge_07 = 0.0;
    double frac_final_ge_08 = 0.0;
    double frac_final_ge_09 = 0.0;
    int steps_executed = 0;
};

/// Runs the whole experiment. Results are reduced in sample order, so the
/// report does not depend on the worker count. Throws BudgetExceeded when
/// steps * sample_count exceeds the budget.
SimReport run_descent(const SimConfig& cfg, const RunOptions& options = {});

}  // namespace riou::sim
