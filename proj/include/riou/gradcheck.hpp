#pragma once

#include "riou/boxgeom.hpp"
#include "riou/losses.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace riou {

struct BoxPair {
    Box2D pred;
    Box2D gt;
};

using GradientFn = std::function<BoxGradient(const Box2D&, const Box2D&, const LossKind&)>;

inline constexpr double kGradcheckStep = 1e-6;
inline constexpr double kGradcheckTolerance = 1e-4;

/// max_i |analytic_i - numeric_i| / max(max_i |analytic_i|, max_i |numeric_i|, 1e-8).
double gradient_relative_error(const BoxGradient& analytic, const BoxGradient& numeric);

/// Overlapping, non-degenerate pairs whose corresponding edges are at least a
/// small margin apart, so every loss is differentiable in a neighborhood.
std::vector<BoxPair> random_differentiable_pairs(std::size_t count, std::uint64_t seed);

struct GradcheckResult {
    LossType type = LossType::Iou;
    std::size_t trials = 0;
    double max_rel_error = 0.0;
    BoxPair worst{};
    BoxGradient worst_analytic{};
    BoxGradient worst_numeric{};

    bool passed(double tolerance = kGradcheckTolerance) const
    {
        return max_rel_error < tolerance;
    }
};

/// Compares `analytic` with central differences of localization_loss on
/// every pair.
GradcheckResult check_gradients(const LossKind& kind, std::span<const BoxPair> pairs,
                                double h = kGradcheckStep,
                                const GradientFn& analytic = loss_gradient_boxes);

}  // namespace riou
