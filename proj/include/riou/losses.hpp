#pragma once

#include "riou/boxgeom.hpp"
#include "riou/riou_params.hpp"

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string_view>

namespace riou {

enum class LossType { Iou, Giou, Diou, Riou };

std::string_view to_string(LossType type) noexcept;

/// Parses "iou", "giou", "diou" or "riou" (case-insensitive).
std::optional<LossType> parse_loss_type(std::string_view text) noexcept;

/// Selects one localization loss; the RIoU variant carries its coefficients.
class LossKind {
public:
    static LossKind iou() noexcept { return LossKind(LossType::Iou); }
    static LossKind giou() noexcept { return LossKind(LossType::Giou); }
    static LossKind diou() noexcept { return LossKind(LossType::Diou); }
    /// Throws DomainError when `params` fails is_valid().
    static LossKind riou(const RiouParams& params);
    /// Solves the coefficients for `beta` and wraps them.
    static LossKind riou_beta(double beta);

    LossType type() const noexcept { return type_; }
    std::string_view name() const noexcept { return to_string(type_); }
    /// Coefficients of a RIoU kind; throws DomainError for other kinds.
    const RiouParams& params() const;

private:
    explicit LossKind(LossType type) noexcept : type_(type) {}

    LossType type_;
    RiouParams params_{};
};

/// Partial derivatives of a scalar loss with respect to the predicted box's
/// corner coordinates.
struct BoxGradient {
    std::array<double, 4> d{};

    double x_min() const noexcept { return d[0]; }
    double y_min() const noexcept { return d[1]; }
    double x_max() const noexcept { return d[2]; }
    double y_max() const noexcept { return d[3]; }

    double& operator[](std::size_t i) noexcept { return d[i]; }
    double operator[](std::size_t i) const noexcept { return d[i]; }
};

std::ostream& operator<<(std::ostream& os, const BoxGradient& g);

// Scalar losses of the IoU value. All throw DomainError for iou outside [0, 1].

/// 1 - iou.
double iou_loss(double iou);
/// |dL/dIoU| of the plain IoU loss: constant 1.
double iou_loss_grad_mag(double iou);

/// |dL/dIoU| of the rectified loss: (a x + b) + k / (x - c).
///
/// Evaluated in the factored form a x (1 - x) / (c - x), which is the same
/// function once b = k/c and k = a c (c - 1) hold, and is exactly zero at
/// both endpoints.
double riou_grad_mag(double iou, const RiouParams& p);

/// 1 - (a/2 x^2 + b x + k ln|x - c| + t), strictly decreasing from 1 at x = 0
/// to 0 at x = 1.
///
/// Evaluated as N(x) / N(0) with
///     N(x) = (1 - x^2)/2 + (c - 1)(1 - x) + c (c - 1) ln((c - 1) / (c - x)),
/// the integral of the gradient from x to 1 divided by a. On solved
/// coefficients this is identical to the expanded form and hits both
/// boundary values exactly.
double riou_loss(double iou, const RiouParams& p);

/// |dL/dIoU| for any kind. GIoU and DIoU report the partial derivative
/// through their IoU term, which is 1.
double loss_grad_mag(double iou, const LossKind& kind);

double giou_loss(const Box2D& pred, const Box2D& gt);
double diou_loss(const Box2D& pred, const Box2D& gt);

/// Smooth-L1 of the center distance normalized by the enclosing-box diagonal.
/// Throws DegenerateEnclosure when that diagonal is zero.
double center_penalty(const Box2D& pred, const Box2D& gt);

/// IOU, GIOU and DIOU return their loss alone; RIOU returns
/// riou_loss(iou) + center_penalty.
double localization_loss(const Box2D& pred, const Box2D& gt, const LossKind& kind);

/// Analytic gradient of localization_loss with respect to pred.
///
/// Where a predicted edge coincides with the matching ground-truth edge the
/// derivative is one-sided: the predicted edge is treated as lying just
/// outside the ground-truth edge, so it bounds the enclosing box but not the
/// intersection. Disjoint or edge-touching boxes have no intersection-path
/// gradient.
BoxGradient loss_gradient_boxes(const Box2D& pred, const Box2D& gt, const LossKind& kind);

/// Central differences of localization_loss in each predicted coordinate.
BoxGradient finite_diff_gradient(const Box2D& pred, const Box2D& gt, const LossKind& kind,
                                 double h);

}  // namespace riou
