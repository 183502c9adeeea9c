#include "riou/losses.hpp"

#include "riou/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>

namespace riou {

namespace {

void check_unit(double iou)
{
    if (!(iou >= 0.0 && iou <= 1.0)) {
        std::ostringstream msg;
        msg << "IoU value " << iou << " outside [0, 1]";
        throw DomainError(msg.str());
    }
}

using Grad4 = std::array<double, 4>;

Grad4 operator+(const Grad4& l, const Grad4& r)
{
    return {l[0] + r[0], l[1] + r[1], l[2] + r[2], l[3] + r[3]};
}

Grad4 operator-(const Grad4& l, const Grad4& r)
{
    return {l[0] - r[0], l[1] - r[1], l[2] - r[2], l[3] - r[3]};
}

Grad4 operator*(double s, const Grad4& g)
{
    return {s * g[0], s * g[1], s * g[2], s * g[3]};
}

// Unit vectors in (x_min, y_min, x_max, y_max).
constexpr Grad4 kDx0{1, 0, 0, 0};
constexpr Grad4 kDy0{0, 1, 0, 0};
constexpr Grad4 kDx1{0, 0, 1, 0};
constexpr Grad4 kDy1{0, 0, 0, 1};
constexpr Grad4 kZero{0, 0, 0, 0};

// Values of every geometric quantity the losses need, each paired with its
// derivative with respect to the predicted box.
struct Geometry {
    double inter = 0, union_ = 0, iou = 0;
    Grad4 d_inter{}, d_union{}, d_iou{};
    double enclosure = 0, diag_sq = 0;
    Grad4 d_enclosure{}, d_diag_sq{};
    double dist_sq = 0;
    Grad4 d_dist_sq{};
};

// Extent of the overlap along one axis. A predicted edge bounds the overlap
// only when strictly inside the ground-truth edge.
void overlap_1d(double p0, double p1, double g0, double g1, const Grad4& dp0,
                const Grad4& dp1, double& len, Grad4& d_len)
{
    const double lo = std::max(p0, g0);
    const double hi = std::min(p1, g1);
    len = hi - lo;
    if (len <= 0.0) {
        len = 0.0;
        d_len = kZero;
        return;
    }
    d_len = kZero;
    if (p1 < g1) {
        d_len = d_len + dp1;
    }
    if (p0 > g0) {
        d_len = d_len - dp0;
    }
}

// Extent of the enclosing box along one axis. On ties the predicted edge is
// the bounding one.
void enclosure_1d(double p0, double p1, double g0, double g1, const Grad4& dp0,
                  const Grad4& dp1, double& len, Grad4& d_len)
{
    len = std::max(p1, g1) - std::min(p0, g0);
    d_len = kZero;
    if (p1 >= g1) {
        d_len = d_len + dp1;
    }
    if (p0 <= g0) {
        d_len = d_len - dp0;
    }
}

Geometry geometry(const Box2D& p, const Box2D& g)
{
    Geometry r;

    double iw = 0, ih = 0;
    Grad4 d_iw, d_ih;
    overlap_1d(p.x_min(), p.x_max(), g.x_min(), g.x_max(), kDx0, kDx1, iw, d_iw);
    overlap_1d(p.y_min(), p.y_max(), g.y_min(), g.y_max(), kDy0, kDy1, ih, d_ih);
    r.inter = iw * ih;
    r.d_inter = ih * d_iw + iw * d_ih;

    const double pw = p.width();
    const double ph = p.height();
    const Grad4 d_area_p = ph * (kDx1 - kDx0) + pw * (kDy1 - kDy0);
    r.union_ = pw * ph + area(g) - r.inter;
    r.d_union = d_area_p - r.d_inter;
    if (!(r.union_ > 0.0)) {
        throw UndefinedIoU("IoU undefined: union of the two boxes has zero area");
    }
    r.iou = r.inter / r.union_;
    r.d_iou = (1.0 / (r.union_ * r.union_)) * (r.union_ * r.d_inter - r.inter * r.d_union);

    double ew = 0, eh = 0;
    Grad4 d_ew, d_eh;
    enclosure_1d(p.x_min(), p.x_max(), g.x_min(), g.x_max(), kDx0, kDx1, ew, d_ew);
    enclosure_1d(p.y_min(), p.y_max(), g.y_min(), g.y_max(), kDy0, kDy1, eh, d_eh);
    r.enclosure = ew * eh;
    r.d_enclosure = eh * d_ew + ew * d_eh;
    r.diag_sq = ew * ew + eh * eh;
    r.d_diag_sq = (2.0 * ew) * d_ew + (2.0 * eh) * d_eh;

    const Point2D cp = center(p);
    const Point2D cg = center(g);
    const double dx = cp.x - cg.x;
    const double dy = cp.y - cg.y;
    r.dist_sq = dx * dx + dy * dy;
    // d(center x) = (d x_min + d x_max) / 2
    r.d_dist_sq = dx * (kDx0 + kDx1) + dy * (kDy0 + kDy1);
    return r;
}

double smooth_l1_of_sqrt(double z_sq)
{
    return z_sq < 1.0 ? 0.5 * z_sq : std::sqrt(z_sq) - 0.5;
}

BoxGradient to_box_gradient(const Grad4& g)
{
    return BoxGradient{g};
}

}  // namespace

std::string_view to_string(LossType type) noexcept
{
    switch (type) {
    case LossType::Iou:
        return "iou";
    case LossType::Giou:
        return "giou";
    case LossType::Diou:
        return "diou";
    case LossType::Riou:
        return "riou";
    }
    return "unknown";
}

std::optional<LossType> parse_loss_type(std::string_view text) noexcept
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    for (LossType t : {LossType::Iou, LossType::Giou, LossType::Diou, LossType::Riou}) {
        if (lower == to_string(t)) {
            return t;
        }
    }
    return std::nullopt;
}

LossKind LossKind::riou(const RiouParams& params)
{
    if (!is_valid(params)) {
        throw DomainError("RIoU loss requires solved coefficients (see solve_params)");
    }
    LossKind kind(LossType::Riou);
    kind.params_ = params;
    return kind;
}

LossKind LossKind::riou_beta(double beta)
{
    return riou(solve_params(beta));
}

const RiouParams& LossKind::params() const
{
    if (type_ != LossType::Riou) {
        throw DomainError("only the RIoU loss carries coefficients");
    }
    return params_;
}

std::ostream& operator<<(std::ostream& os, const BoxGradient& g)
{
    return os << '(' << g[0] << ", " << g[1] << ", " << g[2] << ", " << g[3] << ')';
}

double iou_loss(double iou)
{
    check_unit(iou);
    return 1.0 - iou;
}

double iou_loss_grad_mag(double iou)
{
    check_unit(iou);
    return 1.0;
}

double riou_grad_mag(double iou, const RiouParams& p)
{
    check_unit(iou);
    return p.a * iou * (1.0 - iou) / (p.c - iou);
}

double riou_loss(double iou, const RiouParams& p)
{
    check_unit(iou);
    const double c1 = p.c - 1.0;
    const double cc1 = p.c * c1;
    const auto n = [&](double x) {
        return (1.0 - x * x) / 2.0 + c1 * (1.0 - x) + cc1 * std::log(c1 / (p.c - x));
    };
    return n(iou) / n(0.0);
}

double loss_grad_mag(double iou, const LossKind& kind)
{
    if (kind.type() == LossType::Riou) {
        return riou_grad_mag(iou, kind.params());
    }
    return iou_loss_grad_mag(iou);
}

double giou_loss(const Box2D& pred, const Box2D& gt)
{
    return 1.0 - giou_value(pred, gt);
}

double diou_loss(const Box2D& pred, const Box2D& gt)
{
    return 1.0 - diou_value(pred, gt);
}

double center_penalty(const Box2D& pred, const Box2D& gt)
{
    const Box2D e = enclosing_box(pred, gt);
    const double diag_sq = e.width() * e.width() + e.height() * e.height();
    if (!(diag_sq > 0.0)) {
        throw DegenerateEnclosure("center penalty undefined: enclosing box has zero diagonal");
    }
    return smooth_l1_of_sqrt(center_distance_sq(pred, gt) / diag_sq);
}

double localization_loss(const Box2D& pred, const Box2D& gt, const LossKind& kind)
{
    switch (kind.type()) {
    case LossType::Iou:
        return iou_loss(iou(pred, gt));
    case LossType::Giou:
        return giou_loss(pred, gt);
    case LossType::Diou:
        return diou_loss(pred, gt);
    case LossType::Riou:
        return riou_loss(iou(pred, gt), kind.params()) + center_penalty(pred, gt);
    }
    throw DomainError("unknown loss kind");
}

BoxGradient loss_gradient_boxes(const Box2D& pred, const Box2D& gt, const LossKind& kind)
{
    const Geometry g = geometry(pred, gt);

    switch (kind.type()) {
    case LossType::Iou:
        return to_box_gradient(-1.0 * g.d_iou);

    case LossType::Giou: {
        // GIoU = IoU - 1 + U / C
        const double c = g.enclosure;
        const Grad4 d_ratio = (1.0 / (c * c)) * (c * g.d_union - g.union_ * g.d_enclosure);
        return to_box_gradient(-1.0 * (g.d_iou + d_ratio));
    }

    case LossType::Diou: {
        const double q = g.diag_sq;
        const Grad4 d_pen = (1.0 / (q * q)) * (q * g.d_dist_sq - g.dist_sq * g.d_diag_sq);
        return to_box_gradient(-1.0 * (g.d_iou - d_pen));
    }

    case LossType::Riou: {
        if (!(g.diag_sq > 0.0)) {
            throw DegenerateEnclosure("center penalty undefined: enclosing box has zero diagonal");
        }
        const double dl_diou = -riou_grad_mag(std::clamp(g.iou, 0.0, 1.0), kind.params());
        const double q = g.diag_sq;
        const double z_sq = g.dist_sq / q;
        const Grad4 d_z_sq = (1.0 / (q * q)) * (q * g.d_dist_sq - g.dist_sq * g.d_diag_sq);
        // smooth-L1: 0.5 z^2 below 1, z - 0.5 above; d z = d(z^2) / (2 z)
        const Grad4 d_pen = z_sq < 1.0 ? 0.5 * d_z_sq : (0.5 / std::sqrt(z_sq)) * d_z_sq;
        return to_box_gradient(dl_diou * g.d_iou + d_pen);
    }
    }
    throw DomainError("unknown loss kind");
}

BoxGradient finite_diff_gradient(const Box2D& pred, const Box2D& gt, const LossKind& kind,
                                 double h)
{
    if (!(h > 0.0)) {
        throw DomainError("finite-difference step must be positive");
    }
    const std::array<double, 4> base{pred.x_min(), pred.y_min(), pred.x_max(), pred.y_max()};
    BoxGradient out;
    for (std::size_t i = 0; i < 4; ++i) {
        auto plus = base;
        auto minus = base;
        plus[i] += h;
        minus[i] -= h;
        const double lp =
            localization_loss(Box2D(plus[0], plus[1], plus[2], plus[3]), gt, kind);
        const double lm =
            localization_loss(Box2D(minus[0], minus[1], minus[2], minus[3]), gt, kind);
        out[i] = (lp - lm) / (plus[i] - minus[i]);
    }
    return out;
}

}  // namespace riou
