#include "riou/boxgeom.hpp"

#include "riou/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace riou {

Box2D::Box2D(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max)
{
    if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
        !std::isfinite(y_max)) {
        throw InvalidBox("box coordinates must be finite");
    }
    if (x_min > x_max || y_min > y_max) {
        std::ostringstream msg;
        msg << "box corners out of order: " << *this;
        throw InvalidBox(msg.str());
    }
}

Box2D Box2D::from_center(double cx, double cy, double width, double height)
{
    if (!(width >= 0.0) || !(height >= 0.0)) {
        throw InvalidBox("box extents must be non-negative");
    }
    return {cx - 0.5 * width, cy - 0.5 * height, cx + 0.5 * width, cy + 0.5 * height};
}

std::ostream& operator<<(std::ostream& os, const Box2D& b)
{
    return os << '[' << b.x_min() << ',' << b.y_min() << ',' << b.x_max() << ','
              << b.y_max() << ']';
}

double area(const Box2D& b) noexcept
{
    return b.width() * b.height();
}

double intersection_area(const Box2D& a, const Box2D& b) noexcept
{
    const double w = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
    const double h = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
    if (w <= 0.0 || h <= 0.0) {
        return 0.0;
    }
    return w * h;
}

double union_area(const Box2D& a, const Box2D& b) noexcept
{
    return area(a) + area(b) - intersection_area(a, b);
}

double iou(const Box2D& a, const Box2D& b)
{
    const double inter = intersection_area(a, b);
    const double uni = area(a) + area(b) - inter;
    if (!(uni > 0.0)) {
        throw UndefinedIoU("IoU undefined: union of the two boxes has zero area");
    }
    return std::clamp(inter / uni, 0.0, 1.0);
}

Box2D enclosing_box(const Box2D& a, const Box2D& b) noexcept
{
    return {std::min(a.x_min(), b.x_min()), std::min(a.y_min(), b.y_min()),
            std::max(a.x_max(), b.x_max()), std::max(a.y_max(), b.y_max())};
}

Point2D center(const Box2D& b) noexcept
{
    return {0.5 * (b.x_min() + b.x_max()), 0.5 * (b.y_min() + b.y_max())};
}

double center_distance_sq(const Box2D& a, const Box2D& b) noexcept
{
    const Point2D ca = center(a);
    const Point2D cb = center(b);
    const double dx = ca.x - cb.x;
    const double dy = ca.y - cb.y;
    return dx * dx + dy * dy;
}

double giou_value(const Box2D& a, const Box2D& b)
{
    const double inter = intersection_area(a, b);
    const double uni = area(a) + area(b) - inter;
    if (!(uni > 0.0)) {
        throw UndefinedIoU("GIoU undefined: union of the two boxes has zero area");
    }
    // enclosure area >= union area > 0; rounding can flip the gap's sign
    const double enclosure = area(enclosing_box(a, b));
    return std::clamp(inter / uni, 0.0, 1.0) - std::max(0.0, enclosure - uni) / enclosure;
}

double diou_value(const Box2D& a, const Box2D& b)
{
    const double value = iou(a, b);
    const Box2D e = enclosing_box(a, b);
    const double diag_sq = e.width() * e.width() + e.height() * e.height();
    return value - center_distance_sq(a, b) / diag_sq;
}

}  // namespace riou
