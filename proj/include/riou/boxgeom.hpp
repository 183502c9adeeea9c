#pragma once

#include <iosfwd>

namespace riou {

struct Point2D {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2D&, const Point2D&) = default;
};

/// Axis-aligned rectangle in corner form. Zero-width or zero-height boxes are
/// allowed; reversed or non-finite corners throw InvalidBox.
class Box2D {
public:
    Box2D() = default;
    Box2D(double x_min, double y_min, double x_max, double y_max);

    /// Builds a box from its center and extents (extents must be >= 0).
    static Box2D from_center(double cx, double cy, double width, double height);

    double x_min() const noexcept { return x_min_; }
    double y_min() const noexcept { return y_min_; }
    double x_max() const noexcept { return x_max_; }
    double y_max() const noexcept { return y_max_; }
    double width() const noexcept { return x_max_ - x_min_; }
    double height() const noexcept { return y_max_ - y_min_; }
    bool degenerate() const noexcept { return width() == 0.0 || height() == 0.0; }

    friend bool operator==(const Box2D&, const Box2D&) = default;

private:
    double x_min_ = 0.0;
    double y_min_ = 0.0;
    double x_max_ = 0.0;
    double y_max_ = 0.0;
};

std::ostream& operator<<(std::ostream& os, const Box2D& b);

double area(const Box2D& b) noexcept;
double intersection_area(const Box2D& a, const Box2D& b) noexcept;
/// area(a) + area(b) - intersection_area(a, b).
double union_area(const Box2D& a, const Box2D& b) noexcept;

/// Intersection over union. Throws UndefinedIoU when the union is empty.
/// Boxes that only share an edge have IoU 0.
double iou(const Box2D& a, const Box2D& b);

Box2D enclosing_box(const Box2D& a, const Box2D& b) noexcept;
Point2D center(const Box2D& b) noexcept;

/// Squared Euclidean distance between the two box centers.
double center_distance_sq(const Box2D& a, const Box2D& b) noexcept;

/// IoU minus the fraction of the enclosing box not covered by the union.
double giou_value(const Box2D& a, const Box2D& b);

/// IoU minus squared center distance over squared enclosing-box diagonal.
double diou_value(const Box2D& a, const Box2D& b);

}  // namespace riou
