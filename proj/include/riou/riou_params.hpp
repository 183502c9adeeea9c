#pragma once

#include <array>

namespace riou {

/// Coefficients of the rectified IoU loss for one choice of gradient-peak
/// position `beta`.
///
/// The gradient magnitude with respect to IoU is
///     g(x) = (a x + b) + k / (x - c)
/// and the loss is
///     L(x) = 1 - (a/2 x^2 + b x + k ln|x - c| + t).
///
/// The five coefficients are pinned by g(0) = 0, g(1) = 0, a maximum of g at
/// x = beta, L(0) = 1 and L(1) = 0. Instances returned by solve_params()
/// satisfy all five to better than 1e-10.
struct RiouParams {
    double beta = 0.0;
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double k = 0.0;
    double t = 0.0;

    friend bool operator==(const RiouParams&, const RiouParams&) = default;
};

/// Open interval of admissible peak positions.
inline constexpr double kBetaLower = 0.5;
inline constexpr double kBetaUpper = 1.0;

/// Residual magnitude every solved instance must stay below.
inline constexpr double kResidualTolerance = 1e-10;

/// Solves the constraint system in closed form. Throws BetaOutOfDomain unless
/// 0.5 < beta < 1, and Error if the residual check fails.
RiouParams solve_params(double beta);

/// Left-hand side minus right-hand side of the five constraints, in order:
///   b - k/c                          (g(0) = 0)
///   a + b + k/(1-c)                  (g(1) = 0)
///   c - sqrt(k/a) - beta             (peak at beta)
///   k ln|c| + t                      (L(0) = 1)
///   a/2 + b + k ln|1-c| + t - 1      (L(1) = 0)
std::array<double, 5> residuals(const RiouParams& p);

double max_abs_residual(const RiouParams& p);

/// True when the sign conditions a, b, k > 0, c > 1 hold and every residual
/// is below kResidualTolerance.
bool is_valid(const RiouParams& p);

}  // namespace riou
