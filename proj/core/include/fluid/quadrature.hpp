#pragma once

#include <functional>
#include <span>

namespace fluid {

/// Adaptive Simpson integration of f over [a, b] to absolute tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol = 1e-10, int max_depth = 48);

/// Same, but splits [a, b] at the given interior breakpoints first so kinks of
/// piecewise-defined integrands sit on panel boundaries.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        std::span<const double> breakpoints, double abs_tol = 1e-10);

}  // namespace fluid
