#pragma once

#include <set>
#include <vector>

namespace tbm {

/// Coefficient of determination, 1 - SSres/SStot.
double r_squared(const std::vector<double>& y, const std::vector<double>& y_hat);

/// Mean squared error.
double mse(const std::vector<double>& y, const std::vector<double>& y_hat);

/// Fraction of labeled anomalous windows that were flagged (recall).
double detection_rate(const std::set<int>& labeled, const std::set<int>& flagged);

/// Fraction of known-normal windows that were flagged.
double false_positive_rate(const std::set<int>& normal, const std::set<int>& flagged);

}  // namespace tbm
