#include "tbm/metrics.hpp"

#include <algorithm>

#include "tbm/errors.hpp"

namespace tbm {

double r_squared(const std::vector<double>& y, const std::vector<double>& y_hat) {
  if (y.empty() || y.size() != y_hat.size()) throw LengthMismatch("r_squared: length mismatch");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) throw ConstantTarget("r_squared: target series is constant");
  return 1.0 - ss_res / ss_tot;
}

double mse(const std::vector<double>& y, const std::vector<double>& y_hat) {
  if (y.empty() || y.size() != y_hat.size()) throw LengthMismatch("mse: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) total += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
  return total / static_cast<double>(y.size());
}

double detection_rate(const std::set<int>& labeled, const std::set<int>& flagged) {
  if (labeled.empty()) throw NoLabels();
  std::size_t hit = 0;
  for (int w : labeled) hit += flagged.count(w);
  return static_cast<double>(hit) / static_cast<double>(labeled.size());
}

double false_positive_rate(const std::set<int>& normal, const std::set<int>& flagged) {
  if (normal.empty()) throw NoLabels("false_positive_rate: normal set is empty");
  std::size_t hit = 0;
  for (int w : normal) hit += flagged.count(w);
  return static_cast<double>(hit) / static_cast<double>(normal.size());
}

}  // namespace tbm
