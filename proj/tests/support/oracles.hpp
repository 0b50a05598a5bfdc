#pragma once

// Independent reference implementations used to check the library. These are
// deliberately naive (unvectorized, direct-summation) and must not share code
// with the implementation under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "tbm/tensor.hpp"

namespace oracle {

// out[b][n] = sum_m a[b][m] * w[m][n] + bias[n]
inline std::vector<double> linear(const std::vector<double>& a, std::size_t batch, std::size_t m,
                                  const std::vector<double>& w, std::size_t n,
                                  const std::vector<double>& bias) {
  std::vector<double> out(batch * n, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = bias.empty() ? 0.0 : bias[j];
      for (std::size_t k = 0; k < m; ++k) acc += a[b * m + k] * w[k * n + j];
      out[b * n + j] = acc;
    }
  return out;
}

// Valid stride-1 convolution by direct summation.
inline std::vector<double> conv1d(const std::vector<double>& in, std::size_t batch,
                                  std::size_t c_in, std::size_t len,
                                  const std::vector<double>& ker, std::size_t c_out, std::size_t k,
                                  const std::vector<double>& bias) {
  const std::size_t out_len = len - k + 1;
  std::vector<double> out(batch * c_out * out_len, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < c_out; ++o)
      for (std::size_t t = 0; t < out_len; ++t) {
        double acc = bias[o];
        for (std::size_t c = 0; c < c_in; ++c)
          for (std::size_t j = 0; j < k; ++j)
            acc += in[(b * c_in + c) * len + t + j] * ker[(o * c_in + c) * k + j];
        out[(b * c_out + o) * out_len + t] = acc;
      }
  return out;
}

// One LSTM cell update, scalar by scalar.
struct LstmCellOracle {
  std::vector<double> h_next, c_next;
};

inline LstmCellOracle lstm_cell(const std::vector<double>& x, const std::vector<double>& h,
                                const std::vector<double>& c, std::size_t d_in,
                                std::size_t hidden, const std::vector<double>& w_i,
                                const std::vector<double>& u_i, const std::vector<double>& b_i,
                                const std::vector<double>& w_f, const std::vector<double>& u_f,
                                const std::vector<double>& b_f, const std::vector<double>& w_g,
                                const std::vector<double>& u_g, const std::vector<double>& b_g,
                                const std::vector<double>& w_o, const std::vector<double>& u_o,
                                const std::vector<double>& b_o) {
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  auto pre = [&](const std::vector<double>& w, const std::vector<double>& u,
                 const std::vector<double>& b, std::size_t j) {
    double acc = b[j];
    for (std::size_t i = 0; i < d_in; ++i) acc += x[i] * w[i * hidden + j];
    for (std::size_t i = 0; i < hidden; ++i) acc += h[i] * u[i * hidden + j];
    return acc;
  };
  LstmCellOracle out;
  out.h_next.resize(hidden);
  out.c_next.resize(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    const double i_g = sig(pre(w_i, u_i, b_i, j));
    const double f_g = sig(pre(w_f, u_f, b_f, j));
    const double g_g = std::tanh(pre(w_g, u_g, b_g, j));
    const double o_g = sig(pre(w_o, u_o, b_o, j));
    out.c_next[j] = f_g * c[j] + i_g * g_g;
    out.h_next[j] = o_g * std::tanh(out.c_next[j]);
  }
  return out;
}

// Nearest-rank quantile, re-derived from the definition.
inline double quantile_nearest_rank(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const std::size_t rank =
      static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

// Rolling median / MAD outlier mask with truncated centered windows.
inline std::vector<bool> mad_outlier_mask(const std::vector<double>& series, int window,
                                          double k) {
  const std::size_t n = series.size();
  const std::size_t half = static_cast<std::size_t>(window) / 2;
  auto median_of = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
  };
  std::vector<bool> mask(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    std::vector<double> win(series.begin() + static_cast<std::ptrdiff_t>(lo),
                            series.begin() + static_cast<std::ptrdiff_t>(hi + 1));
    const double med = median_of(win);
    for (double& v : win) v = std::abs(v - med);
    const double mad = std::max(median_of(win), 1e-9);
    mask[i] = std::abs(series[i] - med) > k * mad;
  }
  return mask;
}

// --- finite differences -------------------------------------------------------

// Rebuilds the loss with `loss_fn` around perturbed leaf values and compares
// the analytic gradient against central differences at up to
// `samples_per_leaf` random positions per leaf. Returns the maximum relative
// error observed.
inline double max_grad_error(const std::vector<tbm::Tensor>& leaves,
                             const std::function<tbm::Tensor()>& loss_fn, std::mt19937_64& rng,
                             int samples_per_leaf = 10, double h = 1e-5) {
  for (const tbm::Tensor& leaf : leaves) {
    tbm::Tensor mutable_leaf = leaf;
    mutable_leaf.zero_grad();
  }
  loss_fn().backward();
  std::vector<std::vector<double>> analytic;
  for (const tbm::Tensor& leaf : leaves) analytic.push_back(leaf.grad());

  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    tbm::Tensor leaf = leaves[li];
    std::vector<std::size_t> positions(leaf.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    if (positions.size() > static_cast<std::size_t>(samples_per_leaf)) {
      std::shuffle(positions.begin(), positions.end(), rng);
      positions.resize(static_cast<std::size_t>(samples_per_leaf));
    }
    for (std::size_t pos : positions) {
      const double saved = leaf.values()[pos];
      leaf.values()[pos] = saved + h;
      const double up = loss_fn().item();
      leaf.values()[pos] = saved - h;
      const double down = loss_fn().item();
      leaf.values()[pos] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[li][pos];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> out(n);
  for (double& v : out) v = dist(rng);
  return out;
}

}  // namespace oracle
