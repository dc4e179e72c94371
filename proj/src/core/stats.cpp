#include "core/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace attrivae::stats {

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

std::vector<double> ranks(std::span<const double> v) {
  const size_t n = v.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double spearman(std::span<const double> a, std::span<const double> b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  return pearson(ra, rb);
}

double quantile(std::span<const double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  q = std::clamp(q, 0.0, 1.0);
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + frac * (s[hi] - s[lo]);
}

double median(std::span<const double> v) { return quantile(v, 0.5); }

double linear_fit_r2(std::span<const double> x, std::span<const double> y) {
  const double r = pearson(x, y);
  return r * r;
}

std::vector<int> equal_width_bins(std::span<const double> v, int bins) {
  if (bins < 1) throw std::invalid_argument("bins must be positive");
  std::vector<int> out(v.size(), 0);
  if (v.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return out;
  const double width = (hi - lo) / bins;
  for (size_t i = 0; i < v.size(); ++i) {
    int b = static_cast<int>((v[i] - lo) / width);
    out[i] = std::clamp(b, 0, bins - 1);
  }
  return out;
}

double entropy_of_bins(std::span<const int> labels, int bins) {
  if (labels.empty()) return 0.0;
  std::vector<double> counts(static_cast<size_t>(bins), 0.0);
  for (int l : labels) counts[static_cast<size_t>(l)] += 1.0;
  const double n = static_cast<double>(labels.size());
  double h = 0.0;
  for (double c : counts)
    if (c > 0) h -= (c / n) * std::log(c / n);
  return h;
}

double mutual_information_of_bins(std::span<const int> a, int bins_a,
                                  std::span<const int> b, int bins_b) {
  if (a.size() != b.size()) throw std::invalid_argument("mutual information: length mismatch");
  if (a.empty()) return 0.0;
  const auto na = static_cast<size_t>(bins_a), nb = static_cast<size_t>(bins_b);
  std::vector<double> joint(na * nb, 0.0), pa(na, 0.0), pb(nb, 0.0);
  for (size_t i = 0; i < a.size(); ++i) {
    joint[static_cast<size_t>(a[i]) * nb + static_cast<size_t>(b[i])] += 1.0;
    pa[static_cast<size_t>(a[i])] += 1.0;
    pb[static_cast<size_t>(b[i])] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (size_t i = 0; i < na; ++i)
    for (size_t j = 0; j < nb; ++j) {
      const double c = joint[i * nb + j];
      if (c > 0) mi += (c / n) * std::log(c * n / (pa[i] * pb[j]));
    }
  return std::max(0.0, mi);
}

}  // namespace attrivae::stats
