#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace attrivae::stats {

double mean(std::span<const double> v);
double variance(std::span<const double> v);  // population variance

// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> ranks(std::span<const double> v);

double pearson(std::span<const double> a, std::span<const double> b);
// Returns 0 when either input is constant.
double spearman(std::span<const double> a, std::span<const double> b);

// Linear-interpolated quantile (numpy "linear" / R type 7). q in [0,1].
double quantile(std::span<const double> v, double q);
double median(std::span<const double> v);

// Coefficient of determination of the least-squares fit y ~ w*x + b.
// Constant x gives 0; constant y is the caller's problem (returns 0).
double linear_fit_r2(std::span<const double> x, std::span<const double> y);

// Equal-width bin index of every value over [min, max] of the data.
// A constant column maps to bin 0 everywhere.
std::vector<int> equal_width_bins(std::span<const double> v, int bins);

double entropy_of_bins(std::span<const int> labels, int bins);
double mutual_information_of_bins(std::span<const int> a, int bins_a,
                                  std::span<const int> b, int bins_b);

}  // namespace attrivae::stats
