#include "core/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "core/stats.hpp"

namespace attrivae::metrics {

namespace {

std::vector<double> column(const MatrixXd& m, Eigen::Index c) {
  std::vector<double> v(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, c);
  return v;
}

void check_bundle(const MatrixXd& Z, const MatrixXd& A) {
  if (Z.rows() != A.rows())
    throw std::invalid_argument("latent and attribute matrices have different sample counts (" +
                                std::to_string(Z.rows()) + " vs " + std::to_string(A.rows()) + ")");
  if (Z.rows() < 2) throw std::invalid_argument("metrics need at least 2 samples");
  if (Z.hasNaN() || A.hasNaN()) throw std::invalid_argument("metrics inputs contain NaN");
}

bool is_binary(const std::vector<double>& v) {
  double first = v.front();
  std::optional<double> second;
  for (double x : v) {
    if (x == first) continue;
    if (!second) second = x;
    else if (x != *second) return false;
  }
  return second.has_value();
}

// Binary attribute as 0/1 labels (larger value -> 1).
std::vector<int> binary_labels(const std::vector<double>& v) {
  const double hi = *std::max_element(v.begin(), v.end());
  std::vector<int> out;
  for (double x : v) out.push_back(x == hi ? 1 : 0);
  return out;
}

}  // namespace

MatrixXd mi_matrix(const MatrixXd& Z, const MatrixXd& A, int bins) {
  check_bundle(Z, A);
  if (bins < 2) throw std::invalid_argument("mi_matrix: bins must be at least 2");
  std::vector<std::vector<int>> zb, ab;
  std::vector<bool> z_const, a_const;
  for (Eigen::Index d = 0; d < Z.cols(); ++d) {
    const auto c = column(Z, d);
    z_const.push_back(stats::variance(c) == 0.0);
    zb.push_back(stats::equal_width_bins(c, bins));
  }
  for (Eigen::Index k = 0; k < A.cols(); ++k) {
    const auto c = column(A, k);
    a_const.push_back(stats::variance(c) == 0.0);
    ab.push_back(stats::equal_width_bins(c, bins));
  }
  MatrixXd mi = MatrixXd::Zero(Z.cols(), A.cols());
  for (std::size_t d = 0; d < zb.size(); ++d)
    for (std::size_t k = 0; k < ab.size(); ++k) {
      if (z_const[d] || a_const[k]) continue;
      mi(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) =
          stats::mutual_information_of_bins(zb[d], bins, ab[k], bins);
    }
  return mi;
}

std::vector<double> binned_entropies(const MatrixXd& A, int bins) {
  std::vector<double> h;
  for (Eigen::Index k = 0; k < A.cols(); ++k) {
    const auto labels = stats::equal_width_bins(column(A, k), bins);
    h.push_back(stats::entropy_of_bins(labels, bins));
  }
  return h;
}

double modularity(const MatrixXd& mi) {
  const auto K = mi.cols();
  if (K < 2) throw std::invalid_argument("modularity: need at least 2 attributes");
  if (mi.rows() == 0) throw std::invalid_argument("modularity: empty MI matrix");
  double total = 0.0;
  for (Eigen::Index d = 0; d < mi.rows(); ++d) {
    Eigen::Index best = 0;
    const double theta = mi.row(d).maxCoeff(&best);
    if (theta <= 0.0) {
      total += 1.0;
      continue;
    }
    double dev = 0.0;
    for (Eigen::Index k = 0; k < K; ++k)
      if (k != best) dev += mi(d, k) * mi(d, k);
    dev /= theta * theta * static_cast<double>(K - 1);
    total += 1.0 - dev;
  }
  return total / static_cast<double>(mi.rows());
}

double mig(const MatrixXd& Z, const MatrixXd& A, int bins) {
  if (Z.cols() < 2) throw std::invalid_argument("mig: need at least 2 latent dimensions");
  const MatrixXd mi = mi_matrix(Z, A, bins);
  const auto h = binned_entropies(A, bins);
  double total = 0.0;
  int counted = 0;
  for (Eigen::Index k = 0; k < A.cols(); ++k) {
    const double hk = h[static_cast<std::size_t>(k)];
    if (hk <= 0.0) continue;
    std::vector<double> col = column(mi, k);
    std::partial_sort(col.begin(), col.begin() + 2, col.end(), std::greater<>());
    total += (col[0] - col[1]) / hk;
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("mig: every attribute is constant");
  return total / counted;
}

double best_threshold_balanced_accuracy(std::span<const double> score, std::span<const int> labels) {
  const std::size_t n = score.size();
  std::size_t pos = 0;
  for (int l : labels) pos += l ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return 0.5;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  // Predict 1 above the threshold (or below, for the flipped orientation).
  double best = 0.5;
  std::size_t pos_below = 0, neg_below = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[order[i]]) ++pos_below;
    else ++neg_below;
    if (i + 1 < n && score[order[i + 1]] == score[order[i]]) continue;
    const double tpr = static_cast<double>(pos - pos_below) / static_cast<double>(pos);
    const double tnr = static_cast<double>(neg_below) / static_cast<double>(neg);
    const double bal = 0.5 * (tpr + tnr);
    best = std::max({best, bal, 1.0 - bal});
  }
  return best;
}

double sap(const MatrixXd& Z, const MatrixXd& A) {
  check_bundle(Z, A);
  double total = 0.0;
  for (Eigen::Index k = 0; k < A.cols(); ++k) {
    const auto a = column(A, k);
    const bool binary = is_binary(a);
    const auto labels = binary ? binary_labels(a) : std::vector<int>{};
    std::vector<double> scores;
    for (Eigen::Index d = 0; d < Z.cols(); ++d) {
      const auto z = column(Z, d);
      // Binary attributes: chance-corrected balanced accuracy, 0 at chance like R^2.
      scores.push_back(binary ? 2.0 * best_threshold_balanced_accuracy(z, labels) - 1.0 : stats::linear_fit_r2(z, a));
    }
    std::sort(scores.begin(), scores.end(), std::greater<>());
    total += scores.size() > 1 ? scores[0] - scores[1] : scores[0];
  }
  return A.cols() > 0 ? total / static_cast<double>(A.cols()) : 0.0;
}

double scc(const MatrixXd& Z, const MatrixXd& A) {
  check_bundle(Z, A);
  if (Z.rows() < 3) throw std::invalid_argument("scc: need at least 3 samples");
  std::vector<std::vector<double>> zr;
  for (Eigen::Index d = 0; d < Z.cols(); ++d) zr.push_back(stats::ranks(column(Z, d)));
  double total = 0.0;
  for (Eigen::Index k = 0; k < A.cols(); ++k) {
    const auto ar = stats::ranks(column(A, k));
    double best = 0.0;
    for (const auto& r : zr) best = std::max(best, std::abs(stats::pearson(r, ar)));
    total += best;
  }
  return A.cols() > 0 ? total / static_cast<double>(A.cols()) : 0.0;
}

std::map<std::string, double> scc_mapped(const MatrixXd& Z, const MatrixXd& A,
                                         const std::vector<std::string>& attribute_names,
                                         const AttributeMapping& mapping) {
  check_bundle(Z, A);
  std::map<std::string, double> out;
  for (std::size_t k = 0; k < attribute_names.size(); ++k) {
    const auto dim = mapping.dim_of(attribute_names[k]);
    if (!dim || *dim >= Z.cols()) continue;
    out[attribute_names[k]] = std::abs(stats::spearman(column(Z, *dim), column(A, static_cast<Eigen::Index>(k))));
  }
  return out;
}

std::vector<int> interpretability_dims(const MatrixXd& Z, const MatrixXd& A,
                                       const std::vector<std::string>& attribute_names,
                                       const AttributeMapping* mapping, int bins) {
  check_bundle(Z, A);
  if (attribute_names.size() != static_cast<std::size_t>(A.cols()))
    throw std::invalid_argument("interpretability: attribute name count differs from attribute columns");
  std::optional<MatrixXd> mi;
  std::vector<int> dims;
  for (std::size_t k = 0; k < attribute_names.size(); ++k) {
    std::optional<int> dim = mapping ? mapping->dim_of(attribute_names[k]) : std::nullopt;
    if (!dim) {
      if (!mi) mi = mi_matrix(Z, A, bins);
      Eigen::Index best = 0;
      mi->col(static_cast<Eigen::Index>(k)).maxCoeff(&best);
      dim = static_cast<int>(best);
    }
    if (*dim < 0 || *dim >= Z.cols())
      throw std::invalid_argument("interpretability: dimension " + std::to_string(*dim) + " out of range");
    dims.push_back(*dim);
  }
  return dims;
}

std::map<std::string, std::optional<double>> interpretability(const MatrixXd& Z, const MatrixXd& A,
                                                               const std::vector<std::string>& attribute_names,
                                                               const AttributeMapping* mapping, int bins) {
  const auto dims = interpretability_dims(Z, A, attribute_names, mapping, bins);
  std::map<std::string, std::optional<double>> out;
  for (std::size_t k = 0; k < attribute_names.size(); ++k) {
    const auto a = column(A, static_cast<Eigen::Index>(k));
    if (stats::variance(a) == 0.0) {
      out[attribute_names[k]] = std::nullopt;
      continue;
    }
    const double r2 = stats::linear_fit_r2(column(Z, dims[k]), a);
    out[attribute_names[k]] = std::max(0.0, r2);
  }
  return out;
}

namespace {

// Pairwise squared distances of the stacked rows [X; Y].
MatrixXd squared_distances(const MatrixXd& P) {
  const Eigen::VectorXd norms = P.rowwise().squaredNorm();
  MatrixXd g = P * P.transpose();
  MatrixXd d(P.rows(), P.rows());
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    for (Eigen::Index j = 0; j < P.rows(); ++j) d(i, j) = std::max(0.0, norms(i) + norms(j) - 2.0 * g(i, j));
  for (Eigen::Index i = 0; i < P.rows(); ++i) d(i, i) = 0.0;
  return d;
}

MatrixXd stack(const MatrixXd& X, const MatrixXd& Y) {
  if (X.cols() != Y.cols()) throw std::invalid_argument("mmd: sample dimensionality differs");
  if (X.rows() < 2 || Y.rows() < 2) throw std::invalid_argument("mmd: need at least 2 samples per set");
  MatrixXd P(X.rows() + Y.rows(), X.cols());
  P << X, Y;
  return P;
}

double bandwidth_from(const MatrixXd& d2) {
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(d2.rows() * (d2.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < d2.rows(); ++i)
    for (Eigen::Index j = i + 1; j < d2.rows(); ++j) dist.push_back(std::sqrt(d2(i, j)));
  const double med = stats::median(dist);
  return med > 0.0 ? med : 1.0;
}

}  // namespace

double median_heuristic_bandwidth(const MatrixXd& X, const MatrixXd& Y) {
  return bandwidth_from(squared_distances(stack(X, Y)));
}

double mmd(const MatrixXd& X, const MatrixXd& Y) {
  const MatrixXd P = stack(X, Y);
  const MatrixXd d2 = squared_distances(P);
  const double sigma = bandwidth_from(d2);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  const auto nx = X.rows(), ny = Y.rows();
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < nx; ++j) kxx += std::exp(-d2(i, j) * inv);
  for (Eigen::Index i = 0; i < ny; ++i)
    for (Eigen::Index j = 0; j < ny; ++j) kyy += std::exp(-d2(nx + i, nx + j) * inv);
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < ny; ++j) kxy += std::exp(-d2(i, nx + j) * inv);
  const double v = kxx / static_cast<double>(nx * nx) + kyy / static_cast<double>(ny * ny) -
                   2.0 * kxy / static_cast<double>(nx * ny);
  return std::max(0.0, v);
}

double image_mi(std::span<const float> x, std::span<const float> y, int bins) {
  if (x.size() != y.size()) throw std::invalid_argument("image_mi: images differ in size");
  if (bins < 2) throw std::invalid_argument("image_mi: bins must be at least 2");
  auto to_bins = [bins](std::span<const float> v) {
    std::vector<int> b(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double c = std::clamp(static_cast<double>(v[i]), 0.0, 1.0);
      b[i] = std::min(bins - 1, static_cast<int>(c * bins));
    }
    return b;
  };
  const auto bx = to_bins(x), by = to_bins(y);
  const double hx = stats::entropy_of_bins(bx, bins);
  const double hy = stats::entropy_of_bins(by, bins);
  if (hx <= 0.0 || hy <= 0.0) return 0.0;
  const double i = stats::mutual_information_of_bins(bx, bins, by, bins);
  return std::clamp(i / std::sqrt(hx * hy), 0.0, 1.0);
}

ClassificationScores classification_scores(std::span<const double> y_pred, std::span<const int> y_true) {
  if (y_pred.size() != y_true.size() || y_pred.empty())
    throw std::invalid_argument("classification_scores: predictions and labels must be nonempty and aligned");
  ClassificationScores out;
  std::size_t correct = 0, pos = 0;
  for (std::size_t i = 0; i < y_pred.size(); ++i) {
    correct += ((y_pred[i] >= 0.5 ? 1 : 0) == y_true[i]) ? 1 : 0;
    pos += y_true[i] ? 1 : 0;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(y_pred.size());
  const std::size_t neg = y_pred.size() - pos;
  if (pos == 0 || neg == 0) return out;
  const auto r = stats::ranks(y_pred);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i)
    if (y_true[i]) rank_sum += r[i];
  const double u = rank_sum - static_cast<double>(pos) * static_cast<double>(pos + 1) / 2.0;
  out.auc = u / (static_cast<double>(pos) * static_cast<double>(neg));
  return out;
}

std::string to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["modularity"] = r.modularity;
  j["mig"] = r.mig;
  j["sap"] = r.sap;
  j["scc"] = r.scc;
  nlohmann::ordered_json interp = nlohmann::ordered_json::object();
  for (const auto& [name, v] : r.interpretability) interp[name] = v ? nlohmann::ordered_json(*v) : nullptr;
  j["interpretability"] = interp;
  if (!r.scc_mapped.empty()) {
    nlohmann::ordered_json sm = nlohmann::ordered_json::object();
    for (const auto& [name, v] : r.scc_mapped) sm[name] = v;
    j["scc_mapped"] = sm;
  }
  j["mmd"] = r.mmd;
  j["image_mi"] = r.image_mi;
  j["accuracy"] = r.accuracy;
  j["auc"] = r.auc ? nlohmann::ordered_json(*r.auc) : nullptr;
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricsReport r;
  r.modularity = j.at("modularity").get<double>();
  r.mig = j.at("mig").get<double>();
  r.sap = j.at("sap").get<double>();
  r.scc = j.at("scc").get<double>();
  for (const auto& [name, v] : j.at("interpretability").items())
    r.interpretability[name] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  if (j.contains("scc_mapped"))
    for (const auto& [name, v] : j.at("scc_mapped").items()) r.scc_mapped[name] = v.get<double>();
  r.mmd = j.at("mmd").get<double>();
  r.image_mi = j.at("image_mi").get<double>();
  r.accuracy = j.at("accuracy").get<double>();
  if (!j.at("auc").is_null()) r.auc = j.at("auc").get<double>();
  return r;
}

double mean_interpretability(const MetricsReport& report) {
  double total = 0.0;
  int n = 0;
  for (const auto& [name, v] : report.interpretability)
    if (v) {
      total += *v;
      ++n;
    }
  return n ? total / n : 0.0;
}

}  // namespace attrivae::metrics
