#include "drape/embed.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "drape/error.hpp"
#include "drape/material.hpp"
#include "drape/rng.hpp"

namespace drape {

namespace {

void check_triplets(std::span<const Triplet> triplets, int n_items) {
  for (const auto& t : triplets) {
    for (int idx : {t.reference, t.chosen, t.rejected})
      if (idx < 0 || idx >= n_items) throw ConfigError("triplet index out of range");
    if (t.reference == t.chosen || t.reference == t.rejected || t.chosen == t.rejected)
      throw ConfigError("triplet indices must be distinct");
  }
}

}  // namespace

double tste_objective(const Eigen::MatrixXd& x, std::span<const Triplet> triplets, double alpha,
                      Eigen::MatrixXd* gradient) {
  if (triplets.empty()) throw ConfigError("tSTE needs at least one triplet");
  const double expo = -(alpha + 1.0) / 2.0;
  if (gradient) gradient->setZero(x.rows(), x.cols());
  double total = 0.0;
  for (const auto& t : triplets) {
    const Eigen::RowVectorXd drc = x.row(t.reference) - x.row(t.chosen);
    const Eigen::RowVectorXd drj = x.row(t.reference) - x.row(t.rejected);
    const double sc = drc.squaredNorm(), sj = drj.squaredNorm();
    const double lkc = expo * std::log1p(sc / alpha);
    const double lkj = expo * std::log1p(sj / alpha);
    const double m = std::max(lkc, lkj);
    const double log_p = lkc - (m + std::log(std::exp(lkc - m) + std::exp(lkj - m)));
    total += log_p;
    if (gradient) {
      const double q = 1.0 - std::exp(log_p);  // 1 - p
      // d log k / d s = expo / (alpha + s)
      const double cc = q * expo / (alpha + sc);
      const double cj = -q * expo / (alpha + sj);
      gradient->row(t.reference) += 2.0 * (cc * drc + cj * drj);
      gradient->row(t.chosen) -= 2.0 * cc * drc;
      gradient->row(t.rejected) -= 2.0 * cj * drj;
    }
  }
  const double n = static_cast<double>(triplets.size());
  if (gradient) *gradient /= n;
  return total / n;
}

Embedding tste_embed(std::span<const Triplet> triplets, int n_items, int dims, const TsteOptions& opt) {
  if (n_items < 3) throw ConfigError("tSTE needs at least 3 items");
  if (dims < 1) throw ConfigError("tSTE needs dims >= 1");
  if (!(opt.learning_rate > 0.0) || opt.iterations < 1 || opt.restarts < 1 || !(opt.alpha > 0.0))
    throw ConfigError("invalid tSTE options");
  check_triplets(triplets, n_items);

  Embedding best;
  best.loss = -std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < opt.restarts; ++restart) {
    auto rng = make_rng({opt.seed, static_cast<std::uint64_t>(restart), 0x54535445ULL});
    std::normal_distribution<double> normal(0.0, 0.1);
    Eigen::MatrixXd x(n_items, dims);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);

    Eigen::MatrixXd grad, trial_grad;
    double obj = tste_objective(x, triplets, opt.alpha, &grad);
    std::vector<double> history{obj};
    double step = opt.learning_rate;
    for (int it = 0; it < opt.iterations; ++it) {
      if (!std::isfinite(obj) || !grad.allFinite())
        throw std::runtime_error("tSTE diverged at iteration " + std::to_string(it));
      bool accepted = false;
      for (int halvings = 0; halvings < 40; ++halvings) {
        const Eigen::MatrixXd trial = x + step * grad;
        const double trial_obj = tste_objective(trial, triplets, opt.alpha, &trial_grad);
        if (std::isfinite(trial_obj) && trial_obj >= obj) {
          x = trial;
          obj = trial_obj;
          grad.swap(trial_grad);
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;  // no ascent direction left at machine precision
      history.push_back(obj);
      step = std::min(step * 1.1, 1e3 * opt.learning_rate);
    }
    if (obj > best.loss) {
      best.points = x;
      best.loss = obj;
      best.history = std::move(history);
      best.restart = restart;
    }
  }
  return best;
}

double triplet_agreement(const Eigen::MatrixXd& x, std::span<const Triplet> triplets) {
  if (triplets.empty()) return 0.0;
  double score = 0.0;
  for (const auto& t : triplets) {
    const double dc = (x.row(t.reference) - x.row(t.chosen)).squaredNorm();
    const double dj = (x.row(t.reference) - x.row(t.rejected)).squaredNorm();
    score += dc < dj ? 1.0 : (dc == dj ? 0.5 : 0.0);
  }
  return score / static_cast<double>(triplets.size());
}

double triplet_agreement(const Embedding& e, std::span<const Triplet> triplets) {
  check_triplets(triplets, static_cast<int>(e.points.rows()));
  return triplet_agreement(e.points, triplets);
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd d(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j) d(i, j) = (x.row(i) - x.row(j)).norm();
  return d;
}

std::vector<Triplet> consistent_triplets(const Eigen::MatrixXd& d) {
  std::vector<Triplet> out;
  const int n = static_cast<int>(d.rows());
  for (int r = 0; r < n; ++r)
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        if (a == r || b == r || d(r, a) == d(r, b)) continue;
        out.push_back(d(r, a) < d(r, b) ? Triplet{r, a, b} : Triplet{r, b, a});
      }
  return out;
}

std::vector<Triplet> synthetic_triplets(const Eigen::MatrixXd& d, int count, double flip_probability,
                                        std::uint64_t seed) {
  const int n = static_cast<int>(d.rows());
  if (n < 3 || d.cols() != d.rows()) throw ConfigError("synthetic triplets need a square matrix of >= 3 items");
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) throw ConfigError("flip probability must lie in [0,1]");
  auto rng = make_rng({seed, 0x54524950ULL});
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Triplet> out;
  long attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 1000L * (count + 1)) throw ConfigError("distance matrix has too many ties for triplets");
    const int r = pick(rng), a = pick(rng), b = pick(rng);
    if (r == a || r == b || a == b || d(r, a) == d(r, b)) continue;
    Triplet t = d(r, a) < d(r, b) ? Triplet{r, a, b} : Triplet{r, b, a};
    if (unit(rng) < flip_probability) std::swap(t.chosen, t.rejected);
    out.push_back(t);
  }
  return out;
}

RankCorrelationReport rank_correlation_report(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& candidate) {
  const auto n = reference.rows();
  if (n < 3) throw ConfigError("rank correlation needs at least 3 materials");
  if (reference.cols() != n || candidate.rows() != n || candidate.cols() != n)
    throw ConfigError("distance matrices must be square and of equal size");
  RankCorrelationReport rep;
  rep.per_material.assign(n, std::numeric_limits<double>::quiet_NaN());
  rep.flagged.assign(n, false);
  std::vector<double> included;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> a, b;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) {
        a.push_back(reference(i, j));
        b.push_back(candidate(i, j));
      }
    try {
      rep.per_material[i] = pearson(fractional_ranks(a), fractional_ranks(b));
      included.push_back(rep.per_material[i]);
    } catch (const std::domain_error&) {
      rep.flagged[i] = true;
    }
  }
  rep.included = static_cast<int>(included.size());
  if (included.empty()) throw ConfigError("every material has a constant distance row");
  for (double r : included) rep.mean += r;
  rep.mean /= static_cast<double>(included.size());
  if (included.size() > 1) {
    double ss = 0.0;
    for (double r : included) ss += (r - rep.mean) * (r - rep.mean);
    rep.stddev = std::sqrt(ss / static_cast<double>(included.size() - 1));
  }
  return rep;
}

std::string correlation_table_markdown(const CorrelationTable& t) {
  auto cell = [](const std::optional<RankCorrelationReport>& r) {
    if (!r) return std::string("n/a");
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3f ± %.2f", r->mean, r->stddev);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "| Parameters | Parameter distance | Similarity metric |\n";
  out << "|---|---:|---:|\n";
  out << "| Ground truth | " << cell(t.gt_parameter) << " | " << cell(t.gt_metric) << " |\n";
  out << "| Estimated | " << cell(t.estimated_parameter) << " | " << cell(t.estimated_metric) << " |\n";
  return out.str();
}

void write_triplets_csv(std::ostream& out, std::span<const Triplet> triplets) {
  out << "ref,chosen,rejected\n";
  for (const auto& t : triplets) out << t.reference << ',' << t.chosen << ',' << t.rejected << '\n';
}

std::vector<Triplet> read_triplets_csv(std::istream& in) {
  std::vector<Triplet> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ref,chosen,rejected") throw ConfigError("triplet CSV needs header ref,chosen,rejected");
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    Triplet t;
    char c1 = 0, c2 = 0;
    if (!(ls >> t.reference >> c1 >> t.chosen >> c2 >> t.rejected) || c1 != ',' || c2 != ',')
      throw ConfigError("malformed triplet on line " + std::to_string(line_no));
    out.push_back(t);
  }
  return out;
}

void write_embedding_csv(std::ostream& out, const Embedding& e, const std::vector<std::string>& labels) {
  out << "item";
  for (Eigen::Index d = 0; d < e.points.cols(); ++d) out << ",x" << d;
  out << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < e.points.rows(); ++i) {
    out << (static_cast<std::size_t>(i) < labels.size() ? labels[i] : std::to_string(i));
    for (Eigen::Index d = 0; d < e.points.cols(); ++d) out << ',' << e.points(i, d);
    out << '\n';
  }
}

void to_json(nlohmann::json& j, const RankCorrelationReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (double v : r.per_material) per.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  std::vector<bool> flagged(r.flagged.begin(), r.flagged.end());
  j = nlohmann::json{{"per_material", per}, {"flagged", flagged}, {"mean", r.mean},
                     {"std", r.stddev}, {"included", r.included}};
}

void to_json(nlohmann::json& j, const TsteOptions& o) {
  j = nlohmann::json{{"learning_rate", o.learning_rate}, {"iterations", o.iterations}, {"alpha", o.alpha},
                     {"restarts", o.restarts}, {"seed", o.seed}};
}

void from_json(const nlohmann::json& j, TsteOptions& o) {
  o = TsteOptions{};
  o.learning_rate = j.value("learning_rate", o.learning_rate);
  o.iterations = j.value("iterations", o.iterations);
  o.alpha = j.value("alpha", o.alpha);
  o.restarts = j.value("restarts", o.restarts);
  o.seed = j.value("seed", o.seed);
}

}  // namespace drape
