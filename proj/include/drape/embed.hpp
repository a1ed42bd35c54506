#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace drape {

// "chosen is more similar to reference than rejected".
struct Triplet {
  int reference = 0;
  int chosen = 0;
  int rejected = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct Embedding {
  Eigen::MatrixXd points;  // n_items x dims
  double loss = 0.0;        // mean log-likelihood of the triplets (<= 0)
  std::vector<double> history;  // objective after each accepted iteration
  int restart = 0;              // which restart won
};

struct TsteOptions {
  double learning_rate = 0.1;
  int iterations = 2000;
  double alpha = 1.0;  // Student-t degrees of freedom
  int restarts = 5;
  std::uint64_t seed = 0;
};

// Mean over triplets of log p, p = k(r,c) / (k(r,c) + k(r,j)),
// k = (1 + |x-y|^2/alpha)^(-(alpha+1)/2).
double tste_objective(const Eigen::MatrixXd& points, std::span<const Triplet> triplets, double alpha,
                      Eigen::MatrixXd* gradient = nullptr);

/// t-distributed stochastic triplet embedding by full-batch gradient ascent
/// with backtracking (steps that lower the objective are halved and retried),
/// keeping the best of the restarts. Throws std::runtime_error carrying the
/// iteration index if the objective becomes non-finite.
Embedding tste_embed(std::span<const Triplet> triplets, int n_items, int dims, const TsteOptions& opt = {});

// Fraction of triplets the embedding satisfies; exact ties count 0.5.
double triplet_agreement(const Eigen::MatrixXd& points, std::span<const Triplet> triplets);
double triplet_agreement(const Embedding& e, std::span<const Triplet> triplets);

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points);

// Every (reference, unordered pair) whose distances differ, oriented by d.
std::vector<Triplet> consistent_triplets(const Eigen::MatrixXd& d);

/// Random triplets (distinct indices) answered from d, each answer flipped
/// with probability flip_probability. Exact ties are skipped.
std::vector<Triplet> synthetic_triplets(const Eigen::MatrixXd& d, int count, double flip_probability,
                                        std::uint64_t seed);

struct RankCorrelationReport {
  std::vector<double> per_material;  // NaN where excluded
  std::vector<bool> flagged;         // constant distance row
  double mean = 0.0;
  double stddev = 0.0;  // sample std over included materials
  int included = 0;
};

/// Per material i, Spearman r between {ref(i,j)} and {cand(i,j)} over j != i.
RankCorrelationReport rank_correlation_report(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& candidate);

struct CorrelationTable {
  std::optional<RankCorrelationReport> gt_parameter, gt_metric, estimated_parameter, estimated_metric;
};
// 2x2 Markdown grid: rows GT / estimated parameters, columns parameter distance / similarity metric.
std::string correlation_table_markdown(const CorrelationTable& t);

void write_triplets_csv(std::ostream& out, std::span<const Triplet> triplets);
std::vector<Triplet> read_triplets_csv(std::istream& in);  // header ref,chosen,rejected
void write_embedding_csv(std::ostream& out, const Embedding& e, const std::vector<std::string>& labels = {});

void to_json(nlohmann::json& j, const RankCorrelationReport& r);
void to_json(nlohmann::json& j, const TsteOptions& o);
void from_json(const nlohmann::json& j, TsteOptions& o);

}  // namespace drape
