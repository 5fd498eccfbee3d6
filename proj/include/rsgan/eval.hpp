#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsgan/data.hpp"
#include "rsgan/discriminator.hpp"
#include "rsgan/generator.hpp"
#include "rsgan/hetgraph.hpp"

namespace rsgan {

// ================================================================
// per-list metrics; `relevant` must be ascending
// ================================================================

/// |top-k intersect relevant| / k. The denominator stays k for short lists.
double precision_at_k(std::span<const std::int32_t> ranked, std::span<const std::int32_t> relevant, std::size_t k);

/// |top-k intersect relevant| / |relevant|; nullopt when nothing is relevant.
std::optional<double> recall_at_k(std::span<const std::int32_t> ranked, std::span<const std::int32_t> relevant,
                                  std::size_t k);

/// Binary-relevance NDCG with the ideal list truncated at min(k, |relevant|).
std::optional<double> ndcg_at_k(std::span<const std::int32_t> ranked, std::span<const std::int32_t> relevant,
                                std::size_t k);

struct MetricValues {
    double precision = 0.0;
    double recall = 0.0;
    double ndcg = 0.0;
};

struct MetricReport {
    std::vector<int> ks;
    std::map<int, MetricValues> at;
    std::size_t users = 0;

    bool empty() const { return users == 0; }
    const MetricValues& operator[](int k) const { return at.at(k); }
};

// ================================================================
// ranking evaluation
// ================================================================

enum class Target { Validation, Test };

/// Returns the score of every candidate for one user.
using Scorer = std::function<VectorXr(UserId)>;

struct RankingTask {
    UserList users;                                         // evaluated in this order
    std::function<ItemList(UserId)> exclude;                // ascending
    std::function<std::span<const std::int32_t>(UserId)> relevant;  // ascending
};

/// Averages metrics over users with a non-empty relevant set. Users are
/// scored in parallel when threads > 1; the reduction runs in user order.
MetricReport evaluate(const Scorer& scorer, const RankingTask& task, const std::vector<int>& ks, int threads = 1);

/// Test target: candidates exclude train and validation items; relevant =
/// test items. Validation target: candidates exclude train items; relevant
/// = validation items.
RankingTask ranking_task(const FoldSplit& fold, Target target, std::optional<UserList> users = std::nullopt);

MetricReport evaluate_ranking(const DiscriminatorParams& d, const FoldSplit& fold, Target target = Target::Test,
                              const std::vector<int>& ks = {10, 20}, int threads = 1);

/// evaluate_ranking restricted to cold_start_users; an empty report means no cold users.
MetricReport evaluate_cold_start(const DiscriminatorParams& d, const FoldSplit& fold, int max_feedback = 10,
                                 const std::vector<int>& ks = {10, 20}, int threads = 1);

/// Ranks users by the noise-free friend distribution, excluding self and the
/// user's seeded friends, against held-out followees.
MetricReport link_prediction_eval(const GeneratorParams& g, const SeededFriendSet& seeds,
                                  const SocialGraph& heldout, const std::vector<int>& ks = {10}, int threads = 1);

/// Unweighted mean over folds of each metric; `users` is the total. Reports
/// without users are skipped. All inputs must share the same cut-offs.
MetricReport mean_report(std::span<const MetricReport> reports);

// ================================================================
// reliable network
// ================================================================

struct ReliableNetwork {
    std::vector<UserList> friends;                 // per user, by descending probability
    std::vector<std::vector<double>> probability;
    std::vector<int> followers;                    // in-degree per user
    std::map<int, int> follower_histogram;         // follower count -> users with that count

    std::size_t num_edges() const;
};

/// Top-T users of each noise-free friend distribution (ties to lower id).
ReliableNetwork export_reliable_network(const GeneratorParams& g, const SeededFriendSet& seeds, int top_t = 20);

/// Builds the network from explicit distributions (one row per user).
ReliableNetwork reliable_network_from(const std::vector<VectorXr>& distributions, int top_t);

struct OverlapStats {
    std::optional<double> seed_retention;      // nullopt when there are no seeded pairs
    std::optional<double> explicit_retention;  // nullopt when there are no explicit pairs
};

OverlapStats overlap_stats(const ReliableNetwork& reliable, const SeededFriendSet& seeds,
                           const SocialGraph& explicit_links);

// ================================================================
// report files
// ================================================================

/// Rows `metric@K`, one column per model.
void write_report_tsv(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, MetricReport>>& reports);
void write_report_json(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, MetricReport>>& reports);
void write_follower_histogram(const std::filesystem::path& path, const ReliableNetwork& network);
void write_reliable_edges(const std::filesystem::path& path, const Dataset& dataset, const ReliableNetwork& network);

}  // namespace rsgan
