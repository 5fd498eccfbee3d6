#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rsgan/types.hpp"

namespace rsgan {

struct InteractionRecord {
    std::string user;
    std::string item;
    double rating = 1.0;

    bool operator==(const InteractionRecord&) const = default;
};

struct InteractionLoad {
    std::vector<InteractionRecord> records;
    std::size_t lines = 0;            // non-comment, non-empty lines
    std::size_t duplicates = 0;       // repeated (user, item) pairs merged
    std::size_t below_threshold = 0;  // unique pairs dropped by the rating filter
};

/// Reads `user<TAB>item[<TAB>rating]` lines. Duplicated pairs keep their
/// maximum rating and their first position; a missing rating counts as an
/// implicit positive that always passes the threshold.
InteractionLoad load_interactions(const std::filesystem::path& path, double rating_threshold);

/// Bidirectional string <-> dense id index.
class IdIndex {
public:
    /// Returns the dense id, assigning the next one on first sight.
    std::int32_t intern(const std::string& raw);
    std::int32_t find(const std::string& raw) const;  // -1 when absent
    const std::string& name(std::int32_t id) const { return names_.at(id); }
    std::int32_t size() const { return static_cast<std::int32_t>(names_.size()); }

private:
    std::unordered_map<std::string, std::int32_t> ids_;
    std::vector<std::string> names_;
};

struct Dataset {
    IdIndex users;
    IdIndex items;
    SparseFeedback feedback;             // m x n, stored entries are 1
    std::vector<ItemList> user_items;    // ascending item ids, the support of `feedback`
    std::vector<std::pair<UserId, ItemId>> interactions;  // record order

    std::int32_t num_users() const { return users.size(); }
    std::int32_t num_items() const { return items.size(); }
    std::size_t num_interactions() const { return static_cast<std::size_t>(feedback.nonZeros()); }
};

/// Dense ids follow first appearance. Throws EmptyDatasetError on no records.
Dataset build_dataset(const std::vector<InteractionRecord>& records);

/// Builds an m x n binary matrix from per-user item lists.
SparseFeedback feedback_matrix(const std::vector<ItemList>& per_user, std::int32_t num_items);

// ================================================================
// social graph
// ================================================================

struct SocialGraph {
    std::int32_t num_users = 0;
    std::vector<std::pair<UserId, UserId>> edges;  // (truster, trustee), insertion order
    std::vector<UserList> followees;               // ascending per user

    std::size_t num_edges() const { return edges.size(); }
    /// Symmetrised neighbour lists, ascending.
    std::vector<UserList> undirected() const;
};

SocialGraph make_social_graph(std::int32_t num_users, std::vector<std::pair<UserId, UserId>> edges);

struct SocialLoad {
    SocialGraph graph;
    std::size_t lines = 0;
    std::size_t relations = 0;         // after dropping self-loops and duplicates
    std::size_t self_loops = 0;
    std::size_t duplicates = 0;
    std::size_t unknown_endpoints = 0; // relations naming a user absent from the dataset
};

/// Reads `truster<TAB>trustee[<TAB>weight]`; weights are ignored.
SocialLoad load_social(const std::filesystem::path& path, const Dataset& dataset);

/// Holds out round(fraction * |followees|) of every user's followees (at
/// least one is always kept). Both directions of a held-out pair are removed
/// from the returned training graph.
std::pair<SocialGraph, SocialGraph> split_social_links(const SocialGraph& graph, double fraction,
                                                       std::uint64_t master_seed);

// ================================================================
// folds
// ================================================================

struct FoldSplit {
    int fold_id = 0;
    std::vector<ItemList> train;       // per user, ascending
    std::vector<ItemList> validation;
    std::vector<ItemList> test;

    std::int32_t num_users() const { return static_cast<std::int32_t>(train.size()); }
    std::size_t train_size() const;
    std::size_t validation_size() const;
    std::size_t test_size() const;
    /// train + validation for one user, ascending: everything the model may see.
    ItemList known_items(UserId u) const;
};

/// Per-user stratified k-fold split. Each user's items are shuffled under a
/// seed derived from `master_seed` and dealt round-robin (from a random
/// offset) into k shards; fold i tests on shard i. floor(10%) of the
/// remaining pool becomes validation. A user never ends up with zero
/// training items.
std::vector<FoldSplit> split_folds(const Dataset& dataset, int k, std::uint64_t master_seed);

/// Users whose training count is strictly below `max_feedback`.
UserList cold_start_users(const FoldSplit& fold, int max_feedback);

/// TSV `fold<TAB>split<TAB>user<TAB>item` with raw ids and a header line.
void write_fold_manifest(const std::filesystem::path& path, const Dataset& dataset,
                         const std::vector<FoldSplit>& folds);
std::vector<FoldSplit> read_fold_manifest(const std::filesystem::path& path, const Dataset& dataset);

/// Writes `user<TAB>item` lines in record order; reloading with threshold 0
/// reproduces the same id assignment.
void write_interactions(const std::filesystem::path& path, const Dataset& dataset);
void write_social(const std::filesystem::path& path, const Dataset& dataset, const SocialGraph& graph);

}  // namespace rsgan
