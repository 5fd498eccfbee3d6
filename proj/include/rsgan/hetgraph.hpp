#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rsgan/data.hpp"
#include "rsgan/types.hpp"

namespace rsgan {

enum class NodeType { User, Item };

/// Alternating node-type pattern such as U-I-U; repeated cyclically during a walk.
struct MetaPath {
    std::vector<NodeType> pattern;

    /// Parses "U-I-U" style strings. Throws ConfigError on a malformed pattern.
    static MetaPath parse(const std::string& text);
    std::string str() const;
};

std::vector<MetaPath> default_meta_paths();

/// Walks over user ids only; item hops are traversed but not emitted.
struct WalkCorpus {
    std::vector<UserList> walks;
    std::size_t tokens() const;
};

struct WalkOptions {
    int walks_per_node = 10;
    int walk_length = 40;  // emitted users
};

/// For every user and meta-path, `walks_per_node` walks. Each hop picks
/// uniformly among neighbours of the next type (social edges are used
/// undirected). A walk stops early when no neighbour of the right type exists.
WalkCorpus generate_walks(const std::vector<ItemList>& user_items, Eigen::Index num_items,
                          const SocialGraph& social, const std::vector<MetaPath>& paths, const WalkOptions& opts,
                          std::uint64_t master_seed);

struct SkipGramOptions {
    int dim = 64;
    int window = 5;
    int negatives = 5;
    int epochs = 1;
    double lr = 0.025;
};

/// Skip-gram with negative sampling (unigram^0.75 noise), single-threaded
/// SGD. Returns the input vectors, m x dim.
MatrixXr train_skipgram(const WalkCorpus& corpus, Eigen::Index num_users, const SkipGramOptions& opts,
                        std::uint64_t master_seed);

struct SeededFriendSet {
    std::vector<UserList> friends;           // per user
    std::vector<std::vector<double>> weight; // similarity, parallel to `friends`

    Eigen::Index num_users() const { return static_cast<Eigen::Index>(friends.size()); }
    std::size_t num_pairs() const;
    bool empty() const { return num_pairs() == 0; }
};

/// Top-k users by cosine similarity, at least `min_sim`, never the user
/// itself; ties go to the lower id.
SeededFriendSet select_seeded_friends(const MatrixXr& embedding, int k_seed, double min_sim);

struct SeedLoad {
    SeededFriendSet seeds;
    std::size_t self_pairs = 0;
    std::size_t unknown = 0;
};

/// Reads `user<TAB>friend[<TAB>similarity]`. Self pairs and unknown ids are dropped and counted.
SeedLoad load_seeded_friends(const std::filesystem::path& path, const Dataset& dataset);
void write_seeded_friends(const std::filesystem::path& path, const Dataset& dataset, const SeededFriendSet& seeds);

}  // namespace rsgan
