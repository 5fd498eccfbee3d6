#include "rsgan/hetgraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "rsgan/gumbel.hpp"
#include "rsgan/random.hpp"

namespace rsgan {

MetaPath MetaPath::parse(const std::string& text) {
    MetaPath mp;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, '-')) {
        if (tok == "U" || tok == "u")
            mp.pattern.push_back(NodeType::User);
        else if (tok == "I" || tok == "i")
            mp.pattern.push_back(NodeType::Item);
        else
            throw ConfigError("meta-path '" + text + "': unknown node type '" + tok + "'");
    }
    if (mp.pattern.size() < 2) throw ConfigError("meta-path '" + text + "' needs at least two nodes");
    if (mp.pattern.front() != NodeType::User || mp.pattern.back() != NodeType::User)
        throw ConfigError("meta-path '" + text + "' must start and end with U");
    for (std::size_t k = 1; k < mp.pattern.size(); ++k)
        if (mp.pattern[k] == NodeType::Item && mp.pattern[k - 1] == NodeType::Item)
            throw ConfigError("meta-path '" + text + "' has an item-item hop");
    return mp;
}

std::string MetaPath::str() const {
    std::string s;
    for (std::size_t k = 0; k < pattern.size(); ++k) {
        if (k) s += '-';
        s += pattern[k] == NodeType::User ? 'U' : 'I';
    }
    return s;
}

std::vector<MetaPath> default_meta_paths() {
    return {MetaPath::parse("U-U"), MetaPath::parse("U-I-U"), MetaPath::parse("U-U-I-U")};
}

std::size_t WalkCorpus::tokens() const {
    std::size_t t = 0;
    for (const auto& w : walks) t += w.size();
    return t;
}

// ================================================================
// walks
// ================================================================

WalkCorpus generate_walks(const std::vector<ItemList>& user_items, Eigen::Index num_items,
                          const SocialGraph& social, const std::vector<MetaPath>& paths, const WalkOptions& opts,
                          std::uint64_t master_seed) {
    if (opts.walks_per_node < 1) throw ConfigError("walks_per_node must be >= 1");
    if (opts.walk_length < 2) throw ConfigError("walk_length must be >= 2");
    const auto m = static_cast<UserId>(user_items.size());
    if (social.num_users != m) throw Error("generate_walks: social graph and feedback disagree on user count");

    std::vector<UserList> item_users(static_cast<std::size_t>(num_items));
    for (UserId u = 0; u < m; ++u)
        for (ItemId i : user_items[u]) item_users[i].push_back(u);
    const auto friends = social.undirected();

    WalkCorpus corpus;
    corpus.walks.reserve(static_cast<std::size_t>(m) * paths.size() * opts.walks_per_node);
    for (UserId start = 0; start < m; ++start) {
        for (std::size_t p = 0; p < paths.size(); ++p) {
            const auto& pattern = paths[p].pattern;
            for (int w = 0; w < opts.walks_per_node; ++w) {
                Rng rng = derive_rng(master_seed, Stream::Walks,
                                     {static_cast<std::uint64_t>(start), p, static_cast<std::uint64_t>(w)});
                UserList walk{start};
                std::int32_t node = start;
                std::size_t pos = 0;
                while (static_cast<int>(walk.size()) < opts.walk_length) {
                    if (pos + 1 == pattern.size()) pos = 0;  // last U doubles as the next cycle's first
                    const NodeType here = pattern[pos];
                    const NodeType next = pattern[pos + 1];
                    const std::vector<std::int32_t>* nbrs = nullptr;
                    if (here == NodeType::User)
                        nbrs = next == NodeType::User ? &friends[node] : &user_items[node];
                    else
                        nbrs = &item_users[node];
                    if (nbrs->empty()) break;
                    node = (*nbrs)[uniform_index(rng, nbrs->size())];
                    ++pos;
                    if (next == NodeType::User) walk.push_back(node);
                }
                corpus.walks.push_back(std::move(walk));
            }
        }
    }
    return corpus;
}

// ================================================================
// skip-gram
// ================================================================

MatrixXr train_skipgram(const WalkCorpus& corpus, Eigen::Index num_users, const SkipGramOptions& opts,
                        std::uint64_t master_seed) {
    if (opts.dim < 2) throw ConfigError("embedding dimension must be >= 2");
    if (opts.window < 1) throw ConfigError("window must be >= 1");
    if (opts.negatives < 1) throw ConfigError("negatives must be >= 1");
    if (opts.epochs < 0) throw ConfigError("epochs must be >= 0");
    const std::size_t total_tokens = corpus.tokens();
    if (total_tokens == 0) throw EmptyDatasetError("skip-gram: empty walk corpus");

    Rng rng = derive_rng(master_seed, Stream::SkipGram);
    MatrixXr input(num_users, opts.dim);
    for (Eigen::Index k = 0; k < input.size(); ++k) input.data()[k] = (uniform01(rng) - 0.5) / opts.dim;
    MatrixXr output = MatrixXr::Zero(num_users, opts.dim);

    std::vector<double> freq(static_cast<std::size_t>(num_users), 0.0);
    for (const auto& w : corpus.walks)
        for (UserId u : w) freq[u] += 1.0;
    for (double& f : freq) f = std::pow(f, 0.75);
    std::discrete_distribution<UserId> noise(freq.begin(), freq.end());

    const double budget = static_cast<double>(total_tokens) * std::max(opts.epochs, 1);
    double seen = 0.0;
    Eigen::RowVectorXd accum(opts.dim);

    auto update = [&](UserId center, UserId target, double label, double lr) {
        const double f = logistic(input.row(center).dot(output.row(target)));
        const double g = lr * (label - f);
        accum += g * output.row(target);
        output.row(target) += g * input.row(center);
    };

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        for (const auto& walk : corpus.walks) {
            const auto len = static_cast<std::ptrdiff_t>(walk.size());
            for (std::ptrdiff_t pos = 0; pos < len; ++pos, seen += 1.0) {
                const double lr = opts.lr * std::max(1e-4, 1.0 - seen / budget);
                const UserId center = walk[pos];
                const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, pos - opts.window);
                const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len - 1, pos + opts.window);
                for (std::ptrdiff_t c = lo; c <= hi; ++c) {
                    if (c == pos) continue;
                    const UserId context = walk[c];
                    accum.setZero();
                    update(center, context, 1.0, lr);
                    for (int k = 0; k < opts.negatives; ++k) {
                        const UserId neg = noise(rng);
                        if (neg == context) continue;
                        update(center, neg, 0.0, lr);
                    }
                    input.row(center) += accum;
                }
            }
        }
    }
    if (!input.allFinite()) throw NumericFault("skip-gram produced non-finite embeddings");
    return input;
}

// ================================================================
// seeded friends
// ================================================================

std::size_t SeededFriendSet::num_pairs() const {
    std::size_t n = 0;
    for (const auto& f : friends) n += f.size();
    return n;
}

SeededFriendSet select_seeded_friends(const MatrixXr& embedding, int k_seed, double min_sim) {
    if (k_seed < 1) throw ConfigError("k_seed must be >= 1");
    if (!(min_sim >= -1.0 && min_sim <= 1.0)) throw ConfigError("min_sim must be in [-1, 1]");
    const Eigen::Index m = embedding.rows();

    MatrixXr unit = embedding;
    for (Eigen::Index u = 0; u < m; ++u) {
        const double norm = unit.row(u).norm();
        if (norm > 0.0) unit.row(u) /= norm;
    }

    SeededFriendSet seeds;
    seeds.friends.assign(static_cast<std::size_t>(m), {});
    seeds.weight.assign(static_cast<std::size_t>(m), {});
    std::vector<UserId> order(static_cast<std::size_t>(m));
    for (Eigen::Index u = 0; u < m; ++u) {
        const VectorXr sim = unit * unit.row(u).transpose();
        order.clear();
        for (UserId v = 0; v < m; ++v)
            if (v != u && sim[v] >= min_sim) order.push_back(v);
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(k_seed), order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](UserId a, UserId b) { return sim[a] > sim[b] || (sim[a] == sim[b] && a < b); });
        for (std::size_t r = 0; r < k; ++r) {
            seeds.friends[u].push_back(order[r]);
            seeds.weight[u].push_back(sim[order[r]]);
        }
    }
    return seeds;
}

SeedLoad load_seeded_friends(const std::filesystem::path& path, const Dataset& dataset) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    SeedLoad load;
    const auto m = static_cast<std::size_t>(dataset.num_users());
    load.seeds.friends.assign(m, {});
    load.seeds.weight.assign(m, {});

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string a, b, w;
        if (!std::getline(ss, a, '\t') || !std::getline(ss, b, '\t') || a.empty() || b.empty())
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected user<TAB>friend");
        double weight = 1.0;
        if (std::getline(ss, w, '\t')) {
            try {
                weight = std::stod(w);
            } catch (const std::exception&) {
                throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad similarity");
            }
        }
        if (a == b) {
            ++load.self_pairs;
            continue;
        }
        const UserId u = dataset.users.find(a);
        const UserId v = dataset.users.find(b);
        if (u < 0 || v < 0) {
            ++load.unknown;
            continue;
        }
        auto& f = load.seeds.friends[u];
        if (std::find(f.begin(), f.end(), v) != f.end()) continue;
        f.push_back(v);
        load.seeds.weight[u].push_back(weight);
    }
    return load;
}

void write_seeded_friends(const std::filesystem::path& path, const Dataset& dataset, const SeededFriendSet& seeds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    for (UserId u = 0; u < static_cast<UserId>(seeds.friends.size()); ++u)
        for (std::size_t k = 0; k < seeds.friends[u].size(); ++k)
            out << dataset.users.name(u) << '\t' << dataset.users.name(seeds.friends[u][k]) << '\t'
                << seeds.weight[u][k] << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace rsgan
