#include "rsgan/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string_view>

#include "rsgan/random.hpp"

namespace rsgan {

namespace {

std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    return in;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        cols.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return cols;
}

// Strips trailing CR and reports whether the line carries data.
bool data_line(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') return false;
    return line.find_first_not_of(" \t") != std::string::npos;
}

ParseError parse_error(const std::filesystem::path& path, std::size_t lineno, const std::string& why) {
    return ParseError(path.string() + ":" + std::to_string(lineno) + ": " + why);
}

}  // namespace

// ================================================================
// interactions
// ================================================================

InteractionLoad load_interactions(const std::filesystem::path& path, double rating_threshold) {
    auto in = open_for_read(path);

    struct Entry {
        InteractionRecord record;
        bool implicit;
    };
    std::vector<Entry> entries;
    std::unordered_map<std::string, std::size_t> position;  // "user\titem" -> entry
    InteractionLoad load;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!data_line(line)) continue;
        auto cols = split_tabs(line);
        if (cols.size() < 2 || cols.size() > 3)
            throw parse_error(path, lineno, "expected user<TAB>item[<TAB>rating]");
        if (cols[0].empty() || cols[1].empty()) throw parse_error(path, lineno, "empty id");

        bool implicit = cols.size() == 2;
        double rating = 1.0;
        if (!implicit) {
            auto text = cols[2];
            while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), rating);
            if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(rating))
                throw parse_error(path, lineno, "bad rating '" + std::string(cols[2]) + "'");
        }
        ++load.lines;

        std::string key;
        key.reserve(cols[0].size() + cols[1].size() + 1);
        key.append(cols[0]).push_back('\t');
        key.append(cols[1]);
        auto [it, inserted] = position.try_emplace(std::move(key), entries.size());
        if (inserted) {
            entries.push_back({{std::string(cols[0]), std::string(cols[1]), rating}, implicit});
        } else {
            ++load.duplicates;
            Entry& e = entries[it->second];
            e.record.rating = std::max(e.record.rating, rating);
            e.implicit = e.implicit && implicit;
        }
    }

    for (auto& e : entries) {
        if (e.implicit || e.record.rating >= rating_threshold)
            load.records.push_back(std::move(e.record));
        else
            ++load.below_threshold;
    }
    if (load.records.empty()) throw EmptyDatasetError("no interactions survive in " + path.string());
    return load;
}

std::int32_t IdIndex::intern(const std::string& raw) {
    auto [it, inserted] = ids_.try_emplace(raw, static_cast<std::int32_t>(names_.size()));
    if (inserted) names_.push_back(raw);
    return it->second;
}

std::int32_t IdIndex::find(const std::string& raw) const {
    auto it = ids_.find(raw);
    return it == ids_.end() ? -1 : it->second;
}

SparseFeedback feedback_matrix(const std::vector<ItemList>& per_user, std::int32_t num_items) {
    std::vector<Eigen::Triplet<double, std::int32_t>> triplets;
    for (std::size_t u = 0; u < per_user.size(); ++u)
        for (ItemId i : per_user[u]) triplets.emplace_back(static_cast<std::int32_t>(u), i, 1.0);
    SparseFeedback r(static_cast<Eigen::Index>(per_user.size()), num_items);
    // Duplicates would sum above 1; callers pass sets.
    r.setFromTriplets(triplets.begin(), triplets.end());
    r.makeCompressed();
    return r;
}

Dataset build_dataset(const std::vector<InteractionRecord>& records) {
    if (records.empty()) throw EmptyDatasetError("cannot build a dataset from zero records");
    Dataset ds;
    std::set<std::pair<UserId, ItemId>> seen;
    for (const auto& r : records) {
        UserId u = ds.users.intern(r.user);
        ItemId i = ds.items.intern(r.item);
        if (seen.emplace(u, i).second) ds.interactions.emplace_back(u, i);
    }
    ds.user_items.assign(ds.num_users(), {});
    for (auto [u, i] : ds.interactions) ds.user_items[u].push_back(i);
    for (auto& items : ds.user_items) std::sort(items.begin(), items.end());
    ds.feedback = feedback_matrix(ds.user_items, ds.num_items());
    return ds;
}

// ================================================================
// social graph
// ================================================================

SocialGraph make_social_graph(std::int32_t num_users, std::vector<std::pair<UserId, UserId>> edges) {
    SocialGraph g;
    g.num_users = num_users;
    g.followees.assign(num_users, {});
    std::set<std::pair<UserId, UserId>> seen;
    for (auto e : edges) {
        if (e.first == e.second) continue;
        if (e.first < 0 || e.second < 0 || e.first >= num_users || e.second >= num_users)
            throw Error("social edge endpoint out of range");
        if (!seen.insert(e).second) continue;
        g.edges.push_back(e);
        g.followees[e.first].push_back(e.second);
    }
    for (auto& f : g.followees) std::sort(f.begin(), f.end());
    return g;
}

std::vector<UserList> SocialGraph::undirected() const {
    std::vector<UserList> adj(num_users);
    for (auto [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& n : adj) {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    return adj;
}

SocialLoad load_social(const std::filesystem::path& path, const Dataset& dataset) {
    auto in = open_for_read(path);
    SocialLoad load;
    std::set<std::pair<std::string, std::string>> seen;
    std::vector<std::pair<UserId, UserId>> edges;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!data_line(line)) continue;
        auto cols = split_tabs(line);
        if (cols.size() < 2 || cols.size() > 3)
            throw parse_error(path, lineno, "expected truster<TAB>trustee[<TAB>weight]");
        if (cols[0].empty() || cols[1].empty()) throw parse_error(path, lineno, "empty id");
        ++load.lines;
        if (cols[0] == cols[1]) {
            ++load.self_loops;
            continue;
        }
        if (!seen.emplace(std::string(cols[0]), std::string(cols[1])).second) {
            ++load.duplicates;
            continue;
        }
        ++load.relations;
        UserId a = dataset.users.find(std::string(cols[0]));
        UserId b = dataset.users.find(std::string(cols[1]));
        if (a < 0 || b < 0) {
            ++load.unknown_endpoints;
            continue;
        }
        edges.emplace_back(a, b);
    }
    load.graph = make_social_graph(dataset.num_users(), std::move(edges));
    return load;
}

std::pair<SocialGraph, SocialGraph> split_social_links(const SocialGraph& graph, double fraction,
                                                       std::uint64_t master_seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("link holdout fraction must be in [0, 1)");
    std::set<std::pair<UserId, UserId>> held;
    for (UserId u = 0; u < graph.num_users; ++u) {
        UserList f = graph.followees[u];
        if (f.size() < 2) continue;
        auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(f.size()) + 0.5));
        take = std::min(take, f.size() - 1);
        Rng rng = derive_rng(master_seed, Stream::LinkHoldout, {static_cast<std::uint64_t>(u)});
        shuffle(f, rng);
        for (std::size_t k = 0; k < take; ++k) held.emplace(u, f[k]);
    }
    std::vector<std::pair<UserId, UserId>> train_edges, held_edges;
    for (auto e : graph.edges) {
        if (held.count(e))
            held_edges.push_back(e);
        else if (!held.count({e.second, e.first}))
            train_edges.push_back(e);
    }
    return {make_social_graph(graph.num_users, std::move(train_edges)),
            make_social_graph(graph.num_users, std::move(held_edges))};
}

// ================================================================
// folds
// ================================================================

namespace {
std::size_t total(const std::vector<ItemList>& lists) {
    std::size_t s = 0;
    for (const auto& l : lists) s += l.size();
    return s;
}
}  // namespace

std::size_t FoldSplit::train_size() const { return total(train); }
std::size_t FoldSplit::validation_size() const { return total(validation); }
std::size_t FoldSplit::test_size() const { return total(test); }

ItemList FoldSplit::known_items(UserId u) const {
    ItemList out;
    out.reserve(train[u].size() + validation[u].size());
    std::merge(train[u].begin(), train[u].end(), validation[u].begin(), validation[u].end(),
               std::back_inserter(out));
    return out;
}

std::vector<FoldSplit> split_folds(const Dataset& dataset, int k, std::uint64_t master_seed) {
    if (k < 2 || k > 20) throw ConfigError("fold count must be in [2, 20], got " + std::to_string(k));
    const std::int32_t m = dataset.num_users();
    std::vector<FoldSplit> folds(k);
    for (int f = 0; f < k; ++f) {
        folds[f].fold_id = f;
        folds[f].train.assign(m, {});
        folds[f].validation.assign(m, {});
        folds[f].test.assign(m, {});
    }

    for (UserId u = 0; u < m; ++u) {
        ItemList items = dataset.user_items[u];
        if (items.empty()) throw ConfigError("user '" + dataset.users.name(u) + "' has no interactions");
        Rng rng = derive_rng(master_seed, Stream::Folds, {static_cast<std::uint64_t>(u)});
        shuffle(items, rng);
        const auto offset = uniform_index(rng, static_cast<std::uint64_t>(k));

        std::vector<ItemList> shards(k);
        for (std::size_t p = 0; p < items.size(); ++p) shards[(p + offset) % k].push_back(items[p]);

        for (int f = 0; f < k; ++f) {
            ItemList test = shards[f];
            ItemList pool;
            for (int s = 0; s < k; ++s)
                if (s != f) pool.insert(pool.end(), shards[s].begin(), shards[s].end());
            if (pool.empty()) {
                pool.push_back(test.back());
                test.pop_back();
            }
            const std::size_t n_val = pool.size() / 10;
            ItemList val(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_val));
            ItemList train(pool.begin() + static_cast<std::ptrdiff_t>(n_val), pool.end());
            std::sort(test.begin(), test.end());
            std::sort(val.begin(), val.end());
            std::sort(train.begin(), train.end());
            folds[f].test[u] = std::move(test);
            folds[f].validation[u] = std::move(val);
            folds[f].train[u] = std::move(train);
        }
    }
    return folds;
}

UserList cold_start_users(const FoldSplit& fold, int max_feedback) {
    UserList out;
    for (UserId u = 0; u < fold.num_users(); ++u)
        if (static_cast<int>(fold.train[u].size()) < max_feedback) out.push_back(u);
    return out;
}

void write_fold_manifest(const std::filesystem::path& path, const Dataset& dataset,
                         const std::vector<FoldSplit>& folds) {
    auto out = open_for_write(path);
    out << "fold\tsplit\tuser\titem\n";
    for (const auto& fold : folds) {
        auto emit = [&](const char* split, const std::vector<ItemList>& lists) {
            for (UserId u = 0; u < static_cast<UserId>(lists.size()); ++u)
                for (ItemId i : lists[u])
                    out << fold.fold_id << '\t' << split << '\t' << dataset.users.name(u) << '\t'
                        << dataset.items.name(i) << '\n';
        };
        emit("train", fold.train);
        emit("validation", fold.validation);
        emit("test", fold.test);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<FoldSplit> read_fold_manifest(const std::filesystem::path& path, const Dataset& dataset) {
    auto in = open_for_read(path);
    std::map<int, FoldSplit> folds;
    const std::int32_t m = dataset.num_users();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!data_line(line)) continue;
        if (lineno == 1 && line.rfind("fold\t", 0) == 0) continue;
        auto cols = split_tabs(line);
        if (cols.size() != 4) throw parse_error(path, lineno, "expected fold<TAB>split<TAB>user<TAB>item");
        int f = 0;
        auto [ptr, ec] = std::from_chars(cols[0].data(), cols[0].data() + cols[0].size(), f);
        if (ec != std::errc{} || ptr != cols[0].data() + cols[0].size() || f < 0)
            throw parse_error(path, lineno, "bad fold id");
        UserId u = dataset.users.find(std::string(cols[2]));
        ItemId i = dataset.items.find(std::string(cols[3]));
        if (u < 0 || i < 0) throw parse_error(path, lineno, "unknown user or item");
        auto [it, inserted] = folds.try_emplace(f);
        FoldSplit& fold = it->second;
        if (inserted) {
            fold.fold_id = f;
            fold.train.assign(m, {});
            fold.validation.assign(m, {});
            fold.test.assign(m, {});
        }
        if (cols[1] == "train")
            fold.train[u].push_back(i);
        else if (cols[1] == "validation")
            fold.validation[u].push_back(i);
        else if (cols[1] == "test")
            fold.test[u].push_back(i);
        else
            throw parse_error(path, lineno, "unknown split '" + std::string(cols[1]) + "'");
    }
    std::vector<FoldSplit> result;
    for (auto& [f, fold] : folds) {
        for (auto* lists : {&fold.train, &fold.validation, &fold.test})
            for (auto& l : *lists) std::sort(l.begin(), l.end());
        result.push_back(std::move(fold));
    }
    return result;
}

void write_interactions(const std::filesystem::path& path, const Dataset& dataset) {
    auto out = open_for_write(path);
    for (auto [u, i] : dataset.interactions)
        out << dataset.users.name(u) << '\t' << dataset.items.name(i) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

void write_social(const std::filesystem::path& path, const Dataset& dataset, const SocialGraph& graph) {
    auto out = open_for_write(path);
    for (auto [a, b] : graph.edges) out << dataset.users.name(a) << '\t' << dataset.users.name(b) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace rsgan
