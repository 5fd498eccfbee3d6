#include "rsgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <thread>

#include "json.hpp"

namespace rsgan {

namespace {

std::size_t hits_in_top(std::span<const std::int32_t> ranked, std::span<const std::int32_t> relevant, std::size_t k) {
    std::size_t hits = 0;
    const std::size_t n = std::min(k, ranked.size());
    for (std::size_t p = 0; p < n; ++p)
        if (std::binary_search(relevant.begin(), relevant.end(), ranked[p])) ++hits;
    return hits;
}

}  // namespace

double precision_at_k(std::span<const std::int32_t> ranked, std::span<const std::int32_t> relevant, std::size_t k) {
    if (k == 0) throw ConfigError("precision@k needs k >= 1");
    return static_cast<double>(hits_in_top(ranked, relevant, k)) / static_cast<double>(k);
}

std::optional<double> recall_at_k(std::span<const std::int32_t> ranked, std::span<const std::int32_t> relevant,
                                  std::size_t k) {
    if (relevant.empty()) return std::nullopt;
    return static_cast<double>(hits_in_top(ranked, relevant, k)) / static_cast<double>(relevant.size());
}

std::optional<double> ndcg_at_k(std::span<const std::int32_t> ranked, std::span<const std::int32_t> relevant,
                                std::size_t k) {
    if (relevant.empty()) return std::nullopt;
    double dcg = 0.0;
    const std::size_t n = std::min(k, ranked.size());
    for (std::size_t p = 0; p < n; ++p)
        if (std::binary_search(relevant.begin(), relevant.end(), ranked[p])) dcg += 1.0 / std::log2(p + 2.0);
    double idcg = 0.0;
    const std::size_t ideal = std::min(k, relevant.size());
    for (std::size_t p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(p + 2.0);
    return dcg / idcg;
}

// ================================================================
// ranking evaluation
// ================================================================

MetricReport evaluate(const Scorer& scorer, const RankingTask& task, const std::vector<int>& ks, int threads) {
    if (ks.empty()) throw ConfigError("evaluate: no cut-offs requested");
    const int k_max = *std::max_element(ks.begin(), ks.end());
    if (k_max < 1) throw ConfigError("evaluate: cut-offs must be >= 1");

    const std::size_t n_users = task.users.size();
    // Per user: values for each k, or empty when the user has nothing relevant.
    std::vector<std::vector<MetricValues>> per_user(n_users);

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const UserId u = task.users[idx];
            auto relevant = task.relevant(u);
            if (relevant.empty()) continue;
            const ItemList exclude = task.exclude(u);
            const ItemList ranked = top_k(scorer(u), static_cast<std::size_t>(k_max), exclude);
            auto& out = per_user[idx];
            for (int k : ks) {
                const auto kk = static_cast<std::size_t>(k);
                out.push_back({precision_at_k(ranked, relevant, kk), *recall_at_k(ranked, relevant, kk),
                               *ndcg_at_k(ranked, relevant, kk)});
            }
        }
    };

    const auto n_threads = static_cast<std::size_t>(std::max(1, threads));
    if (n_threads == 1 || n_users < 2) {
        work(0, n_users);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n_users + n_threads - 1) / n_threads;
        for (std::size_t t = 0; t < n_threads; ++t) {
            const std::size_t b = t * chunk, e = std::min(n_users, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }

    MetricReport report;
    report.ks = ks;
    for (int k : ks) report.at[k] = {};
    for (const auto& values : per_user) {
        if (values.empty()) continue;
        ++report.users;
        for (std::size_t c = 0; c < ks.size(); ++c) {
            auto& acc = report.at[ks[c]];
            acc.precision += values[c].precision;
            acc.recall += values[c].recall;
            acc.ndcg += values[c].ndcg;
        }
    }
    if (report.users > 0) {
        const auto n = static_cast<double>(report.users);
        for (auto& [k, v] : report.at) {
            v.precision /= n;
            v.recall /= n;
            v.ndcg /= n;
        }
    }
    return report;
}

RankingTask ranking_task(const FoldSplit& fold, Target target, std::optional<UserList> users) {
    RankingTask task;
    if (users) {
        task.users = std::move(*users);
    } else {
        task.users.resize(static_cast<std::size_t>(fold.num_users()));
        for (UserId u = 0; u < fold.num_users(); ++u) task.users[u] = u;
    }
    if (target == Target::Test) {
        task.exclude = [&fold](UserId u) { return fold.known_items(u); };
        task.relevant = [&fold](UserId u) { return std::span<const std::int32_t>(fold.test[u]); };
    } else {
        task.exclude = [&fold](UserId u) { return fold.train[u]; };
        task.relevant = [&fold](UserId u) { return std::span<const std::int32_t>(fold.validation[u]); };
    }
    return task;
}

MetricReport evaluate_ranking(const DiscriminatorParams& d, const FoldSplit& fold, Target target,
                              const std::vector<int>& ks, int threads) {
    return evaluate([&d](UserId u) { return score_all(d, u); }, ranking_task(fold, target), ks, threads);
}

MetricReport evaluate_cold_start(const DiscriminatorParams& d, const FoldSplit& fold, int max_feedback,
                                 const std::vector<int>& ks, int threads) {
    return evaluate([&d](UserId u) { return score_all(d, u); },
                    ranking_task(fold, Target::Test, cold_start_users(fold, max_feedback)), ks, threads);
}

MetricReport link_prediction_eval(const GeneratorParams& g, const SeededFriendSet& seeds,
                                  const SocialGraph& heldout, const std::vector<int>& ks, int threads) {
    RankingTask task;
    for (UserId u = 0; u < heldout.num_users; ++u)
        if (!heldout.followees[u].empty()) task.users.push_back(u);
    task.exclude = [&seeds](UserId u) {
        ItemList ex = seeds.friends[u];
        ex.push_back(u);
        std::sort(ex.begin(), ex.end());
        ex.erase(std::unique(ex.begin(), ex.end()), ex.end());
        return ex;
    };
    task.relevant = [&heldout](UserId u) { return std::span<const std::int32_t>(heldout.followees[u]); };
    return evaluate([&](UserId u) { return friend_probabilities(g, seeds, u); }, task, ks, threads);
}

MetricReport mean_report(std::span<const MetricReport> reports) {
    MetricReport out;
    if (reports.empty()) return out;
    out.ks = reports.front().ks;
    for (int k : out.ks) out.at[k] = {};
    std::size_t used = 0;
    for (const auto& r : reports) {
        if (r.ks != out.ks) throw ConfigError("mean_report: reports disagree on cut-offs");
        if (r.empty()) continue;
        ++used;
        out.users += r.users;
        for (int k : out.ks) {
            out.at[k].precision += r[k].precision;
            out.at[k].recall += r[k].recall;
            out.at[k].ndcg += r[k].ndcg;
        }
    }
    if (used > 0)
        for (auto& [k, v] : out.at) {
            v.precision /= static_cast<double>(used);
            v.recall /= static_cast<double>(used);
            v.ndcg /= static_cast<double>(used);
        }
    return out;
}

// ================================================================
// reliable network
// ================================================================

std::size_t ReliableNetwork::num_edges() const {
    std::size_t n = 0;
    for (const auto& f : friends) n += f.size();
    return n;
}

ReliableNetwork reliable_network_from(const std::vector<VectorXr>& distributions, int top_t) {
    if (top_t < 1) throw ConfigError("top_t must be >= 1");
    const auto m = static_cast<UserId>(distributions.size());
    ReliableNetwork net;
    net.friends.resize(m);
    net.probability.resize(m);
    net.followers.assign(m, 0);
    for (UserId u = 0; u < m; ++u) {
        const ItemList top = top_k(distributions[u], static_cast<std::size_t>(top_t), std::span<const ItemId>(&u, 1));
        for (UserId v : top) {
            net.friends[u].push_back(v);
            net.probability[u].push_back(distributions[u][v]);
            ++net.followers[v];
        }
    }
    for (int c : net.followers) ++net.follower_histogram[c];
    return net;
}

ReliableNetwork export_reliable_network(const GeneratorParams& g, const SeededFriendSet& seeds, int top_t) {
    std::vector<VectorXr> dists;
    dists.reserve(static_cast<std::size_t>(g.num_users()));
    for (UserId u = 0; u < g.num_users(); ++u) dists.push_back(friend_probabilities(g, seeds, u));
    return reliable_network_from(dists, top_t);
}

OverlapStats overlap_stats(const ReliableNetwork& reliable, const SeededFriendSet& seeds,
                           const SocialGraph& explicit_links) {
    auto contains = [&](UserId u, UserId v) {
        if (u >= static_cast<UserId>(reliable.friends.size())) return false;
        const auto& f = reliable.friends[u];
        return std::find(f.begin(), f.end(), v) != f.end();
    };
    OverlapStats stats;
    std::size_t total = 0, kept = 0;
    for (UserId u = 0; u < static_cast<UserId>(seeds.friends.size()); ++u)
        for (UserId v : seeds.friends[u]) {
            ++total;
            kept += contains(u, v);
        }
    if (total) stats.seed_retention = static_cast<double>(kept) / static_cast<double>(total);

    total = kept = 0;
    for (auto [u, v] : explicit_links.edges) {
        ++total;
        kept += contains(u, v);
    }
    if (total) stats.explicit_retention = static_cast<double>(kept) / static_cast<double>(total);
    return stats;
}

// ================================================================
// report files
// ================================================================

namespace {
std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}
}  // namespace

void write_report_tsv(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, MetricReport>>& reports) {
    auto out = open_out(path);
    out << "metric";
    for (const auto& [name, r] : reports) out << '\t' << name;
    out << '\n';
    if (reports.empty()) return;
    out << std::fixed << std::setprecision(8);
    for (int k : reports.front().second.ks) {
        for (const char* metric : {"precision", "recall", "ndcg"}) {
            out << metric << '@' << k;
            for (const auto& [name, r] : reports) {
                const auto it = r.at.find(k);
                if (r.empty() || it == r.at.end()) {
                    out << "\tNA";
                    continue;
                }
                const MetricValues& v = it->second;
                const double x = metric[0] == 'p' ? v.precision : metric[0] == 'r' ? v.recall : v.ndcg;
                out << '\t' << x;
            }
            out << '\n';
        }
    }
    out << "users";
    for (const auto& [name, r] : reports) out << '\t' << r.users;
    out << '\n';
}

void write_report_json(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, MetricReport>>& reports) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const auto& [name, r] : reports) {
        nlohmann::ordered_json entry;
        entry["users"] = r.users;
        entry["ks"] = r.ks;
        nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
        for (const auto& [k, v] : r.at)
            metrics[std::to_string(k)] = {{"precision", v.precision}, {"recall", v.recall}, {"ndcg", v.ndcg}};
        entry["metrics"] = metrics;
        doc[name] = entry;
    }
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

void write_follower_histogram(const std::filesystem::path& path, const ReliableNetwork& network) {
    auto out = open_out(path);
    out << "follower_count\tnum_users\n";
    for (auto [count, users] : network.follower_histogram) out << count << '\t' << users << '\n';
}

void write_reliable_edges(const std::filesystem::path& path, const Dataset& dataset, const ReliableNetwork& network) {
    auto out = open_out(path);
    out << std::setprecision(17);
    for (UserId u = 0; u < static_cast<UserId>(network.friends.size()); ++u)
        for (std::size_t r = 0; r < network.friends[u].size(); ++r)
            out << dataset.users.name(u) << '\t' << dataset.users.name(network.friends[u][r]) << '\t'
                << network.probability[u][r] << '\n';
}

}  // namespace rsgan
