#pragma once

// Shared fixtures and independent oracles for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <unistd.h>

#include "rsgan/data.hpp"
#include "rsgan/discriminator.hpp"
#include "rsgan/generator.hpp"
#include "rsgan/hetgraph.hpp"
#include "rsgan/eval.hpp"
#include "rsgan/random.hpp"
#include "rsgan/trainer.hpp"

namespace rsgan::testing {

// ================================================================
// planted-friend fixture: 20 users, 30 items
// ================================================================
//
// Users 2p and 2p+1 form pair p and share item block {3p, 3p+1, 3p+2}.
// User 2p trains on {3p, 3p+1}, user 2p+1 on {3p, 3p+2}; each holds out the
// block item only its partner consumed, so the partner is the one user whose
// items contain the held-out item. Two noise items per user are the shared
// first items of other blocks. Held-out items form the validation split; test is empty.
// Seeds are the partner plus two decoys from other pairs.

struct PlantedFixture {
    static constexpr UserId kUsers = 20;
    static constexpr ItemId kItems = 30;

    FoldSplit fold;
    SeededFriendSet seeds;
    std::vector<UserId> planted;  // partner per user
    std::vector<InteractionRecord> records;  // train and held-out, raw ids "u<k>", "i<k>"
    SocialGraph social;           // partner links, both directions
};

inline PlantedFixture planted_fixture() {
    PlantedFixture f;
    const UserId m = PlantedFixture::kUsers;
    f.fold.train.resize(m);
    f.fold.validation.resize(m);
    f.fold.test.resize(m);
    f.seeds.friends.resize(m);
    f.seeds.weight.resize(m);
    f.planted.resize(m);
    std::vector<std::pair<UserId, UserId>> edges;
    for (UserId u = 0; u < m; ++u) {
        const int p = u / 2;
        const UserId partner = u ^ 1;
        f.planted[u] = partner;
        const ItemId base = 3 * p;
        ItemList train = {base, u % 2 == 0 ? base + 1 : base + 2};
        const ItemId held = u % 2 == 0 ? base + 2 : base + 1;
        for (int k : {2, 4 + u % 2}) train.push_back(3 * ((p + k) % 10));
        std::sort(train.begin(), train.end());
        train.erase(std::unique(train.begin(), train.end()), train.end());
        f.fold.train[u] = train;
        f.fold.validation[u] = {held};
        for (ItemId i : train) f.records.push_back({"u" + std::to_string(u), "i" + std::to_string(i), 1.0});
        f.records.push_back({"u" + std::to_string(u), "i" + std::to_string(held), 1.0});

        UserList s = {partner, static_cast<UserId>((u + 5) % m), static_cast<UserId>((u + 11) % m)};
        std::sort(s.begin(), s.end());
        for (UserId v : s) {
            f.seeds.friends[u].push_back(v);
            f.seeds.weight[u].push_back(v == partner ? 0.9 : 0.5);
        }
        edges.emplace_back(u, partner);
    }
    f.social = make_social_graph(m, edges);
    return f;
}

/// Training settings sized for the fixture.
inline TrainConfig fixture_train_config() {
    TrainConfig c;
    c.dim = 8;
    c.hidden = 16;
    c.batch_size = 4;
    c.max_epochs = 40;
    c.patience = 40;
    c.lr_g = 0.05;
    c.lr_decay = 1.0;
    c.master_seed = 7;
    return c;
}

/// Mean friend-distribution mass on planted partners over the mean mass on
/// every other non-self user.
inline double planted_mass_ratio(const GeneratorParams& g, const PlantedFixture& f) {
    double planted = 0.0, others = 0.0;
    std::size_t n_others = 0;
    for (UserId u = 0; u < PlantedFixture::kUsers; ++u) {
        const VectorXr p = friend_probabilities(g, f.seeds, u);
        for (UserId v = 0; v < PlantedFixture::kUsers; ++v) {
            if (v == u) continue;
            if (v == f.planted[u]) {
                planted += p[v];
            } else {
                others += p[v];
                ++n_others;
            }
        }
    }
    planted /= PlantedFixture::kUsers;
    others /= static_cast<double>(n_others);
    return planted / others;
}

// ================================================================
// metric oracle: exhaustive enumeration, written without the library
// ================================================================

struct OracleMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double ndcg = 0.0;
};

/// Definitions straight from binary relevance: DCG sums 1/log2(rank + 1) over
/// relevant hits in the top k; IDCG is the maximum DCG over every ordering
/// of the candidates, found by enumeration.
inline OracleMetrics oracle_metrics(const std::vector<int>& ranking, const std::vector<int>& relevant, int k) {
    auto is_rel = [&](int x) { return std::find(relevant.begin(), relevant.end(), x) != relevant.end(); };
    auto dcg = [&](const std::vector<int>& order) {
        double s = 0.0;
        for (int r = 0; r < std::min<int>(k, static_cast<int>(order.size())); ++r)
            if (is_rel(order[r])) s += std::log(2.0) / std::log(r + 2.0);
        return s;
    };
    int hits = 0;
    for (int r = 0; r < std::min<int>(k, static_cast<int>(ranking.size())); ++r) hits += is_rel(ranking[r]);

    // Ideal ordering over the candidates plus any relevant item not ranked.
    std::vector<int> pool = ranking;
    for (int x : relevant)
        if (std::find(pool.begin(), pool.end(), x) == pool.end()) pool.push_back(x);
    std::sort(pool.begin(), pool.end());
    double best = 0.0;
    do best = std::max(best, dcg(pool));
    while (std::next_permutation(pool.begin(), pool.end()));

    OracleMetrics o;
    o.precision = static_cast<double>(hits) / k;
    o.recall = relevant.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(relevant.size());
    o.ndcg = best > 0.0 ? dcg(ranking) / best : 0.0;
    return o;
}

struct OracleSweep {
    std::size_t cases = 0;
    std::size_t mismatches = 0;
};

/// Library metrics against the oracle for every relevant subset, every
/// ordering of every candidate subset of {0..n-1} for n <= max_items, and
/// every k in [1, max_items + 1].
inline OracleSweep sweep_metric_oracle(int max_items) {
    OracleSweep sweep;
    for (int n = 1; n <= max_items; ++n)
        for (int rel_mask = 1; rel_mask < (1 << n); ++rel_mask) {
            std::vector<int> relevant;
            for (int i = 0; i < n; ++i)
                if (rel_mask >> i & 1) relevant.push_back(i);
            for (int cand_mask = 1; cand_mask < (1 << n); ++cand_mask) {
                std::vector<int> ranking;
                for (int i = 0; i < n; ++i)
                    if (cand_mask >> i & 1) ranking.push_back(i);
                do {
                    for (int k = 1; k <= max_items + 1; ++k) {
                        const OracleMetrics o = oracle_metrics(ranking, relevant, k);
                        const auto kk = static_cast<std::size_t>(k);
                        const bool ok = std::abs(precision_at_k(ranking, relevant, kk) - o.precision) < 1e-12 &&
                                        std::abs(*recall_at_k(ranking, relevant, kk) - o.recall) < 1e-12 &&
                                        std::abs(*ndcg_at_k(ranking, relevant, kk) - o.ndcg) < 1e-12;
                        ++sweep.cases;
                        sweep.mismatches += !ok;
                    }
                } while (std::next_permutation(ranking.begin(), ranking.end()));
            }
        }
    return sweep;
}

// ================================================================
// gradient checks
// ================================================================

/// ||a - b|| / max(||a|| + ||b||, 1e-12).
inline double relative_error(const VectorXr& a, const VectorXr& b) {
    return (a - b).norm() / std::max(a.norm() + b.norm(), 1e-12);
}

/// Applies `fn` to every parameter of g in a fixed order.
template <class Fn>
void for_each_parameter(GeneratorParams& g, Fn&& fn) {
    for (auto* mat : {&g.w_in, &g.user_node, &g.w_out, &g.item_scores})
        for (Eigen::Index k = 0; k < mat->size(); ++k) fn(mat->data()[k]);
    for (auto* vec : {&g.b_hidden, &g.b_out})
        for (Eigen::Index k = 0; k < vec->size(); ++k) fn(vec->data()[k]);
}

template <class Fn>
void for_each_parameter(DiscriminatorParams& d, Fn&& fn) {
    for (auto* mat : {&d.user_factors, &d.item_factors})
        for (Eigen::Index k = 0; k < mat->size(); ++k) fn(mat->data()[k]);
}

template <class Params>
VectorXr flatten(Params p) {
    std::vector<double> out;
    for_each_parameter(p, [&](double& x) { out.push_back(x); });
    return Eigen::Map<VectorXr>(out.data(), static_cast<Eigen::Index>(out.size()));
}

/// Central differences of `loss` over every parameter of `p`.
template <class Params, class Loss>
VectorXr numeric_gradient(Params p, Loss&& loss, double step) {
    std::vector<double> out;
    std::vector<double*> slots;
    for_each_parameter(p, [&](double& x) { slots.push_back(&x); });
    for (double* x : slots) {
        const double keep = *x;
        *x = keep + step;
        const double up = loss(p);
        *x = keep - step;
        const double down = loss(p);
        *x = keep;
        out.push_back((up - down) / (2.0 * step));
    }
    return Eigen::Map<VectorXr>(out.data(), static_cast<Eigen::Index>(out.size()));
}

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kGradientTolerance = 1e-4;
// Central differences carry ~eps * |L| / step round-off per component (~1e-10
// here); gradients with a smaller norm than this cannot be resolved to 1e-4.
inline constexpr double kGradientResolution = 1e-6;

struct GradCheckResult {
    int instances = 0;
    int failures = 0;
    int unresolvable = 0;  // redrawn: gradient norm below kGradientResolution
    double worst = 0.0;
};

/// Random 5-user/6-item instances with fixed Gumbel noise. The analytic
/// generator gradient is expanded to full size through apply_gradient on a
/// zeroed parameter set. Instances with no reachable item or a saturated
/// relaxation (gradient below kGradientResolution) are redrawn.
inline GradCheckResult check_generator_gradients(int instances, std::uint64_t seed) {
    constexpr UserId m = 5;
    constexpr ItemId n = 6;
    GradCheckResult res;
    Rng rng(seed);
    while (res.instances < instances) {
        std::vector<ItemList> items(m);
        for (UserId u = 0; u < m; ++u) {
            for (ItemId i = 0; i < n; ++i)
                if (uniform01(rng) < 0.45) items[u].push_back(i);
            if (items[u].empty()) items[u].push_back(static_cast<ItemId>(uniform_index(rng, n)));
        }
        const SparseFeedback train = feedback_matrix(items, n);
        GeneratorParams g = init_generator(m, n, 4, 0.2 + 0.8 * uniform01(rng), 0.0, rng());
        for (Eigen::Index k = 0; k < g.item_scores.size(); ++k) g.item_scores.data()[k] = 0.5 + uniform01(rng);
        for (Eigen::Index k = 0; k < g.b_out.size(); ++k) g.b_out[k] = 0.5 * (uniform01(rng) - 0.5);
        DiscriminatorParams d = init_discriminator(m, n, 3, 0.0, rng());
        d.user_factors *= 20.0;
        d.item_factors *= 20.0;

        const auto u = static_cast<UserId>(uniform_index(rng, m));
        VectorXr input = VectorXr::Zero(m);
        for (UserId v = 0; v < m; ++v)
            if (v != u && uniform01(rng) < 0.6) input[v] = 1.0;
        const VectorXr friend_noise = gumbel_noise(rng, m);
        const auto trace = generator_forward(g, u, input, train, items[u], friend_noise);
        if (!trace) continue;
        std::vector<ItemDraw> draws;
        for (int k = 0; k < 3; ++k)
            draws.push_back(draw_item(*trace, items[u][uniform_index(rng, items[u].size())], rng, g.temperature));

        const GeneratorGradient grad = generator_backward(g, d, train, *trace, draws);
        GeneratorParams zero = g;
        for_each_parameter(zero, [](double& x) { x = 0.0; });
        apply_gradient(zero, grad, 1.0);
        const VectorXr analytic = flatten(zero);
        if (analytic.norm() < kGradientResolution) {
            ++res.unresolvable;
            continue;
        }
        const VectorXr numeric = numeric_gradient(
            g,
            [&](const GeneratorParams& gp) {
                return generator_loss(gp, d, u, input, train, items[u], friend_noise, draws);
            },
            kFiniteDifferenceStep);
        const double err = relative_error(analytic, numeric);
        ++res.instances;
        res.worst = std::max(res.worst, err);
        if (!(err < kGradientTolerance)) ++res.failures;
    }
    return res;
}

/// Random 5-user/6-item quads with a soft generated item; the analytic step
/// gradient is old - new at lr = 1.
inline GradCheckResult check_discriminator_gradients(int instances, std::uint64_t seed) {
    constexpr UserId m = 5;
    constexpr ItemId n = 6;
    GradCheckResult res;
    Rng rng(seed);
    for (int t = 0; t < instances; ++t) {
        DiscriminatorParams d = init_discriminator(m, n, 3, 0.01 + 0.1 * uniform01(rng), rng());
        d.user_factors *= 20.0;
        d.item_factors *= 20.0;
        TrainingQuad quad;
        quad.user = static_cast<UserId>(uniform_index(rng, m));
        quad.positive = static_cast<ItemId>(uniform_index(rng, n));
        do quad.negative = static_cast<ItemId>(uniform_index(rng, n));
        while (quad.negative == quad.positive);
        VectorXr logits(n);
        for (ItemId i = 0; i < n; ++i) logits[i] = uniform01(rng) < 0.3 ? kMaskLogit : 2.0 * uniform01(rng);
        logits[static_cast<ItemId>(uniform_index(rng, n))] = 1.0;
        quad.generated = gumbel_softmax(logits, gumbel_noise(rng, n), 0.5);

        DiscriminatorParams stepped = d;
        discriminator_step(stepped, quad, 1.0);
        const VectorXr analytic = flatten(d) - flatten(stepped);
        const VectorXr numeric = numeric_gradient(
            d, [&](const DiscriminatorParams& dp) { return discriminator_loss(dp, quad); }, kFiniteDifferenceStep);
        const double err = relative_error(analytic, numeric);
        ++res.instances;
        res.worst = std::max(res.worst, err);
        if (!(err < kGradientTolerance)) ++res.failures;
    }
    return res;
}

// ================================================================
// distribution checks
// ================================================================

/// Total-variation distance between empirical argmax(logits + g) frequencies
/// and softmax(logits), with the softmax computed here from its definition.
inline double gumbel_max_tv(const std::vector<double>& logits, int draws, std::uint64_t seed) {
    std::vector<double> expected(logits.size());
    double total = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) total += expected[k] = std::exp(logits[k]);
    for (double& e : expected) e /= total;

    std::vector<int> counts(logits.size(), 0);
    Rng rng(seed);
    for (int t = 0; t < draws; ++t) {
        std::size_t best = 0;
        double best_v = -1e300;
        for (std::size_t k = 0; k < logits.size(); ++k) {
            const double v = logits[k] + gumbel_from_uniform(uniform01(rng));
            if (v > best_v) best_v = v, best = k;
        }
        ++counts[best];
    }
    double tv = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k)
        tv += std::abs(static_cast<double>(counts[k]) / draws - expected[k]);
    return 0.5 * tv;
}

// ================================================================
// scratch directories
// ================================================================

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("rsgan_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

inline void write_records(const std::filesystem::path& path, const std::vector<InteractionRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    for (const auto& r : records) out << r.user << '\t' << r.item << '\t' << r.rating << '\n';
}

}  // namespace rsgan::testing
