#include "rsgan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <sstream>

#include "rsgan/eval.hpp"

namespace rsgan {

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("invalid training config: ") + what);
    };
    require(batch_size >= 1, "batch_size must be >= 1");
    require(dim >= 1, "dim must be >= 1");
    require(hidden >= 1, "hidden must be >= 1");
    require(temperature > 0.0, "tau must be > 0");
    require(corruption >= 0.0 && corruption < 1.0, "corrupt must be in [0, 1)");
    require(lambda >= 0.0, "lambda must be >= 0");
    require(lr_d > 0.0 && lr_g > 0.0 && pretrain_lr > 0.0, "learning rates must be > 0");
    require(lr_decay > 0.0 && lr_decay <= 1.0, "lr_decay must be in (0, 1]");
    require(pretrain_epochs >= 0 && max_epochs >= 0 && warmup_epochs >= 0, "epoch counts must be >= 0");
    require(d_steps_per_g_step >= 1, "d_steps_per_g_step must be >= 1");
    require(patience >= 1, "patience must be >= 1");
    require(quads_per_user >= 0, "quads_per_user must be >= 0");
    require(random_friends >= 1, "random_friends must be >= 1");
    require(threads >= 1, "threads must be >= 1");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::echo() const {
    auto num = [](double x) {
        std::ostringstream os;
        os.precision(17);
        os << x;
        return os.str();
    };
    return {
        {"batch_size", std::to_string(batch_size)},
        {"dim", std::to_string(dim)},
        {"hidden", std::to_string(hidden)},
        {"tau", num(temperature)},
        {"corrupt", num(corruption)},
        {"lambda", num(lambda)},
        {"lr_d", num(lr_d)},
        {"lr_g", num(lr_g)},
        {"lr_decay", num(lr_decay)},
        {"pretrain_lr", num(pretrain_lr)},
        {"pretrain_epochs", std::to_string(pretrain_epochs)},
        {"max_epochs", std::to_string(max_epochs)},
        {"warmup_epochs", std::to_string(warmup_epochs)},
        {"d_steps", std::to_string(d_steps_per_g_step)},
        {"patience", std::to_string(patience)},
        {"quads_per_user", std::to_string(quads_per_user)},
        {"random_friends", std::to_string(random_friends)},
        {"hard_z", hard_z ? "1" : "0"},
        {"epoch_alternation", epoch_alternation ? "1" : "0"},
        {"seed", std::to_string(master_seed)},
    };
}

TrainConfig TrainConfig::from_echo(const std::vector<std::pair<std::string, std::string>>& pairs) {
    TrainConfig c;
    try {
        for (const auto& [k, v] : pairs) {
            if (k == "batch_size") c.batch_size = std::stoi(v);
            else if (k == "dim") c.dim = std::stoi(v);
            else if (k == "hidden") c.hidden = std::stoi(v);
            else if (k == "tau") c.temperature = std::stod(v);
            else if (k == "corrupt") c.corruption = std::stod(v);
            else if (k == "lambda") c.lambda = std::stod(v);
            else if (k == "lr_d") c.lr_d = std::stod(v);
            else if (k == "lr_g") c.lr_g = std::stod(v);
            else if (k == "lr_decay") c.lr_decay = std::stod(v);
            else if (k == "pretrain_lr") c.pretrain_lr = std::stod(v);
            else if (k == "pretrain_epochs") c.pretrain_epochs = std::stoi(v);
            else if (k == "max_epochs") c.max_epochs = std::stoi(v);
            else if (k == "warmup_epochs") c.warmup_epochs = std::stoi(v);
            else if (k == "d_steps") c.d_steps_per_g_step = std::stoi(v);
            else if (k == "patience") c.patience = std::stoi(v);
            else if (k == "quads_per_user") c.quads_per_user = std::stoi(v);
            else if (k == "random_friends") c.random_friends = std::stoi(v);
            else if (k == "hard_z") c.hard_z = v == "1";
            else if (k == "epoch_alternation") c.epoch_alternation = v == "1";
            else if (k == "seed") c.master_seed = std::stoull(v);
        }
    } catch (const std::logic_error&) {
        throw FormatError("malformed training config value");
    }
    return c;
}

// ================================================================
// hashing
// ================================================================

namespace {

void fnv(std::uint64_t& h, const double* data, Eigen::Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < static_cast<std::size_t>(n) * sizeof(double); ++k) {
        h ^= bytes[k];
        h *= 0x100000001b3ULL;
    }
}

}  // namespace

std::uint64_t parameter_hash(const GeneratorParams& g) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    fnv(h, g.w_in.data(), g.w_in.size());
    fnv(h, g.b_hidden.data(), g.b_hidden.size());
    fnv(h, g.user_node.data(), g.user_node.size());
    fnv(h, g.w_out.data(), g.w_out.size());
    fnv(h, g.b_out.data(), g.b_out.size());
    fnv(h, g.item_scores.data(), g.item_scores.size());
    return h;
}

std::uint64_t parameter_hash(const DiscriminatorParams& d) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    fnv(h, d.user_factors.data(), d.user_factors.size());
    fnv(h, d.item_factors.data(), d.item_factors.size());
    return h;
}

// ================================================================
// shared epoch bookkeeping
// ================================================================

namespace {

/// Validation NDCG@10 drives early stopping. Without validation items every
/// epoch counts as an improvement, so the final epoch is kept.
class EarlyStopper {
public:
    EarlyStopper(const FoldSplit& fold, const TrainConfig& cfg) : fold_(fold), cfg_(cfg) {
        has_validation_ = fold.validation_size() > 0;
    }

    /// Records the epoch; returns true when the snapshot should be replaced.
    bool record(TrainState& state, EpochRecord rec, const DiscriminatorParams& d,
                const TrainCallbacks& callbacks) {
        if (has_validation_) {
            const MetricReport r = evaluate_ranking(d, fold_, Target::Validation, {10}, cfg_.threads);
            rec.val_ndcg = r[10].ndcg;
            rec.val_precision = r[10].precision;
        }
        if (!std::isfinite(rec.loss_d) || !std::isfinite(rec.loss_g))
            throw NumericFault("non-finite loss in epoch " + std::to_string(rec.epoch), rec.epoch);
        state.history.push_back(rec);
        state.epoch = rec.epoch + 1;
        if (callbacks.epoch) callbacks.epoch(rec);

        const bool improved = !has_validation_ || rec.val_ndcg > state.best_ndcg;
        if (improved) {
            state.best_ndcg = rec.val_ndcg;
            state.best_epoch = rec.epoch;
            state.since_improvement = 0;
        } else {
            ++state.since_improvement;
        }
        return improved;
    }

    bool exhausted(const TrainState& state) const {
        return has_validation_ && state.since_improvement >= cfg_.patience;
    }

private:
    const FoldSplit& fold_;
    const TrainConfig& cfg_;
    bool has_validation_ = false;
};

struct GeneratorAccumulator {
    MatrixXr w_in, user_node, w_out;
    VectorXr b_hidden, b_out;
    bool dirty = false;

    explicit GeneratorAccumulator(const GeneratorParams& g)
        : w_in(MatrixXr::Zero(g.w_in.rows(), g.w_in.cols())),
          user_node(MatrixXr::Zero(g.user_node.rows(), g.user_node.cols())),
          w_out(MatrixXr::Zero(g.w_out.rows(), g.w_out.cols())),
          b_hidden(VectorXr::Zero(g.b_hidden.size())),
          b_out(VectorXr::Zero(g.b_out.size())) {}

    void add(const GeneratorGradient& grad) {
        for (std::size_t k = 0; k < grad.input_rows.size(); ++k)
            w_in.row(grad.input_rows[k]) += grad.w_in_rows.row(static_cast<Eigen::Index>(k));
        user_node.row(grad.user) += grad.user_node.transpose();
        w_out += grad.w_out;
        b_hidden += grad.b_hidden;
        b_out += grad.b_out;
        dirty = true;
    }

    void apply(GeneratorParams& g, double step) {
        if (!dirty) return;
        g.w_in += step * w_in;
        g.user_node += step * user_node;
        g.w_out += step * w_out;
        g.b_hidden += step * b_hidden;
        g.b_out += step * b_out;
        w_in.setZero();
        user_node.setZero();
        w_out.setZero();
        b_hidden.setZero();
        b_out.setZero();
        dirty = false;
    }
};

SoftSelection harden(const SoftSelection& z) {
    SoftSelection h;
    h.temperature = z.temperature;
    h.weights = VectorXr::Zero(z.weights.size());
    h.weights[z.argmax()] = 1.0;
    h.support = {z.argmax()};
    return h;
}

std::vector<UserList> random_friend_pools(UserId m, int pool_size, std::uint64_t seed) {
    std::vector<UserList> pools(m);
    UserList others;
    for (UserId u = 0; u < m; ++u) {
        others.clear();
        for (UserId v = 0; v < m; ++v)
            if (v != u) others.push_back(v);
        Rng rng = derive_rng(seed, Stream::RandomFriends, {static_cast<std::uint64_t>(u)});
        shuffle(others, rng);
        const auto take = std::min(others.size(), static_cast<std::size_t>(pool_size));
        pools[u].assign(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(take));
    }
    return pools;
}

double epoch_rate(double base, double decay, int epoch) { return base * std::pow(decay, epoch); }

}  // namespace

GeneratorParams pretrained_generator(Eigen::Index num_users, Eigen::Index num_items, const SeededFriendSet& seeds,
                                     const TrainConfig& cfg) {
    GeneratorParams g = init_generator(num_users, num_items, cfg.hidden, cfg.temperature, cfg.corruption,
                                       cfg.master_seed);
    return pretrain_cdae(std::move(g), seeds, {cfg.pretrain_epochs, cfg.pretrain_lr, 5}, cfg.master_seed);
}

double bpr_epoch(DiscriminatorParams& d, const FoldSplit& fold, double lr, std::uint64_t master_seed, int epoch) {
    const Eigen::Index n = d.num_items();
    std::vector<std::pair<UserId, ItemId>> pairs;
    pairs.reserve(fold.train_size());
    for (UserId u = 0; u < fold.num_users(); ++u)
        if (static_cast<Eigen::Index>(fold.train[u].size()) < n)
            for (ItemId i : fold.train[u]) pairs.emplace_back(u, i);
    Rng rng = derive_rng(master_seed, Stream::Bpr, {static_cast<std::uint64_t>(epoch)});
    shuffle(pairs, rng);
    double total = 0.0;
    for (auto [u, i] : pairs) total += bpr_step(d, u, i, sample_negative(fold.train[u], n, rng), lr);
    return pairs.empty() ? 0.0 : total / static_cast<double>(pairs.size());
}

TrainResult train_bpr_baseline(const FoldSplit& fold, Eigen::Index num_items, const TrainConfig& cfg,
                               const TrainCallbacks& callbacks) {
    cfg.validate();
    TrainResult cur;
    cur.discriminator = init_discriminator(fold.num_users(), num_items, cfg.dim, cfg.lambda, cfg.master_seed);
    TrainResult best = cur;
    EarlyStopper stopper(fold, cfg);
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss_d = bpr_epoch(cur.discriminator, fold, epoch_rate(cfg.lr_d, cfg.lr_decay, epoch), cfg.master_seed,
                               epoch);
        if (stopper.record(cur.state, rec, cur.discriminator, callbacks)) best.discriminator = cur.discriminator;
        if (stopper.exhausted(cur.state)) break;
    }
    best.state = cur.state;
    return best;
}

TrainResult adversarial_train(const FoldSplit& fold, Eigen::Index num_items, const SeededFriendSet& seeds,
                              const TrainConfig& cfg, FriendSource source, const TrainCallbacks& callbacks) {
    cfg.validate();
    const UserId m = fold.num_users();
    const Eigen::Index n = num_items;
    const bool use_generator = source == FriendSource::Generator;
    if (use_generator && (seeds.num_users() != m || seeds.empty()))
        throw ConfigError("adversarial training needs seeded friends for at least one user");

    const SparseFeedback train = feedback_matrix(fold.train, static_cast<std::int32_t>(n));

    TrainResult cur;
    if (use_generator) cur.generator = pretrained_generator(m, n, seeds, cfg);
    cur.discriminator = init_discriminator(m, n, cfg.dim, cfg.lambda, cfg.master_seed);
    for (int w = 0; w < cfg.warmup_epochs; ++w)
        bpr_epoch(cur.discriminator, fold, epoch_rate(cfg.lr_d, cfg.lr_decay, w), cfg.master_seed, -1 - w);

    const std::vector<UserList> pools =
        use_generator ? std::vector<UserList>{} : random_friend_pools(m, cfg.random_friends, cfg.master_seed);

    auto phase = [&](Phase p) {
        if (callbacks.phase) callbacks.phase(p, cur.generator, cur.discriminator);
    };

    TrainResult best = cur;
    EarlyStopper stopper(fold, cfg);
    UserList order(m);
    for (UserId u = 0; u < m; ++u) order[u] = u;
    GeneratorAccumulator acc(cur.generator);
    std::vector<ItemDraw> draws;
    ItemList candidates;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const double lr_d = epoch_rate(cfg.lr_d, cfg.lr_decay, epoch);
        const double lr_g = epoch_rate(cfg.lr_g, cfg.lr_decay, epoch);
        Rng order_rng = derive_rng(cfg.master_seed, Stream::Epoch, {static_cast<std::uint64_t>(epoch)});
        shuffle(order, order_rng);
        const std::size_t batch = cfg.epoch_alternation ? static_cast<std::size_t>(m)
                                                        : static_cast<std::size_t>(cfg.batch_size);

        double loss_d = 0.0, loss_g = 0.0;
        std::size_t n_quads = 0, n_draws = 0;

        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);
            for (std::size_t idx = start; idx < stop; ++idx) {
                const UserId u = order[idx];
                const ItemList& own = fold.train[u];
                if (own.empty() || static_cast<Eigen::Index>(own.size()) >= n) continue;
                Rng rng = derive_rng(cfg.master_seed, Stream::UserStep,
                                     {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(u)});
                const std::size_t quads =
                    cfg.quads_per_user > 0 ? static_cast<std::size_t>(cfg.quads_per_user) : own.size();

                if (!use_generator) {
                    phase(Phase::DiscriminatorBegin);
                    for (int rep = 0; rep < cfg.d_steps_per_g_step; ++rep)
                        for (std::size_t q = 0; q < quads; ++q) {
                            const UserId f = pools[u][uniform_index(rng, pools[u].size())];
                            candidates.clear();
                            std::set_difference(fold.train[f].begin(), fold.train[f].end(), own.begin(), own.end(),
                                                std::back_inserter(candidates));
                            if (candidates.empty()) continue;
                            TrainingQuad quad;
                            quad.user = u;
                            quad.positive = own[uniform_index(rng, own.size())];
                            const ItemId z = candidates[uniform_index(rng, candidates.size())];
                            quad.generated.weights = VectorXr::Zero(n);
                            quad.generated.weights[z] = 1.0;
                            quad.generated.support = {z};
                            quad.negative = sample_negative(own, n, rng);
                            loss_d += discriminator_step(cur.discriminator, quad, lr_d);
                            ++n_quads;
                        }
                    phase(Phase::DiscriminatorEnd);
                    continue;
                }

                if (seeds.friends[u].empty()) continue;
                const VectorXr input = corrupt(seed_indicator(seeds, u), cur.generator.corruption, rng);
                const VectorXr noise = gumbel_noise(rng, m);
                const auto trace = generator_forward(cur.generator, u, input, train, own, noise);
                if (!trace) continue;

                phase(Phase::DiscriminatorBegin);
                for (int rep = 0; rep < cfg.d_steps_per_g_step; ++rep) {
                    draws.clear();
                    for (std::size_t q = 0; q < quads; ++q) {
                        ItemDraw draw = draw_item(*trace, own[uniform_index(rng, own.size())], rng,
                                                  cur.generator.temperature);
                        TrainingQuad quad;
                        quad.user = u;
                        quad.positive = draw.positive;
                        quad.generated = cfg.hard_z ? harden(draw.z) : std::move(draw.z);
                        quad.negative = sample_negative(own, n, rng);
                        loss_d += discriminator_step(cur.discriminator, quad, lr_d);
                        if (!cfg.hard_z) draw.z = std::move(quad.generated);
                        ++n_quads;
                        draws.push_back(std::move(draw));
                    }
                }
                phase(Phase::DiscriminatorEnd);
                if (!std::isfinite(loss_d)) throw NumericFault("non-finite discriminator loss", epoch);

                phase(Phase::GeneratorBegin);
                const GeneratorGradient grad = generator_backward(cur.generator, cur.discriminator, train, *trace,
                                                                  draws);
                loss_g += grad.loss;
                n_draws += draws.size();
                acc.add(grad);
                cur.generator.item_scores.row(u) += lr_g * grad.item_scores.transpose();
                phase(Phase::GeneratorEnd);
            }
            if (use_generator) {
                phase(Phase::GeneratorBegin);
                acc.apply(cur.generator, lr_g);
                phase(Phase::GeneratorEnd);
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss_d = n_quads ? loss_d / static_cast<double>(n_quads) : 0.0;
        rec.loss_g = n_draws ? loss_g / static_cast<double>(n_draws) : 0.0;
        if (stopper.record(cur.state, rec, cur.discriminator, callbacks)) {
            best.generator = cur.generator;
            best.discriminator = cur.discriminator;
        }
        if (stopper.exhausted(cur.state)) break;
    }
    best.state = cur.state;
    return best;
}

}  // namespace rsgan
