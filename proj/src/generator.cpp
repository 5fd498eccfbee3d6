#include "rsgan/generator.hpp"

#include <algorithm>
#include <cmath>

namespace rsgan {

GeneratorParams init_generator(Eigen::Index num_users, Eigen::Index num_items, Eigen::Index hidden,
                               double temperature, double corruption, std::uint64_t master_seed) {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
    if (!(corruption >= 0.0 && corruption < 1.0)) throw ConfigError("corruption must be in [0, 1)");
    if (hidden < 1) throw ConfigError("hidden width must be >= 1");

    GeneratorParams g;
    g.temperature = temperature;
    g.corruption = corruption;
    g.w_in.resize(num_users, hidden);
    g.user_node.resize(num_users, hidden);
    g.w_out.resize(hidden, num_users);
    g.b_hidden = VectorXr::Zero(hidden);
    g.b_out = VectorXr::Zero(num_users);
    g.item_scores = MatrixXr::Ones(num_users, num_items);

    Rng rng = derive_rng(master_seed, Stream::Init, {2});
    const double scale = std::sqrt(6.0 / static_cast<double>(num_users + hidden));
    for (MatrixXr* w : {&g.w_in, &g.user_node, &g.w_out})
        for (Eigen::Index k = 0; k < w->size(); ++k) w->data()[k] = scale * (2.0 * uniform01(rng) - 1.0);
    return g;
}

CdaeOutput cdae_forward(const GeneratorParams& g, UserId u, const VectorXr& input) {
    VectorXr pre = g.b_hidden + g.user_node.row(u).transpose();
    for (Eigen::Index r = 0; r < input.size(); ++r)
        if (input[r] != 0.0) pre += input[r] * g.w_in.row(r).transpose();
    CdaeOutput out;
    out.hidden = pre.unaryExpr([](double a) { return logistic(a); });
    out.scores = g.w_out.transpose() * out.hidden + g.b_out;
    if (!out.scores.allFinite()) throw NumericFault("cdae_forward: non-finite output");
    return out;
}

VectorXr friend_distribution(const VectorXr& scores, UserId exclude_self) {
    if (scores.size() < 2) throw DegenerateDistribution("friend distribution over a single user");
    VectorXr logits = scores;
    if (exclude_self >= 0) logits[exclude_self] = kMaskLogit;
    return softmax(logits);
}

VectorXr seed_indicator(const SeededFriendSet& seeds, UserId u) {
    VectorXr s = VectorXr::Zero(seeds.num_users());
    for (UserId f : seeds.friends[u]) s[f] = 1.0;
    return s;
}

VectorXr corrupt(const VectorXr& input, double rate, Rng& rng) {
    VectorXr out = input;
    if (rate <= 0.0) return out;
    for (Eigen::Index k = 0; k < out.size(); ++k)
        if (out[k] != 0.0 && uniform01(rng) < rate) out[k] = 0.0;
    return out;
}

GeneratorParams pretrain_cdae(GeneratorParams g, const SeededFriendSet& seeds, const PretrainOptions& opts,
                              std::uint64_t master_seed) {
    if (opts.epochs < 0) throw ConfigError("pretrain epochs must be >= 0");
    const auto m = static_cast<UserId>(g.num_users());
    if (seeds.num_users() != m) throw Error("pretrain_cdae: seed set and generator disagree on user count");

    UserList order(m);
    for (UserId u = 0; u < m; ++u) order[u] = u;

    std::vector<std::pair<Eigen::Index, double>> targets;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        Rng order_rng = derive_rng(master_seed, Stream::Pretrain, {static_cast<std::uint64_t>(epoch)});
        shuffle(order, order_rng);
        for (UserId u : order) {
            const auto& friends = seeds.friends[u];
            if (friends.empty()) continue;
            Rng rng = derive_rng(master_seed, Stream::Pretrain,
                                 {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(u)});
            const VectorXr clean = seed_indicator(seeds, u);
            const VectorXr input = corrupt(clean, g.corruption, rng);
            const CdaeOutput fwd = cdae_forward(g, u, input);

            targets.clear();
            for (UserId f : friends) targets.emplace_back(f, 1.0);
            const std::size_t non_friends = static_cast<std::size_t>(m) - 1 - friends.size();
            if (non_friends > 0) {
                const std::size_t wanted = friends.size() * static_cast<std::size_t>(opts.negative_ratio);
                for (std::size_t k = 0; k < wanted; ++k) {
                    UserId v;
                    do {
                        v = static_cast<UserId>(uniform_index(rng, static_cast<std::uint64_t>(m)));
                    } while (v == u || clean[v] != 0.0);
                    targets.emplace_back(v, 0.0);
                }
            }

            VectorXr grad_hidden = VectorXr::Zero(g.hidden());
            for (auto [k, t] : targets) grad_hidden += (logistic(fwd.scores[k]) - t) * g.w_out.col(k);
            for (auto [k, t] : targets) {
                const double dc = logistic(fwd.scores[k]) - t;
                g.w_out.col(k) -= opts.lr * dc * fwd.hidden;
                g.b_out[k] -= opts.lr * dc;
            }
            const VectorXr grad_pre = grad_hidden.cwiseProduct(fwd.hidden.cwiseProduct(
                (1.0 - fwd.hidden.array()).matrix()));
            for (Eigen::Index r = 0; r < input.size(); ++r)
                if (input[r] != 0.0) g.w_in.row(r) -= opts.lr * input[r] * grad_pre.transpose();
            g.b_hidden -= opts.lr * grad_pre;
            g.user_node.row(u) -= opts.lr * grad_pre.transpose();
        }
    }
    return g;
}

SoftSelection relax_friend(const GeneratorParams& g, UserId u, const VectorXr& friend_probs,
                           const VectorXr& noise) {
    VectorXr logits = (friend_probs.array() + 1e-12).log().matrix();
    logits[u] = kMaskLogit;
    return gumbel_softmax(logits, noise, g.temperature);
}

SoftSelection sample_friend(const GeneratorParams& g, UserId u, const VectorXr& friend_probs, Rng& rng) {
    return relax_friend(g, u, friend_probs, gumbel_noise(rng, friend_probs.size()));
}

std::optional<VectorXr> item_logits(const SoftSelection& v, const SparseFeedback& train, const GeneratorParams& g,
                                    UserId u, std::span<const ItemId> consumed, VectorXr* friend_items) {
    VectorXr mass = train.transpose() * v.weights;
    VectorXr logits = mass.cwiseProduct(g.item_scores.row(u).transpose());
    bool any = false;
    auto c = consumed.begin();
    for (Eigen::Index k = 0; k < logits.size(); ++k) {
        while (c != consumed.end() && *c < k) ++c;
        if (mass[k] < 1e-8 || (c != consumed.end() && *c == k))
            logits[k] = kMaskLogit;
        else
            any = true;
    }
    if (friend_items) *friend_items = std::move(mass);
    if (!any) return std::nullopt;
    return logits;
}

SoftSelection sample_item(const VectorXr& logits, Rng& rng, double temperature) {
    return gumbel_softmax(logits, gumbel_noise(rng, logits.size()), temperature);
}

std::optional<GeneratorTrace> generator_forward(const GeneratorParams& g, UserId u, const VectorXr& input,
                                                const SparseFeedback& train, std::span<const ItemId> consumed,
                                                const VectorXr& friend_noise) {
    GeneratorTrace t;
    t.user = u;
    t.input = input;
    t.cdae = cdae_forward(g, u, input);
    t.friend_probs = friend_distribution(t.cdae.scores, u);
    t.friend_noise = friend_noise;
    t.friend_sel = relax_friend(g, u, t.friend_probs, friend_noise);
    auto logits = item_logits(t.friend_sel, train, g, u, consumed, &t.friend_items);
    if (!logits) return std::nullopt;
    t.item_logits = std::move(*logits);
    for (Eigen::Index k = 0; k < t.item_logits.size(); ++k)
        if (t.item_logits[k] > kMaskLogit / 2) t.item_support.push_back(k);
    return t;
}

ItemDraw draw_item(const GeneratorTrace& trace, ItemId positive, Rng& rng, double temperature) {
    ItemDraw d;
    d.positive = positive;
    // Masked entries get zero weight whatever their noise, so only candidates draw.
    d.noise = VectorXr::Zero(trace.item_logits.size());
    for (Eigen::Index k : trace.item_support) d.noise[k] = gumbel_from_uniform(uniform01(rng));
    d.z = gumbel_softmax_on(trace.item_support, trace.item_logits, d.noise, temperature);
    return d;
}

GeneratorGradient generator_backward(const GeneratorParams& g, const DiscriminatorParams& d,
                                     const SparseFeedback& train, const GeneratorTrace& trace,
                                     std::span<const ItemDraw> draws) {
    const UserId u = trace.user;
    const double tau = g.temperature;
    // Scores are read only on the item support and at the drawn positives.
    VectorXr x = VectorXr::Zero(trace.item_logits.size());
    for (Eigen::Index k : trace.item_support) x[k] = score(d, u, static_cast<ItemId>(k));
    for (const ItemDraw& draw : draws) x[draw.positive] = score(d, u, draw.positive);

    GeneratorGradient grad;
    grad.user = u;

    // Item layer: dL/d(item logits), summed over draws.
    VectorXr grad_logits = VectorXr::Zero(x.size());
    for (const ItemDraw& draw : draws) {
        // Softmax backward restricted to the support; z is zero elsewhere.
        double x_uz = 0.0;
        draw.z.for_each_above(0.0, [&](Eigen::Index k, double w) { x_uz += w * x[k]; });
        const double margin = x[draw.positive] - x_uz;
        grad.loss -= log_logistic(margin);
        const double coef = logistic(-margin);  // dL/dx_uz
        draw.z.for_each_above(0.0, [&](Eigen::Index k, double w) { grad_logits[k] += coef * w * (x[k] - x_uz) / tau; });
    }
    // Masked logits are constants; their z weight is exactly zero so grad_logits is too.
    grad.item_scores = grad_logits.cwiseProduct(trace.friend_items);
    const VectorXr grad_mass = grad_logits.cwiseProduct(g.item_scores.row(u).transpose());

    // Friend layer: mass = R^T v, logits = log(p + 1e-12) with self masked.
    const VectorXr grad_v = train * grad_mass;
    VectorXr grad_p = softmax_backward(trace.friend_sel.weights, grad_v, tau);
    grad_p = grad_p.cwiseQuotient((trace.friend_probs.array() + 1e-12).matrix());
    grad_p[u] = 0.0;
    const VectorXr grad_c = softmax_backward(trace.friend_probs, grad_p);

    // CDAE.
    const VectorXr& hid = trace.cdae.hidden;
    grad.w_out = hid * grad_c.transpose();
    grad.b_out = grad_c;
    const VectorXr grad_pre =
        (g.w_out * grad_c).cwiseProduct(hid.cwiseProduct((1.0 - hid.array()).matrix()));
    grad.b_hidden = grad_pre;
    grad.user_node = grad_pre;
    for (Eigen::Index r = 0; r < trace.input.size(); ++r)
        if (trace.input[r] != 0.0) grad.input_rows.push_back(r);
    grad.w_in_rows.resize(static_cast<Eigen::Index>(grad.input_rows.size()), g.hidden());
    for (std::size_t k = 0; k < grad.input_rows.size(); ++k)
        grad.w_in_rows.row(static_cast<Eigen::Index>(k)) = trace.input[grad.input_rows[k]] * grad_pre.transpose();
    return grad;
}

double generator_loss(const GeneratorParams& g, const DiscriminatorParams& d, UserId u, const VectorXr& input,
                      const SparseFeedback& train, std::span<const ItemId> consumed, const VectorXr& friend_noise,
                      std::span<const ItemDraw> draws) {
    auto trace = generator_forward(g, u, input, train, consumed, friend_noise);
    if (!trace) throw DegenerateDistribution("generator_loss: no candidate item");
    const VectorXr x = score_all(d, u);
    double loss = 0.0;
    for (const ItemDraw& draw : draws) {
        const SoftSelection z = gumbel_softmax(trace->item_logits, draw.noise, g.temperature);
        loss -= log_logistic(x[draw.positive] - z.weights.dot(x));
    }
    return loss;
}

void apply_gradient(GeneratorParams& g, const GeneratorGradient& grad, double step) {
    for (std::size_t k = 0; k < grad.input_rows.size(); ++k)
        g.w_in.row(grad.input_rows[k]) += step * grad.w_in_rows.row(static_cast<Eigen::Index>(k));
    g.b_hidden += step * grad.b_hidden;
    g.user_node.row(grad.user) += step * grad.user_node.transpose();
    g.w_out += step * grad.w_out;
    g.b_out += step * grad.b_out;
    g.item_scores.row(grad.user) += step * grad.item_scores.transpose();
}

VectorXr friend_probabilities(const GeneratorParams& g, const SeededFriendSet& seeds, UserId u) {
    return friend_distribution(cdae_forward(g, u, seed_indicator(seeds, u)).scores, u);
}

}  // namespace rsgan
