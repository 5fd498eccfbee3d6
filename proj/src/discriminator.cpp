#include "rsgan/discriminator.hpp"

#include <algorithm>
#include <numeric>

namespace rsgan {

DiscriminatorParams init_discriminator(Eigen::Index num_users, Eigen::Index num_items, Eigen::Index dim,
                                       double lambda, std::uint64_t master_seed) {
    if (dim < 1) throw ConfigError("latent dimension must be >= 1");
    DiscriminatorParams d;
    d.lambda = lambda;
    d.user_factors.resize(num_users, dim);
    d.item_factors.resize(num_items, dim);
    Rng rng = derive_rng(master_seed, Stream::Init, {1});
    for (Eigen::Index k = 0; k < d.user_factors.size(); ++k)
        d.user_factors.data()[k] = 0.1 * uniform01(rng) - 0.05;
    for (Eigen::Index k = 0; k < d.item_factors.size(); ++k)
        d.item_factors.data()[k] = 0.1 * uniform01(rng) - 0.05;
    return d;
}

namespace {

// z-weighted mean of item factor rows over the support.
Eigen::RowVectorXd soft_item_factor(const DiscriminatorParams& d, const SoftSelection& z) {
    Eigen::RowVectorXd q = Eigen::RowVectorXd::Zero(d.dim());
    z.for_each_above(kSupportFloor, [&](Eigen::Index k, double w) { q += w * d.item_factors.row(k); });
    return q;
}

double soft_norm(const DiscriminatorParams& d, const SoftSelection& z) {
    double s = 0.0;
    z.for_each_above(kSupportFloor, [&](Eigen::Index k, double w) { s += w * d.item_factors.row(k).squaredNorm(); });
    return s;
}

}  // namespace

double soft_score(const DiscriminatorParams& d, UserId u, const SoftSelection& z) {
    return d.user_factors.row(u).dot(soft_item_factor(d, z));
}

VectorXr score_all(const DiscriminatorParams& d, UserId u) {
    return d.item_factors * d.user_factors.row(u).transpose();
}

ItemId sample_negative(std::span<const ItemId> train_items, Eigen::Index num_items, Rng& rng) {
    while (true) {
        auto j = static_cast<ItemId>(uniform_index(rng, static_cast<std::uint64_t>(num_items)));
        if (!std::binary_search(train_items.begin(), train_items.end(), j)) return j;
    }
}

std::optional<TrainingQuad> sample_quad(std::span<const ItemId> train_items, Eigen::Index num_items, UserId u,
                                        SoftSelection z, Rng& rng) {
    if (train_items.empty() || static_cast<Eigen::Index>(train_items.size()) >= num_items) return std::nullopt;
    TrainingQuad q;
    q.user = u;
    q.positive = train_items[uniform_index(rng, train_items.size())];
    q.negative = sample_negative(train_items, num_items, rng);
    q.generated = std::move(z);
    return q;
}

double discriminator_loss(const DiscriminatorParams& d, const TrainingQuad& quad) {
    const double x_ui = score(d, quad.user, quad.positive);
    const double x_uj = score(d, quad.user, quad.negative);
    const double x_uz = soft_score(d, quad.user, quad.generated);
    const double reg = d.user_factors.row(quad.user).squaredNorm() + d.item_factors.row(quad.positive).squaredNorm() +
                       d.item_factors.row(quad.negative).squaredNorm() + soft_norm(d, quad.generated);
    return -(log_logistic(x_ui - x_uz) + log_logistic(x_uz - x_uj)) + d.lambda * reg;
}

double bpr_loss(const DiscriminatorParams& d, UserId u, ItemId i, ItemId j) {
    const double reg = d.user_factors.row(u).squaredNorm() + d.item_factors.row(i).squaredNorm() +
                       d.item_factors.row(j).squaredNorm();
    return -log_logistic(score(d, u, i) - score(d, u, j)) + d.lambda * reg;
}

double discriminator_step(DiscriminatorParams& d, const TrainingQuad& quad, double lr) {
    const double loss = discriminator_loss(d, quad);
    const UserId u = quad.user;
    const Eigen::RowVectorXd p = d.user_factors.row(u);
    const Eigen::RowVectorXd q_i = d.item_factors.row(quad.positive);
    const Eigen::RowVectorXd q_j = d.item_factors.row(quad.negative);
    const Eigen::RowVectorXd q_z = soft_item_factor(d, quad.generated);

    // dL/dA and dL/dB for A = x_ui - x_uz, B = x_uz - x_uj, negated.
    const double ga = logistic(-p.dot(q_i - q_z));
    const double gb = logistic(-p.dot(q_z - q_j));
    const double lam2 = 2.0 * d.lambda;

    const Eigen::RowVectorXd grad_p = -ga * (q_i - q_z) - gb * (q_z - q_j) + lam2 * p;

    // Gradients are taken at the pre-step point: each support row is read
    // just before its own write, and i, j use the copies taken above.
    d.user_factors.row(u) -= lr * grad_p;
    quad.generated.for_each_above(kSupportFloor, [&](Eigen::Index k, double w) {
        d.item_factors.row(k) -= (lr * w) * ((ga - gb) * p + lam2 * d.item_factors.row(k));
    });
    d.item_factors.row(quad.positive) -= lr * (-ga * p + lam2 * q_i);
    d.item_factors.row(quad.negative) -= lr * (gb * p + lam2 * q_j);
    return loss;
}

double bpr_step(DiscriminatorParams& d, UserId u, ItemId i, ItemId j, double lr) {
    const double loss = bpr_loss(d, u, i, j);
    const Eigen::RowVectorXd p = d.user_factors.row(u);
    const Eigen::RowVectorXd q_i = d.item_factors.row(i);
    const Eigen::RowVectorXd q_j = d.item_factors.row(j);
    const double g = logistic(-p.dot(q_i - q_j));
    const double lam2 = 2.0 * d.lambda;
    d.user_factors.row(u) -= lr * (-g * (q_i - q_j) + lam2 * p);
    d.item_factors.row(i) -= lr * (-g * p + lam2 * q_i);
    d.item_factors.row(j) -= lr * (g * p + lam2 * q_j);
    return loss;
}

ItemList top_k(const VectorXr& scores, std::size_t k, std::span<const ItemId> exclude) {
    ItemList candidates;
    candidates.reserve(static_cast<std::size_t>(scores.size()));
    auto ex = exclude.begin();
    for (ItemId i = 0; i < static_cast<ItemId>(scores.size()); ++i) {
        while (ex != exclude.end() && *ex < i) ++ex;
        if (ex != exclude.end() && *ex == i) continue;
        candidates.push_back(i);
    }
    k = std::min(k, candidates.size());
    auto better = [&](ItemId a, ItemId b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(),
                      better);
    candidates.resize(k);
    return candidates;
}

ItemList rank_items(const DiscriminatorParams& d, UserId u, std::size_t k, std::span<const ItemId> exclude) {
    return top_k(score_all(d, u), k, exclude);
}

}  // namespace rsgan
