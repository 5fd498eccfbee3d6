#pragma once

#include <optional>
#include <span>

#include "rsgan/gumbel.hpp"
#include "rsgan/random.hpp"
#include "rsgan/types.hpp"

namespace rsgan {

/// Matrix-factorisation ranker: x_ui = P[u] . Q[i].
struct DiscriminatorParams {
    MatrixXr user_factors;  // m x d
    MatrixXr item_factors;  // n x d
    double lambda = 0.001;

    Eigen::Index num_users() const { return user_factors.rows(); }
    Eigen::Index num_items() const { return item_factors.rows(); }
    Eigen::Index dim() const { return user_factors.cols(); }
};

/// Factors i.i.d. uniform on (-0.05, 0.05).
DiscriminatorParams init_discriminator(Eigen::Index num_users, Eigen::Index num_items, Eigen::Index dim,
                                       double lambda, std::uint64_t master_seed);

/// Entries of a soft selection below this are treated as outside its support.
inline constexpr double kSupportFloor = 1e-12;

/// (u, i, z, j): own positive, generated item, sampled negative.
struct TrainingQuad {
    UserId user = 0;
    ItemId positive = 0;
    SoftSelection generated;
    ItemId negative = 0;
};

inline double score(const DiscriminatorParams& d, UserId u, ItemId i) {
    return d.user_factors.row(u).dot(d.item_factors.row(i));
}

/// Expected score under z: sum_k z_k x_uk over z's support.
double soft_score(const DiscriminatorParams& d, UserId u, const SoftSelection& z);

/// Scores of every item for one user.
VectorXr score_all(const DiscriminatorParams& d, UserId u);

/// Positive uniform over `train_items` (ascending), negative uniform over the
/// rest by rejection. nullopt when the user has no positives or no negatives.
std::optional<TrainingQuad> sample_quad(std::span<const ItemId> train_items, Eigen::Index num_items, UserId u,
                                        SoftSelection z, Rng& rng);

/// Uniform negative outside `train_items` (ascending). Caller guarantees one exists.
ItemId sample_negative(std::span<const ItemId> train_items, Eigen::Index num_items, Rng& rng);

/// -[log s(x_ui - x_uz) + log s(x_uz - x_uj)] + lambda * (touched squared norms,
/// z-weighted for the generated item).
double discriminator_loss(const DiscriminatorParams& d, const TrainingQuad& quad);

/// -log s(x_ui - x_uj) + lambda (|P_u|^2 + |Q_i|^2 + |Q_j|^2).
double bpr_loss(const DiscriminatorParams& d, UserId u, ItemId i, ItemId j);

/// One SGD descent step on discriminator_loss with z held constant. Only the
/// touched rows move. Returns the loss before the step.
double discriminator_step(DiscriminatorParams& d, const TrainingQuad& quad, double lr);

/// One SGD descent step on bpr_loss. Returns the loss before the step.
double bpr_step(DiscriminatorParams& d, UserId u, ItemId i, ItemId j, double lr);

/// Top-k items by score, skipping `exclude` (ascending); ties go to the lower id.
ItemList rank_items(const DiscriminatorParams& d, UserId u, std::size_t k, std::span<const ItemId> exclude);

/// Same ranking rule over an arbitrary score vector.
ItemList top_k(const VectorXr& scores, std::size_t k, std::span<const ItemId> exclude);

}  // namespace rsgan
