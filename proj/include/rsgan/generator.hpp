#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rsgan/discriminator.hpp"
#include "rsgan/gumbel.hpp"
#include "rsgan/hetgraph.hpp"
#include "rsgan/random.hpp"
#include "rsgan/types.hpp"

namespace rsgan {

/// Generator parameters: a collaborative denoising autoencoder over social
/// profiles plus the per-(user, item) score matrix that gates item sampling.
struct GeneratorParams {
    MatrixXr w_in;         // m x h
    VectorXr b_hidden;     // h
    MatrixXr user_node;    // m x h, added at the hidden layer for the target user
    MatrixXr w_out;        // h x m
    VectorXr b_out;        // m
    MatrixXr item_scores;  // m x n ("H"), starts at all ones
    double temperature = 0.2;
    double corruption = 0.2;

    Eigen::Index num_users() const { return w_in.rows(); }
    Eigen::Index hidden() const { return w_in.cols(); }
    Eigen::Index num_items() const { return item_scores.cols(); }
};

GeneratorParams init_generator(Eigen::Index num_users, Eigen::Index num_items, Eigen::Index hidden,
                               double temperature, double corruption, std::uint64_t master_seed);

struct CdaeOutput {
    VectorXr hidden;  // logistic activations
    VectorXr scores;  // c, unbounded
};

/// hidden = logistic(W_in^T s + U_node[u] + b_hidden); c = W_out^T hidden + b_out.
CdaeOutput cdae_forward(const GeneratorParams& g, UserId u, const VectorXr& input);

/// Softmax over users with `exclude_self` forced to zero.
VectorXr friend_distribution(const VectorXr& scores, UserId exclude_self);

/// Indicator vector of a user's seeded friends.
VectorXr seed_indicator(const SeededFriendSet& seeds, UserId u);

/// Zeroes each positive entry independently with probability `rate`.
VectorXr corrupt(const VectorXr& input, double rate, Rng& rng);

struct PretrainOptions {
    int epochs = 30;
    double lr = 0.1;
    int negative_ratio = 5;
};

/// Logistic cross-entropy reconstruction of each user's seeded-friend vector
/// from its corrupted copy; positives are the seeds and 5x as many uniformly
/// drawn non-friends are negatives. Users without seeds are skipped.
GeneratorParams pretrain_cdae(GeneratorParams g, const SeededFriendSet& seeds, const PretrainOptions& opts,
                              std::uint64_t master_seed);

/// Friend draw: gumbel_softmax(log(p + 1e-12), noise, tau) with self masked.
SoftSelection sample_friend(const GeneratorParams& g, UserId u, const VectorXr& friend_probs, Rng& rng);

/// Same as sample_friend with caller-provided noise.
SoftSelection relax_friend(const GeneratorParams& g, UserId u, const VectorXr& friend_probs,
                           const VectorXr& noise);

/// (v^T R) .* H[u], masking items with v^T R below 1e-8 and items in
/// `consumed` (ascending). `friend_items` receives v^T R. nullopt when
/// nothing is left.
std::optional<VectorXr> item_logits(const SoftSelection& v, const SparseFeedback& train, const GeneratorParams& g,
                                    UserId u, std::span<const ItemId> consumed, VectorXr* friend_items = nullptr);

SoftSelection sample_item(const VectorXr& logits, Rng& rng, double temperature);

/// Everything the backward pass needs from one forward pass for one user.
struct GeneratorTrace {
    UserId user = 0;
    VectorXr input;         // corrupted seed indicator
    CdaeOutput cdae;
    VectorXr friend_probs;  // p_u
    VectorXr friend_noise;
    SoftSelection friend_sel;  // v
    VectorXr friend_items;     // v^T R
    VectorXr item_logits;      // masked
    std::vector<Eigen::Index> item_support;  // unmasked item indices, ascending
};

/// One forward pass up to (and including) the item logits. nullopt when the
/// sampled friend offers no candidate item.
std::optional<GeneratorTrace> generator_forward(const GeneratorParams& g, UserId u, const VectorXr& input,
                                                const SparseFeedback& train, std::span<const ItemId> consumed,
                                                const VectorXr& friend_noise);

/// One generated item paired with the user's own positive.
struct ItemDraw {
    ItemId positive = 0;
    VectorXr noise;
    SoftSelection z;
};

ItemDraw draw_item(const GeneratorTrace& trace, ItemId positive, Rng& rng, double temperature);

/// Gradient of L_G = sum over draws of -log s(x_ui - x_uz) with respect to
/// the generator parameters that the trace touched.
struct GeneratorGradient {
    UserId user = 0;
    std::vector<Eigen::Index> input_rows;  // rows of W_in with non-zero input
    MatrixXr w_in_rows;                    // |input_rows| x h
    VectorXr b_hidden;
    VectorXr user_node;                    // row U_node[user]
    MatrixXr w_out;                        // h x m
    VectorXr b_out;
    VectorXr item_scores;                  // row H[user]
    double loss = 0.0;
};

/// Gumbel noise is a constant. Applying the result with a positive step
/// (ascent) raises x_uz.
GeneratorGradient generator_backward(const GeneratorParams& g, const DiscriminatorParams& d,
                                     const SparseFeedback& train, const GeneratorTrace& trace,
                                     std::span<const ItemDraw> draws);

/// L_G recomputed from scratch for fixed noise; used by gradient checks.
double generator_loss(const GeneratorParams& g, const DiscriminatorParams& d, UserId u, const VectorXr& input,
                      const SparseFeedback& train, std::span<const ItemId> consumed, const VectorXr& friend_noise,
                      std::span<const ItemDraw> draws);

/// params += step * grad.
void apply_gradient(GeneratorParams& g, const GeneratorGradient& grad, double step);

/// Noise-free, corruption-free friend distribution for evaluation.
VectorXr friend_probabilities(const GeneratorParams& g, const SeededFriendSet& seeds, UserId u);

}  // namespace rsgan
