#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rsgan/data.hpp"
#include "rsgan/discriminator.hpp"
#include "rsgan/generator.hpp"
#include "rsgan/hetgraph.hpp"

namespace rsgan {

struct TrainConfig {
    int batch_size = 512;        // users per generator step
    int dim = 50;
    int hidden = 200;
    double temperature = 0.2;
    double corruption = 0.2;
    double lambda = 0.001;
    double lr_d = 0.05;
    double lr_g = 0.01;
    double lr_decay = 0.9;       // multiplicative, per epoch
    double pretrain_lr = 0.1;
    int pretrain_epochs = 30;
    int max_epochs = 200;
    int warmup_epochs = 0;       // plain BPR epochs on the discriminator first
    int d_steps_per_g_step = 1;
    int patience = 10;
    int quads_per_user = 0;      // 0: one quad per training item of the user
    int random_friends = 50;     // pool size for the random-friend ablation
    bool hard_z = false;
    bool epoch_alternation = false;
    std::uint64_t master_seed = 42;
    int threads = 1;

    /// Throws ConfigError on non-positive sizes, rates or temperature.
    void validate() const;
    /// key=value pairs in a fixed order, for checkpoints.
    std::vector<std::pair<std::string, std::string>> echo() const;
    /// Inverse of echo(); unknown keys are ignored, missing keys keep defaults.
    static TrainConfig from_echo(const std::vector<std::pair<std::string, std::string>>& pairs);
};

struct EpochRecord {
    int epoch = 0;
    double loss_d = 0.0;
    double loss_g = 0.0;
    double val_ndcg = 0.0;       // NDCG@10 on validation items
    double val_precision = 0.0;  // Precision@10 on validation items
};

struct TrainState {
    int epoch = 0;  // completed epochs
    double best_ndcg = -1.0;
    int best_epoch = 0;
    int since_improvement = 0;
    std::vector<EpochRecord> history;
};

enum class Phase { DiscriminatorBegin, DiscriminatorEnd, GeneratorBegin, GeneratorEnd };

/// Optional hooks. `phase` fires around every block of discriminator steps
/// and every generator update, with the live parameters.
struct TrainCallbacks {
    std::function<void(const EpochRecord&)> epoch;
    std::function<void(Phase, const GeneratorParams&, const DiscriminatorParams&)> phase;
};

/// Where the discriminator's generated items come from.
enum class FriendSource {
    Generator,  // the adversarially trained generator
    Random,     // a fixed pool of random users per user, no generator updates
};

struct TrainResult {
    GeneratorParams generator;
    DiscriminatorParams discriminator;
    TrainState state;
};

/// CDAE pretraining on the seeded friends, as the adversarial run starts it.
GeneratorParams pretrained_generator(Eigen::Index num_users, Eigen::Index num_items, const SeededFriendSet& seeds,
                                     const TrainConfig& cfg);

/// Pretrains the CDAE, then per epoch visits users in shuffled order. For
/// each user the generator (frozen for the current batch of users) proposes
/// a friend and one item per quad; the discriminator takes an SGD step per
/// quad with the generator frozen; the generator gradient is then taken with
/// the discriminator frozen and applied by ascent at the end of the batch
/// (the user's own row of H, which no other user reads, is applied at once).
/// Stops on patience over validation NDCG@10 and returns the best snapshot.
TrainResult adversarial_train(const FoldSplit& fold, Eigen::Index num_items, const SeededFriendSet& seeds,
                              const TrainConfig& cfg, FriendSource source = FriendSource::Generator,
                              const TrainCallbacks& callbacks = {});

/// Plain BPR over (u, i, j) triples with the same schedule and early stopping.
TrainResult train_bpr_baseline(const FoldSplit& fold, Eigen::Index num_items, const TrainConfig& cfg,
                               const TrainCallbacks& callbacks = {});

/// One BPR epoch over every training pair; returns the mean loss.
double bpr_epoch(DiscriminatorParams& d, const FoldSplit& fold, double lr, std::uint64_t master_seed, int epoch);

/// Order-sensitive FNV-1a hash over raw parameter bytes.
std::uint64_t parameter_hash(const GeneratorParams& g);
std::uint64_t parameter_hash(const DiscriminatorParams& d);

}  // namespace rsgan
