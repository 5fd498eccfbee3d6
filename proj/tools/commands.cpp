#include "commands.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "rsgan/checkpoint.hpp"
#include "rsgan/data.hpp"
#include "rsgan/eval.hpp"
#include "rsgan/hetgraph.hpp"
#include "rsgan/trainer.hpp"

namespace rsgan::cli {

namespace fs = std::filesystem;

namespace {

// ================================================================
// options; every field is one flag and one config key
// ================================================================

struct Options {
    // global
    std::uint64_t seed = 42;
    std::string out = "rsgan_out";
    int threads = 1;

    // prepare
    std::string interactions;
    std::string social;
    double threshold = 0.0;
    int folds = 5;
    double link_holdout = 0.2;

    // seed
    std::string meta_paths = "U-U,U-I-U,U-U-I-U";
    int walks = 10;
    int walk_length = 40;
    int emb_dim = 64;
    int window = 5;
    int neg = 5;
    int sg_epochs = 1;
    double sg_lr = 0.025;
    int k_seed = 10;
    double min_sim = 0.0;

    // train / eval / linkpred / analyze
    std::string model = "rsgan";
    std::string models = "bpr,rsgan,random";
    int fold = -1;  // -1: every fold
    std::string seeds_file;
    TrainConfig train;
    std::string ks = "10,20";
    std::string link_ks = "10";
    int cold_max = 10;
    int top_t = 20;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<int> parse_ks(const std::string& text) {
    std::vector<int> ks;
    for (const auto& s : split_list(text)) {
        std::size_t used = 0;
        int k = 0;
        try {
            k = std::stoi(s, &used);
        } catch (const std::logic_error&) {
            used = 0;
        }
        if (used != s.size() || k < 1) throw ConfigError("bad cut-off list '" + text + "'");
        ks.push_back(k);
    }
    if (ks.empty()) throw ConfigError("empty cut-off list");
    return ks;
}

// ================================================================
// workspace layout
// ================================================================

struct Workspace {
    fs::path root;

    fs::path interactions() const { return root / "interactions.tsv"; }
    fs::path social() const { return root / "social.tsv"; }
    fs::path social_train() const { return root / "social_train.tsv"; }
    fs::path social_heldout() const { return root / "social_heldout.tsv"; }
    fs::path folds() const { return root / "folds.tsv"; }
    fs::path summary() const { return root / "summary.tsv"; }
    fs::path seeds(int f) const { return root / ("seeds_fold" + std::to_string(f) + ".tsv"); }
    fs::path checkpoint(const std::string& model, int f) const {
        return root / (model + "_fold" + std::to_string(f) + ".ckpt");
    }
    fs::path curve(const std::string& model, int f) const {
        return root / (model + "_fold" + std::to_string(f) + "_curve.tsv");
    }
};

struct Prepared {
    Dataset dataset;
    std::vector<FoldSplit> folds;
};

Prepared load_prepared(const Workspace& ws) {
    Prepared p;
    p.dataset = build_dataset(load_interactions(ws.interactions(), 0.0).records);
    p.folds = read_fold_manifest(ws.folds(), p.dataset);
    return p;
}

std::vector<int> selected_folds(const Options& o, std::size_t available) {
    if (o.fold >= 0) {
        if (static_cast<std::size_t>(o.fold) >= available)
            throw ConfigError("fold " + std::to_string(o.fold) + " does not exist (have " +
                              std::to_string(available) + ")");
        return {o.fold};
    }
    std::vector<int> all(available);
    for (std::size_t f = 0; f < available; ++f) all[f] = static_cast<int>(f);
    return all;
}

Checkpoint open_checkpoint(const fs::path& path) {
    if (!fs::exists(path)) throw FormatError("missing checkpoint " + path.string());
    try {
        return load_checkpoint(path);
    } catch (const IoError& e) {
        throw FormatError(e.what());
    }
}

SeededFriendSet seeds_for(const Options& o, const Workspace& ws, const Dataset& ds, int fold) {
    const fs::path path = o.seeds_file.empty() ? ws.seeds(fold) : fs::path(o.seeds_file);
    return load_seeded_friends(path, ds).seeds;
}

void check_dims(const Checkpoint& ckpt, const Dataset& ds, const fs::path& path) {
    if (ckpt.discriminator.num_users() != ds.num_users() || ckpt.discriminator.num_items() != ds.num_items())
        throw FormatError(path.string() + ": checkpoint dimensions do not match the prepared dataset");
}

// ================================================================
// subcommands
// ================================================================

int cmd_prepare(const Options& o, std::ostream& out) {
    if (o.interactions.empty() || o.social.empty())
        throw ConfigError("prepare needs --interactions and --social");
    const Workspace ws{o.out};
    const InteractionLoad load = load_interactions(o.interactions, o.threshold);
    const Dataset ds = build_dataset(load.records);
    const SocialLoad social = load_social(o.social, ds);
    const auto folds = split_folds(ds, o.folds, o.seed);
    if (!(o.link_holdout >= 0.0 && o.link_holdout < 1.0)) throw ConfigError("link-holdout must be in [0, 1)");
    const auto [social_train, heldout] = split_social_links(social.graph, o.link_holdout, o.seed);

    fs::create_directories(ws.root);
    write_interactions(ws.interactions(), ds);
    write_social(ws.social(), ds, social.graph);
    write_social(ws.social_train(), ds, social_train);
    write_social(ws.social_heldout(), ds, heldout);
    write_fold_manifest(ws.folds(), ds, folds);

    std::ofstream summary(ws.summary(), std::ios::binary);
    if (!summary) throw IoError("cannot write " + ws.summary().string());
    summary << "users\titems\tfeedback\trelations\tlines\tduplicates\tbelow_threshold\tsocial_lines\tself_loops"
               "\tunknown_endpoints\n"
            << ds.num_users() << '\t' << ds.num_items() << '\t' << ds.num_interactions() << '\t'
            << social.relations << '\t' << load.lines << '\t' << load.duplicates << '\t' << load.below_threshold
            << '\t' << social.lines << '\t' << social.self_loops << '\t' << social.unknown_endpoints << '\n';
    out << ds.num_users() << ' ' << ds.num_items() << ' ' << ds.num_interactions() << ' ' << social.relations
        << '\n';
    return kExitOk;
}

int cmd_seed(const Options& o, std::ostream& out) {
    const Workspace ws{o.out};
    const Prepared p = load_prepared(ws);
    const SocialGraph social = load_social(ws.social_train(), p.dataset).graph;
    std::vector<MetaPath> paths;
    for (const auto& text : split_list(o.meta_paths)) paths.push_back(MetaPath::parse(text));
    if (paths.empty()) throw ConfigError("no meta-paths given");

    for (int f : selected_folds(o, p.folds.size())) {
        const WalkCorpus corpus = generate_walks(p.folds[f].train, p.dataset.num_items(), social, paths,
                                                 {o.walks, o.walk_length}, o.seed);
        const MatrixXr emb = train_skipgram(corpus, p.dataset.num_users(),
                                            {o.emb_dim, o.window, o.neg, o.sg_epochs, o.sg_lr}, o.seed);
        const SeededFriendSet seeds = select_seeded_friends(emb, o.k_seed, o.min_sim);
        write_seeded_friends(ws.seeds(f), p.dataset, seeds);
        out << "fold " << f << ": " << seeds.num_pairs() << " seeded pairs\n";
    }
    return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
    if (o.model != "bpr" && o.model != "rsgan" && o.model != "random")
        throw ConfigError("--model must be bpr, rsgan or random");
    const Workspace ws{o.out};
    const Prepared p = load_prepared(ws);
    TrainConfig cfg = o.train;
    cfg.master_seed = o.seed;
    cfg.threads = o.threads;
    cfg.validate();

    for (int f : selected_folds(o, p.folds.size())) {
        const FoldSplit& fold = p.folds[f];
        std::ofstream curve(ws.curve(o.model, f), std::ios::binary);
        if (!curve) throw IoError("cannot write " + ws.curve(o.model, f).string());
        curve << "epoch\tloss_D\tloss_G\tval_ndcg@10\tval_precision@10\n" << std::setprecision(10);
        TrainCallbacks callbacks;
        callbacks.epoch = [&curve](const EpochRecord& r) {
            curve << r.epoch << '\t' << r.loss_d << '\t' << r.loss_g << '\t' << r.val_ndcg << '\t'
                  << r.val_precision << '\n';
        };

        TrainResult result;
        if (o.model == "bpr") {
            result = train_bpr_baseline(fold, p.dataset.num_items(), cfg, callbacks);
        } else if (o.model == "random") {
            result = adversarial_train(fold, p.dataset.num_items(), {}, cfg, FriendSource::Random, callbacks);
        } else {
            const SeededFriendSet seeds = seeds_for(o, ws, p.dataset, f);
            result = adversarial_train(fold, p.dataset.num_items(), seeds, cfg, FriendSource::Generator, callbacks);
        }

        Checkpoint ckpt;
        ckpt.generator = std::move(result.generator);
        ckpt.discriminator = std::move(result.discriminator);
        ckpt.config = cfg.echo();
        ckpt.config.emplace_back("model", o.model);
        ckpt.config.emplace_back("fold", std::to_string(f));
        save_checkpoint(ckpt, ws.checkpoint(o.model, f));
        out << o.model << " fold " << f << ": " << result.state.epoch << " epochs, best epoch "
            << result.state.best_epoch << '\n';
    }
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const Workspace ws{o.out};
    const Prepared p = load_prepared(ws);
    const std::vector<int> ks = parse_ks(o.ks);
    const auto folds = selected_folds(o, p.folds.size());

    std::vector<std::pair<std::string, MetricReport>> overall, cold;
    for (const auto& model : split_list(o.models)) {
        std::vector<MetricReport> per_fold, per_fold_cold;
        for (int f : folds) {
            const fs::path path = ws.checkpoint(model, f);
            const Checkpoint ckpt = open_checkpoint(path);
            check_dims(ckpt, p.dataset, path);
            per_fold.push_back(evaluate_ranking(ckpt.discriminator, p.folds[f], Target::Test, ks, o.threads));
            per_fold_cold.push_back(
                evaluate_cold_start(ckpt.discriminator, p.folds[f], o.cold_max, ks, o.threads));
        }
        overall.emplace_back(model, mean_report(per_fold));
        cold.emplace_back(model, mean_report(per_fold_cold));
    }
    write_report_tsv(ws.root / "eval.tsv", overall);
    write_report_json(ws.root / "eval.json", overall);
    write_report_tsv(ws.root / "eval_cold.tsv", cold);
    write_report_json(ws.root / "eval_cold.json", cold);

    out << std::fixed << std::setprecision(5);
    for (const auto& [name, r] : overall) {
        out << name;
        for (int k : r.ks) out << "  P@" << k << '=' << r[k].precision << "  R@" << k << '=' << r[k].recall
                               << "  NDCG@" << k << '=' << r[k].ndcg;
        out << "  (" << r.users << " users)\n";
    }
    return kExitOk;
}

int cmd_linkpred(const Options& o, std::ostream& out) {
    const Workspace ws{o.out};
    const Prepared p = load_prepared(ws);
    const SocialGraph heldout = load_social(ws.social_heldout(), p.dataset).graph;
    const std::vector<int> ks = parse_ks(o.link_ks);

    std::vector<MetricReport> trained, pretrained;
    for (int f : selected_folds(o, p.folds.size())) {
        const fs::path path = ws.checkpoint(o.model, f);
        const Checkpoint ckpt = open_checkpoint(path);
        check_dims(ckpt, p.dataset, path);
        if (!ckpt.has_generator()) throw FormatError(path.string() + ": checkpoint has no generator");
        const SeededFriendSet seeds = seeds_for(o, ws, p.dataset, f);
        const TrainConfig cfg = TrainConfig::from_echo(ckpt.config);
        const GeneratorParams cdae = pretrained_generator(p.dataset.num_users(), p.dataset.num_items(), seeds, cfg);
        pretrained.push_back(link_prediction_eval(cdae, seeds, heldout, ks, o.threads));
        trained.push_back(link_prediction_eval(ckpt.generator, seeds, heldout, ks, o.threads));
    }
    const std::vector<std::pair<std::string, MetricReport>> reports = {{"cdae", mean_report(pretrained)},
                                                                       {o.model, mean_report(trained)}};
    write_report_tsv(ws.root / "linkpred.tsv", reports);
    write_report_json(ws.root / "linkpred.json", reports);
    if (reports.front().second.empty()) {
        out << "no users evaluated\n";
        return kExitOk;
    }
    out << std::fixed << std::setprecision(5);
    for (const auto& [name, r] : reports) {
        out << name;
        for (int k : r.ks) out << "  P@" << k << '=' << r[k].precision << "  NDCG@" << k << '=' << r[k].ndcg;
        out << "  (" << r.users << " users)\n";
    }
    return kExitOk;
}

int cmd_analyze(const Options& o, std::ostream& out) {
    const Workspace ws{o.out};
    const Prepared p = load_prepared(ws);
    const int f = o.fold >= 0 ? o.fold : 0;
    if (static_cast<std::size_t>(f) >= p.folds.size()) throw ConfigError("fold " + std::to_string(f) + " does not exist");
    const fs::path path = ws.checkpoint(o.model, f);
    const Checkpoint ckpt = open_checkpoint(path);
    check_dims(ckpt, p.dataset, path);
    if (!ckpt.has_generator()) throw FormatError(path.string() + ": checkpoint has no generator");

    const SeededFriendSet seeds = seeds_for(o, ws, p.dataset, f);
    const SocialGraph explicit_links = load_social(ws.social(), p.dataset).graph;
    const ReliableNetwork net = export_reliable_network(ckpt.generator, seeds, o.top_t);
    const OverlapStats stats = overlap_stats(net, seeds, explicit_links);

    write_reliable_edges(ws.root / "reliable_edges.tsv", p.dataset, net);
    write_follower_histogram(ws.root / "follower_histogram.tsv", net);
    std::ofstream overlap(ws.root / "overlap.tsv", std::ios::binary);
    if (!overlap) throw IoError("cannot write " + (ws.root / "overlap.tsv").string());
    auto show = [](const std::optional<double>& v) {
        if (!v) return std::string("NA");
        std::ostringstream os;
        os << std::fixed << std::setprecision(8) << *v;
        return os.str();
    };
    overlap << "seed_retention\texplicit_retention\n"
            << show(stats.seed_retention) << '\t' << show(stats.explicit_retention) << '\n';
    out << net.num_edges() << " reliable edges; seed_retention=" << show(stats.seed_retention)
        << " explicit_retention=" << show(stats.explicit_retention) << '\n';
    return kExitOk;
}

void append_run_log(const Options& o, std::span<const std::string> args, int code) {
    std::error_code ec;
    fs::create_directories(o.out, ec);
    std::ofstream log(fs::path(o.out) / "run.log", std::ios::app);
    if (!log) return;
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    log << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ") << "\texit=" << code << '\t';
    for (std::size_t k = 1; k < args.size(); ++k) log << (k > 1 ? " " : "") << args[k];
    log << '\n';
}

// ================================================================
// parser
// ================================================================

struct Parser {
    CLI::App app{"Adversarial social recommendation: prepare, seed, train, eval, linkpred, analyze.", "rsgan"};
    Options o;
    CLI::App* prepare = nullptr;
    CLI::App* seed = nullptr;
    CLI::App* train = nullptr;
    CLI::App* eval = nullptr;
    CLI::App* linkpred = nullptr;
    CLI::App* analyze = nullptr;

    Parser() {
        app.fallthrough();
        app.option_defaults()->always_capture_default();
        app.set_config("--config", "", "flat key=value file; subcommand keys are written <subcommand>.<key>");
        app.allow_config_extras(CLI::config_extras_mode::error);
        app.require_subcommand(1);
        app.add_option("--seed", o.seed, "master seed");
        app.add_option("--out", o.out, "workspace directory for every artifact");
        app.add_option("--threads", o.threads, "worker threads for evaluation")->check(CLI::PositiveNumber);

        prepare = app.add_subcommand("prepare", "load raw files, write the workspace and fold manifests");
        prepare->add_option("--interactions", o.interactions, "user<TAB>item[<TAB>rating] file");
        prepare->add_option("--social", o.social, "truster<TAB>trustee file");
        prepare->add_option("--threshold", o.threshold, "minimum rating kept");
        prepare->add_option("--folds", o.folds, "number of cross-validation folds");
        prepare->add_option("--link-holdout", o.link_holdout, "fraction of each user's followees held out");

        seed = app.add_subcommand("seed", "extract seeded friends per fold from meta-path walks");
        seed->add_option("--meta-paths", o.meta_paths, "comma-separated meta-paths");
        seed->add_option("--walks", o.walks, "walks per user and meta-path");
        seed->add_option("--walk-length", o.walk_length, "users emitted per walk");
        seed->add_option("--dim", o.emb_dim, "embedding dimension");
        seed->add_option("--window", o.window, "skip-gram window");
        seed->add_option("--neg", o.neg, "negative samples per positive");
        seed->add_option("--epochs", o.sg_epochs, "skip-gram passes over the corpus");
        seed->add_option("--lr", o.sg_lr, "initial skip-gram learning rate");
        seed->add_option("--k-seed", o.k_seed, "seeded friends per user");
        seed->add_option("--min-sim", o.min_sim, "minimum cosine similarity");
        seed->add_option("--fold", o.fold, "fold to process, -1 for all");

        auto& t = o.train;
        train = app.add_subcommand("train", "train bpr, rsgan or the random-friend ablation");
        train->add_option("--model", o.model, "bpr, rsgan or random");
        train->add_option("--fold", o.fold, "fold to train, -1 for all");
        train->add_option("--seeds", o.seeds_file, "seeded-friend file overriding the per-fold one");
        train->add_option("--dim", t.dim, "latent factor dimension");
        train->add_option("--hidden", t.hidden, "generator hidden units");
        train->add_option("--tau", t.temperature, "Gumbel-Softmax temperature");
        train->add_option("--corrupt", t.corruption, "input corruption rate");
        train->add_option("--lambda", t.lambda, "L2 regularisation");
        train->add_option("--lr", t.lr_d, "discriminator learning rate");
        train->add_option("--lr-g", t.lr_g, "generator learning rate");
        train->add_option("--lr-decay", t.lr_decay, "per-epoch learning rate decay");
        train->add_option("--batch-size", t.batch_size, "users per generator update");
        train->add_option("--epochs", t.max_epochs, "maximum epochs");
        train->add_option("--patience", t.patience, "epochs without validation gain before stopping");
        train->add_option("--pretrain-epochs", t.pretrain_epochs, "generator pretraining epochs");
        train->add_option("--pretrain-lr", t.pretrain_lr, "generator pretraining learning rate");
        train->add_option("--warmup-epochs", t.warmup_epochs, "plain BPR epochs before adversarial training");
        train->add_option("--d-steps", t.d_steps_per_g_step, "discriminator passes per generator step");
        train->add_option("--quads-per-user", t.quads_per_user, "quads per user per epoch, 0 for one per item");
        train->add_option("--random-friends", t.random_friends, "pool size of the random-friend ablation");
        train->add_flag("--hard-z", t.hard_z, "feed the discriminator one-hot generated items");
        train->add_flag("--epoch-alternation", t.epoch_alternation, "one generator update per epoch");

        eval = app.add_subcommand("eval", "top-K ranking reports on the test split");
        eval->add_option("--models", o.models, "comma-separated model names");
        eval->add_option("--fold", o.fold, "fold to evaluate, -1 for the mean over all");
        eval->add_option("--ks", o.ks, "comma-separated cut-offs");
        eval->add_option("--cold-max", o.cold_max, "cold-start users have fewer training items than this");

        linkpred = app.add_subcommand("linkpred", "held-out followee prediction, pretrained vs trained generator");
        linkpred->add_option("--model", o.model, "checkpoint name prefix");
        linkpred->add_option("--fold", o.fold, "fold to evaluate, -1 for the mean over all");
        linkpred->add_option("--seeds", o.seeds_file, "seeded-friend file overriding the per-fold one");
        linkpred->add_option("--ks", o.link_ks, "comma-separated cut-offs");

        analyze = app.add_subcommand("analyze", "reliable-friend network, follower histogram, overlap");
        analyze->add_option("--model", o.model, "checkpoint name prefix");
        analyze->add_option("--fold", o.fold, "fold to analyze");
        analyze->add_option("--seeds", o.seeds_file, "seeded-friend file overriding the per-fold one");
        analyze->add_option("--top-t", o.top_t, "reliable friends kept per user");
    }
};

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    Parser parser;
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    if (argv.empty()) argv.push_back("rsgan");

    try {
        parser.app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        // The top-level help lists every subcommand with all its keys and defaults.
        const auto subs = parser.app.get_subcommands();
        out << (subs.empty() ? parser.app.help("", CLI::AppFormatMode::All) : subs.front()->help());
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }

    const Options& o = parser.o;
    int code = kExitOk;
    try {
        if (*parser.prepare) code = cmd_prepare(o, out);
        else if (*parser.seed) code = cmd_seed(o, out);
        else if (*parser.train) code = cmd_train(o, out);
        else if (*parser.eval) code = cmd_eval(o, out);
        else if (*parser.linkpred) code = cmd_linkpred(o, out);
        else if (*parser.analyze) code = cmd_analyze(o, out);
    } catch (const NumericFault& e) {
        err << "numeric fault";
        if (e.epoch >= 0) err << " in epoch " << e.epoch;
        err << ": " << e.what() << '\n';
        code = kExitNumeric;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << '\n';
        code = kExitFormat;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        code = kExitInput;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        code = kExitInput;
    }
    append_run_log(o, args, code);
    return code;
}

}  // namespace rsgan::cli
