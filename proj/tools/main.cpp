// transience: align two-view time series of different dimensionality by
// alternating latent-projection learning with dynamic time warping.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "transience/commands.hpp"

namespace {

struct GlobalArgs {
    std::string config_file;
    std::vector<std::string> overrides;
    bool seed_set = false;
    std::uint64_t seed = 0;
    std::string out_dir;
};

// config file first, then --set overrides, then dedicated flags
transience::RunConfig assemble_config(const GlobalArgs& args) {
    transience::RunConfig cfg;
    if (!args.config_file.empty()) {
        cfg = transience::load_config(args.config_file, cfg);
    }
    for (const std::string& assignment : args.overrides) {
        transience::apply_override(cfg, assignment);
    }
    if (args.seed_set) cfg.seed = args.seed;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    return cfg;
}

void add_global_options(CLI::App* cmd, GlobalArgs& args) {
    cmd->add_option("--config", args.config_file, "key=value config file");
    cmd->add_option("--set", args.overrides, "override any config key (key=value, repeatable)");
    cmd->add_option("--seed", args.seed, "master seed")->each([&args](const std::string&) {
        args.seed_set = true;
    });
    cmd->add_option("--out", args.out_dir, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"transience: multi-view sequence alignment (TRANSIENCE variants and the CTW baseline)"};
    app.require_subcommand(1);
    app.footer(transience::config_help());

    GlobalArgs args;

    CLI::App* gen = app.add_subcommand("gen", "generate synthetic benchmark pairs");
    add_global_options(gen, args);

    CLI::App* train = app.add_subcommand("train", "train an alignment variant on sequence pairs");
    add_global_options(train, args);
    std::string train_loss, train_variant, data_dir;
    train->add_option("--loss", train_loss, "dependence loss: contrastive | cca | mmi");
    train->add_option("--variant", train_variant, "contrastive | cca | mmi | ctw | uniform");
    train->add_option("--data", data_dir, "input directory with train_<i>_{x,y}.seq");

    CLI::App* eval = app.add_subcommand("eval", "run the variant x seed benchmark and report");
    add_global_options(eval, args);
    std::string eval_variants;
    int eval_seeds = 0;
    eval->add_option("--variants", eval_variants, "comma list of variants to compare");
    eval->add_option("--seeds", eval_seeds, "number of seeds (seed..seed+n-1)");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks for every loss");
    add_global_options(gradcheck, args);
    std::string only_loss, corrupt_loss;
    gradcheck->add_option("--loss", only_loss, "check only losses with this name prefix");
    gradcheck->add_option("--corrupt", corrupt_loss,
                          "deliberately corrupt this loss's gradient (harness test hook)");

    CLI::App* dtw_test = app.add_subcommand("dtw-test", "dtw vs brute-force oracle suite");
    add_global_options(dtw_test, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return transience::kExitUsage;
    }

    return transience::run_guarded([&]() {
        transience::RunConfig cfg = assemble_config(args);
        if (gen->parsed()) return transience::cmd_gen(cfg);
        if (train->parsed()) {
            if (!train_loss.empty() && !train_variant.empty()) {
                throw std::invalid_argument("train: pass either --loss or --variant, not both");
            }
            if (!train_loss.empty()) cfg.variant = train_loss;
            if (!train_variant.empty()) cfg.variant = train_variant;
            if (!data_dir.empty()) cfg.data_dir = data_dir;
            return transience::cmd_train(cfg);
        }
        if (eval->parsed()) {
            if (!eval_variants.empty()) cfg.variants = eval_variants;
            if (eval_seeds > 0) cfg.n_seeds = eval_seeds;
            return transience::cmd_eval(cfg);
        }
        if (gradcheck->parsed()) return transience::cmd_gradcheck(cfg, only_loss, corrupt_loss);
        if (dtw_test->parsed()) return transience::cmd_dtw_test(cfg);
        throw std::invalid_argument("no subcommand");
    });
}
