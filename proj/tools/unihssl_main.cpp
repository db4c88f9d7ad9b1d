#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "unihssl/experiment.hpp"

namespace fs = std::filesystem;
using namespace unihssl;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string variant;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config file (key = value)");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "run a single seed instead of the configured list");
}

ExperimentConfig make_config(const CommonArgs& args) {
    ExperimentConfig config =
        args.config_path.empty() ? default_config() : load_config(args.config_path);
    if (!args.out_dir.empty()) config.out_dir = args.out_dir;
    if (args.seed) config.seeds = {*args.seed};
    if (!args.variant.empty()) config.variant = variant_from_string(args.variant);
    return config;
}

int run_gen_data(const CommonArgs& args) {
    ExperimentConfig config = make_config(args);
    config.validate();
    if (!config.synthetic) {
        std::cerr << "gen-data requires a synthetic data source\n";
        return 1;
    }
    const std::uint64_t seed = config.seeds.front();
    const HsslDataset data = generate_synthetic(materialize(*config.synthetic), seed);
    const auto [train, test] = to_csv(data);
    fs::create_directories(config.out_dir);
    write_csv((fs::path(config.out_dir) / "train.csv").string(), train);
    write_csv((fs::path(config.out_dir) / "test.csv").string(), test);
    std::cout << "wrote " << train.rows.size() << " training rows and " << test.rows.size()
              << " test rows to " << config.out_dir << "\n";
    return 0;
}

int run_pretrain(const CommonArgs& args) {
    ExperimentConfig config = make_config(args);
    config.validate();
    fs::create_directories(config.out_dir);
    for (std::uint64_t seed : config.seeds) {
        HsslDataset data;
        if (config.synthetic) {
            data = generate_synthetic(materialize(*config.synthetic), seed);
        } else {
            const CsvDataset train = load_csv(config.csv->train_csv, config.csv->class_count);
            data = config.csv->test_csv.empty()
                       ? dataset_from_csv(train, config.csv->split_fraction, seed)
                       : dataset_from_csv(train,
                                          load_csv(config.csv->test_csv, config.csv->class_count));
        }
        Hyperparams hp = config.hp;
        hp.seed = seed;
        auto [encoder, g_head] = pretrain(data.labeled, hp);
        const std::string path =
            (fs::path(config.out_dir) / ("pretrain-" + std::to_string(seed) + ".ckpt")).string();
        save_checkpoint(path, encoder, g_head);
        const EvalMetrics metrics = evaluate_c_class(encoder, g_head, data.test, data.class_count);
        std::cout << "seed " << seed << ": pre-trained accuracy " << metrics.overall
                  << " (L " << metrics.domain_l << ", U " << metrics.domain_u << "), saved "
                  << path << "\n";
    }
    return 0;
}

int run_train(const CommonArgs& args) {
    ExperimentConfig config = make_config(args);
    const RunReport report = run(config);
    std::cout << report_table(config, report);
    std::cout << "report written to " << config.out_dir << "/report.json\n";
    return 0;
}

int run_eval(const std::string& checkpoint, const std::string& test_csv, int classes) {
    auto [encoder, head] = load_checkpoint(checkpoint);
    const CsvDataset test_data = load_csv(test_csv, classes);
    std::vector<TestExample> test;
    for (const auto& row : test_data.rows) {
        if (row.label < 0) throw ValidationError("test row has no label; cannot evaluate");
        test.push_back({row.features, row.label, row.domain == 'U' ? 1 : 0});
    }
    const std::size_t out_classes = head.out_classes();
    EvalMetrics metrics;
    if (out_classes == static_cast<std::size_t>(classes))
        metrics = evaluate_c_class(encoder, head, test, classes);
    else if (out_classes == 2 * static_cast<std::size_t>(classes))
        metrics = evaluate(encoder, head, test, classes);
    else
        throw ValidationError("checkpoint head has " + std::to_string(out_classes) +
                              " outputs, expected " + std::to_string(classes) + " or " +
                              std::to_string(2 * classes));
    std::cout << "overall " << metrics.overall << "\ndomain_l " << metrics.domain_l
              << "\ndomain_u " << metrics.domain_u << "\n";
    if (metrics.domain_id >= 0) std::cout << "domain_id " << metrics.domain_id << "\n";
    return 0;
}

int run_ablate(const CommonArgs& args) {
    ExperimentConfig config = make_config(args);
    const auto rows = ablate(config);
    for (const auto& row : rows)
        std::cout << row.variant << ": " << row.report.mean_overall << "\n";
    std::cout << "ablation table written to " << config.out_dir << "/ablation.txt\n";
    return 0;
}

int run_sweep(const CommonArgs& args, const std::string& axis, const std::string& grid) {
    ExperimentConfig config = make_config(args);
    if (!axis.empty()) config.sweep_axis = axis;
    if (!grid.empty()) {
        config.sweep_grid.clear();
        std::stringstream ss(grid);
        std::string item;
        while (std::getline(ss, item, ',')) config.sweep_grid.push_back(std::stod(item));
    }
    const auto points = sweep(config);
    for (const auto& p : points)
        std::cout << config.sweep_axis << " = " << p.value << ": " << p.report.mean_overall
                  << "\n";
    std::cout << "summary written to " << config.out_dir << "/sweep.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heterogeneous semi-supervised learning over a doubled label space"};
    app.require_subcommand(1);

    CommonArgs gen_args, pre_args, train_args, ablate_args, sweep_args;
    std::string eval_checkpoint, eval_csv, sweep_axis, sweep_grid;
    int eval_classes = 0;

    add_common(app.add_subcommand("gen-data", "generate a synthetic dataset as CSV"), gen_args);
    add_common(app.add_subcommand("pretrain", "supervised pre-training only"), pre_args);
    CLI::App* train_cmd = app.add_subcommand("train", "full training run(s) with report");
    add_common(train_cmd, train_args);
    train_cmd->add_option("--variant", train_args.variant,
                          "full|no_wma|no_sup|no_pl|no_pa|no_mixup|no_prog_mixup");

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a test CSV");
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "model checkpoint")->required();
    eval_cmd->add_option("--test-csv", eval_csv, "labeled test CSV")->required();
    eval_cmd->add_option("--classes", eval_classes, "semantic class count")->required();

    add_common(app.add_subcommand("ablate", "full model plus all six ablation variants"),
               ablate_args);
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "hyperparameter sensitivity sweep");
    add_common(sweep_cmd, sweep_args);
    sweep_cmd->add_option("--sweep", sweep_axis, "axis: lambda_pa|lambda_pl|lambda_mixup|beta");
    sweep_cmd->add_option("--grid", sweep_grid, "comma-separated grid values");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("gen-data")) return run_gen_data(gen_args);
        if (app.got_subcommand("pretrain")) return run_pretrain(pre_args);
        if (app.got_subcommand("train")) return run_train(train_args);
        if (app.got_subcommand("eval")) return run_eval(eval_checkpoint, eval_csv, eval_classes);
        if (app.got_subcommand("ablate")) return run_ablate(ablate_args);
        if (app.got_subcommand("sweep")) return run_sweep(sweep_args, sweep_axis, sweep_grid);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
