#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unihssl/data.hpp"
#include "unihssl/trainer.hpp"

namespace unihssl {

// Generator recipe behind the synthetic data source; materialize() turns it
// into an explicit SyntheticDomainSpec (class means and shifts drawn from the
// geometry seed, so the task itself is fixed across run seeds).
// Defaults are the flagship task: classes close enough (relative to the
// norm-2 domain translation) that the pre-trained classifier visibly
// underperforms on unlabeled-domain test samples while the labeled domain
// stays cleanly separable.
struct SyntheticRecipe {
    int class_count = 5;
    int input_dim = 16;
    std::size_t n_labeled = 500;
    std::size_t n_unlabeled = 2000;
    std::size_t n_test = 1000;
    std::uint64_t geometry_seed = 1;
    double mean_scale = 0.33;
    double shift_norm = 2.0;
    // How the per-class domain translation is oriented: "isotropic" draws a
    // uniformly random direction in feature space; "span" draws inside the
    // span of the class means; "neighbor" aims at the nearest other class
    // mean (the hardest case, prone to swapped clusters).
    std::string shift_mode = "isotropic";
    double cov_scale_l = 0.2;
    double cov_scale_u = 0.4;
    std::string label_dist_l = "uniform";   // uniform | powerlaw | comma list
    std::string label_dist_u = "powerlaw";
    double powerlaw_exponent = 1.0;
    double test_unlabeled_fraction = 0.5;
};

SyntheticDomainSpec materialize(const SyntheticRecipe& recipe);

struct CsvSource {
    std::string train_csv;
    std::string test_csv;  // empty: split train_csv per domain by split_fraction
    int class_count = 0;
    double split_fraction = 0.9;
};

struct ExperimentConfig {
    std::optional<SyntheticRecipe> synthetic;
    std::optional<CsvSource> csv;
    Hyperparams hp;
    Variant variant = Variant::full;
    std::string sweep_axis;  // lambda_pa | lambda_pl | lambda_mixup | beta
    std::vector<double> sweep_grid;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::string out_dir = "out";
    bool dump_diagnostics = false;  // pseudo-label and prototype-cosine CSVs

    void validate() const;  // ConfigError on violation
};

// The repo's default experiment: flagship synthetic task, 3 seeds.
ExperimentConfig default_config();

// Flat key = value file (# comments); unknown keys are errors.
ExperimentConfig load_config(const std::string& path);

struct EvalMetrics {
    double overall = 0;    // semantic accuracy over the pooled test set
    double domain_l = 0;   // semantic accuracy on labeled-domain samples
    double domain_u = 0;   // semantic accuracy on unlabeled-domain samples
    double domain_id = -1; // fraction with the argmax block matching the true domain
    std::vector<double> per_class;
    std::size_t n_test = 0, n_l = 0, n_u = 0;
    std::size_t correct = 0;
};

// 2C model: the prediction collapses classes k and C+k to semantic class k;
// the argmax block doubles as a domain prediction.
EvalMetrics evaluate(const EncoderParams& encoder, const HeadParams& head_2c,
                     const std::vector<TestExample>& test, int class_count);
// Pre-trained C-class baseline: semantic argmax only, no domain prediction.
EvalMetrics evaluate_c_class(const EncoderParams& encoder, const HeadParams& g_head,
                             const std::vector<TestExample>& test, int class_count);

struct SeedOutcome {
    std::uint64_t seed = 0;
    EvalMetrics model;     // trained 2C model
    EvalMetrics baseline;  // supervised-only pre-trained model
    std::string history_file;
};

struct RunReport {
    std::vector<SeedOutcome> runs;
    double mean_overall = 0;
    double std_overall = 0;  // sample std; only meaningful with >= 2 seeds
    double baseline_mean = 0;
    double baseline_std = 0;
};

// One full experiment: per seed, build data, pre-train (baseline row),
// train, evaluate; artifacts (history-<seed>.jsonl, model-<seed>.ckpt,
// report.json, report.txt) land in config.out_dir as each seed completes.
RunReport run(const ExperimentConfig& config);

struct AblationRow {
    std::string variant;
    RunReport report;
};

// Full model plus all six ablation variants on identical seeds and data;
// writes ablation.json and an aligned ablation.txt under out_dir.
std::vector<AblationRow> ablate(const ExperimentConfig& config);

struct SweepPoint {
    double value = 0;
    RunReport report;
};

// One run per grid value of config.sweep_axis; every grid value is validated
// before the first run starts. Writes sweep.csv under out_dir.
std::vector<SweepPoint> sweep(const ExperimentConfig& config);

std::string report_json(const ExperimentConfig& config, const RunReport& report);
std::string report_table(const ExperimentConfig& config, const RunReport& report);

}  // namespace unihssl
