#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ndgrad/rng.hpp"
#include "unihssl/errors.hpp"

namespace unihssl {

using ndgrad::Rng;

struct LabeledExample {
    std::vector<double> features;
    std::vector<double> label;  // one-hot over the C semantic classes

    int label_index() const;
};

struct UnlabeledExample {
    std::vector<double> features;
    std::size_t stable_id = 0;  // unique within the unlabeled set
};

// Probability vector over the 2C joint (domain x semantic class) label space:
// entries 0..C-1 are labeled-domain classes, C..2C-1 unlabeled-domain classes.
struct ExtendedLabel {
    std::vector<double> probs;

    void check_simplex(double tol = 1e-8) const;  // ValidationError on failure
    std::size_t argmax() const;
    double max() const;
};

ExtendedLabel expand_labeled(const std::vector<double>& one_hot);
ExtendedLabel expand_initial_pseudo(const std::vector<double>& simplex);

// Test rows carry their hidden truth. Only the evaluator may consult
// semantic_class and domain; they are never visible to the model.
struct TestExample {
    std::vector<double> features;
    int semantic_class = 0;
    int domain = 0;  // 0 = labeled domain, 1 = unlabeled domain
};

struct HsslDataset {
    int class_count = 0;
    int input_dim = 0;
    std::vector<LabeledExample> labeled;
    std::vector<UnlabeledExample> unlabeled;
    std::vector<int> unlabeled_truth;  // hidden; diagnostics only, -1 when unknown
    std::vector<TestExample> test;
};

// Two-domain Gaussian-mixture task. Domain L samples class k from
// label_dist_l around class_means[k]; domain U shifts each class mean by
// class_shifts[k] and samples from label_dist_u.
struct SyntheticDomainSpec {
    int class_count = 5;
    int input_dim = 16;
    std::vector<std::vector<double>> class_means;   // C x input_dim (domain L)
    std::vector<std::vector<double>> class_shifts;  // C x input_dim (L -> U translation)
    std::vector<double> cov_scale_l;                // per-class spherical stddev
    std::vector<double> cov_scale_u;
    std::vector<double> label_dist_l;
    std::vector<double> label_dist_u;
    std::size_t n_labeled = 500;
    std::size_t n_unlabeled = 2000;
    std::size_t n_test = 1000;
    double test_unlabeled_fraction = 0.5;
    // Sanity escape hatch: the heterogeneity check (label distributions must
    // differ) is waived so degenerate identical-domain setups can be probed.
    bool allow_identical_label_dists = false;

    void validate() const;
};

HsslDataset generate_synthetic(const SyntheticDomainSpec& spec, std::uint64_t seed);

// CSV schema: header feature_0..feature_{d-1},label,domain; label empty for
// unlabeled rows, else an integer in 0..C-1; domain L or U. A label on a
// domain-U row is hidden truth for evaluation, never model input.
struct CsvRow {
    std::vector<double> features;
    int label = -1;  // -1 = unlabeled
    char domain = 'L';
};

struct CsvDataset {
    int class_count = 0;
    int input_dim = 0;
    std::vector<CsvRow> rows;
};

CsvDataset load_csv(const std::string& path, int class_count);
void write_csv(const std::string& path, const CsvDataset& data);

// Seed-deterministic shuffle-then-split; train gets floor(fraction * n).
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_train_test(const std::vector<T>& items,
                                                           double fraction,
                                                           std::uint64_t seed) {
    if (items.empty()) throw ValidationError("split_train_test: empty dataset");
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ValidationError("split_train_test: fraction must lie in (0,1)");
    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed, /*stream=*/0x5f17);
    rng.shuffle(order);
    const std::size_t n_train = static_cast<std::size_t>(fraction * static_cast<double>(items.size()));
    std::pair<std::vector<T>, std::vector<T>> out;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_train ? out.first : out.second).push_back(items[order[i]]);
    return out;
}

// Assembles the training/test structure from CSV rows: labeled-domain rows
// with labels become the labeled set, unlabeled-domain rows the unlabeled
// set. Each domain is split train/test by `fraction` and the two test halves
// are pooled (all test rows must carry labels).
HsslDataset dataset_from_csv(const CsvDataset& data, double fraction, std::uint64_t seed);
// Variant with a separate, fully labeled test CSV (no splitting).
HsslDataset dataset_from_csv(const CsvDataset& train, const CsvDataset& test);

// gen-data output: training rows (labeled-domain rows with labels,
// unlabeled-domain rows with hidden-truth labels) and labeled test rows.
std::pair<CsvDataset, CsvDataset> to_csv(const HsslDataset& data);

std::vector<double> one_hot(int index, int classes);

}  // namespace unihssl
