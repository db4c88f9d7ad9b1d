#include "unihssl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace unihssl {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config

namespace {

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("bad numeric list entry '" + item + "'");
        }
    }
    return out;
}

std::vector<double> label_distribution(const std::string& kind, int classes, double exponent) {
    std::vector<double> dist(classes);
    if (kind == "uniform") {
        std::fill(dist.begin(), dist.end(), 1.0 / classes);
    } else if (kind == "powerlaw") {
        double z = 0.0;
        for (int k = 0; k < classes; ++k) {
            dist[k] = std::pow(static_cast<double>(k + 1), -exponent);
            z += dist[k];
        }
        for (double& p : dist) p /= z;
    } else {
        dist = parse_double_list(kind);
        if (static_cast<int>(dist.size()) != classes)
            throw ConfigError("label distribution list has " + std::to_string(dist.size()) +
                              " entries, expected " + std::to_string(classes));
    }
    return dist;
}

}  // namespace

SyntheticDomainSpec materialize(const SyntheticRecipe& recipe) {
    SyntheticDomainSpec spec;
    spec.class_count = recipe.class_count;
    spec.input_dim = recipe.input_dim;
    spec.n_labeled = recipe.n_labeled;
    spec.n_unlabeled = recipe.n_unlabeled;
    spec.n_test = recipe.n_test;
    spec.test_unlabeled_fraction = recipe.test_unlabeled_fraction;

    Rng rng(recipe.geometry_seed, /*stream=*/0x9e0);
    spec.class_means.resize(recipe.class_count);
    for (int k = 0; k < recipe.class_count; ++k) {
        spec.class_means[k].resize(recipe.input_dim);
        for (double& v : spec.class_means[k]) v = recipe.mean_scale * rng.normal();
    }
    std::vector<double> centroid(recipe.input_dim, 0.0);
    for (const auto& mean : spec.class_means)
        for (int i = 0; i < recipe.input_dim; ++i) centroid[i] += mean[i] / recipe.class_count;
    spec.class_shifts.resize(recipe.class_count);
    for (int k = 0; k < recipe.class_count; ++k) {
        std::vector<double> dir(recipe.input_dim, 0.0);
        if (recipe.shift_mode == "neighbor") {
            int nearest = -1;
            double best = 0.0;
            for (int j = 0; j < recipe.class_count; ++j) {
                if (j == k) continue;
                double d2 = 0.0;
                for (int i = 0; i < recipe.input_dim; ++i) {
                    const double d = spec.class_means[j][i] - spec.class_means[k][i];
                    d2 += d * d;
                }
                if (nearest < 0 || d2 < best) {
                    nearest = j;
                    best = d2;
                }
            }
            for (int i = 0; i < recipe.input_dim; ++i)
                dir[i] = spec.class_means[nearest][i] - spec.class_means[k][i];
        } else if (recipe.shift_mode == "span") {
            for (int j = 0; j < recipe.class_count; ++j) {
                const double coeff = rng.normal();
                for (int i = 0; i < recipe.input_dim; ++i)
                    dir[i] += coeff * (spec.class_means[j][i] - centroid[i]);
            }
        } else if (recipe.shift_mode == "isotropic") {
            for (double& v : dir) v = rng.normal();
        } else {
            throw ConfigError("shift_mode must be neighbor, span or isotropic, got '" +
                              recipe.shift_mode + "'");
        }
        double norm = 0.0;
        for (double v : dir) norm += v * v;
        norm = std::sqrt(norm);
        spec.class_shifts[k].resize(recipe.input_dim);
        for (int i = 0; i < recipe.input_dim; ++i)
            spec.class_shifts[k][i] = recipe.shift_norm * dir[i] / norm;
    }
    spec.cov_scale_l.assign(recipe.class_count, recipe.cov_scale_l);
    spec.cov_scale_u.assign(recipe.class_count, recipe.cov_scale_u);
    spec.label_dist_l =
        label_distribution(recipe.label_dist_l, recipe.class_count, recipe.powerlaw_exponent);
    spec.label_dist_u =
        label_distribution(recipe.label_dist_u, recipe.class_count, recipe.powerlaw_exponent);
    return spec;
}

void ExperimentConfig::validate() const {
    if (synthetic.has_value() == csv.has_value())
        throw ConfigError("config must name exactly one data source (synthetic or csv)");
    hp.validate();
    const int classes = synthetic ? synthetic->class_count : csv->class_count;
    if (classes < 2)
        throw ConfigError("class_count must be >= 2: contrastive alignment is meaningless "
                          "for a single class");
    if (csv) {
        if (csv->train_csv.empty()) throw ConfigError("csv.train is required");
        if (!(csv->split_fraction > 0 && csv->split_fraction < 1))
            throw ConfigError("csv.split_fraction must lie in (0,1)");
    }
    if (synthetic) materialize(*synthetic).validate();
    if (!sweep_axis.empty()) {
        if (sweep_grid.empty()) throw ConfigError("sweep declared without a grid");
        if (sweep_axis != "lambda_pa" && sweep_axis != "lambda_pl" &&
            sweep_axis != "lambda_mixup" && sweep_axis != "beta")
            throw ConfigError("sweep axis must be lambda_pa, lambda_pl, lambda_mixup or beta");
    }
    if (seeds.empty()) throw ConfigError("at least one seed is required");
}

ExperimentConfig default_config() {
    ExperimentConfig config;
    config.synthetic = SyntheticRecipe{};
    // The paper-scale SGD step is calibrated for fine-tuning a pre-trained
    // deep backbone; the desk-scale MLP trains from scratch and needs a
    // larger one. Hyperparams{} keeps the reference defaults.
    config.hp.lr0 = 0.02;
    return config;
}

namespace {

Hyperparams& apply_axis(Hyperparams& hp, const std::string& axis, double value) {
    if (axis == "lambda_pa")
        hp.lambda_pa = value;
    else if (axis == "lambda_pl")
        hp.lambda_pl = value;
    else if (axis == "lambda_mixup")
        hp.lambda_mixup = value;
    else if (axis == "beta")
        hp.beta = value;
    else
        throw ConfigError("unknown sweep axis '" + axis + "'");
    return hp;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    try {
        if constexpr (std::is_floating_point_v<T>) {
            return static_cast<T>(std::stod(value));
        } else {
            return static_cast<T>(std::stoull(value));
        }
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("bad boolean value for " + key + ": '" + value + "'");
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    ExperimentConfig config;
    config.seeds.clear();
    std::string source_kind;
    SyntheticRecipe recipe;
    CsvSource csv;
    bool saw_seeds = false;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "data.source") source_kind = value;
        else if (key == "synthetic.classes") recipe.class_count = parse_number<int>(key, value);
        else if (key == "synthetic.input_dim") recipe.input_dim = parse_number<int>(key, value);
        else if (key == "synthetic.n_labeled") recipe.n_labeled = parse_number<std::size_t>(key, value);
        else if (key == "synthetic.n_unlabeled") recipe.n_unlabeled = parse_number<std::size_t>(key, value);
        else if (key == "synthetic.n_test") recipe.n_test = parse_number<std::size_t>(key, value);
        else if (key == "synthetic.geometry_seed") recipe.geometry_seed = parse_number<std::uint64_t>(key, value);
        else if (key == "synthetic.mean_scale") recipe.mean_scale = parse_number<double>(key, value);
        else if (key == "synthetic.shift_norm") recipe.shift_norm = parse_number<double>(key, value);
        else if (key == "synthetic.shift_mode") recipe.shift_mode = value;
        else if (key == "synthetic.cov_scale_l") recipe.cov_scale_l = parse_number<double>(key, value);
        else if (key == "synthetic.cov_scale_u") recipe.cov_scale_u = parse_number<double>(key, value);
        else if (key == "synthetic.label_dist_l") recipe.label_dist_l = value;
        else if (key == "synthetic.label_dist_u") recipe.label_dist_u = value;
        else if (key == "synthetic.powerlaw_exponent") recipe.powerlaw_exponent = parse_number<double>(key, value);
        else if (key == "synthetic.test_unlabeled_fraction") recipe.test_unlabeled_fraction = parse_number<double>(key, value);
        else if (key == "csv.train") csv.train_csv = value;
        else if (key == "csv.test") csv.test_csv = value;
        else if (key == "csv.classes") csv.class_count = parse_number<int>(key, value);
        else if (key == "csv.split_fraction") csv.split_fraction = parse_number<double>(key, value);
        else if (key == "hp.lambda_pl") config.hp.lambda_pl = parse_number<double>(key, value);
        else if (key == "hp.lambda_pa") config.hp.lambda_pa = parse_number<double>(key, value);
        else if (key == "hp.lambda_mixup") config.hp.lambda_mixup = parse_number<double>(key, value);
        else if (key == "hp.tau") config.hp.tau = parse_number<double>(key, value);
        else if (key == "hp.epsilon") config.hp.epsilon = parse_number<double>(key, value);
        else if (key == "hp.beta") config.hp.beta = parse_number<double>(key, value);
        else if (key == "hp.alpha") config.hp.alpha = parse_number<double>(key, value);
        else if (key == "hp.lr0") config.hp.lr0 = parse_number<double>(key, value);
        else if (key == "hp.momentum") config.hp.momentum = parse_number<double>(key, value);
        else if (key == "hp.weight_decay") config.hp.weight_decay = parse_number<double>(key, value);
        else if (key == "hp.batch_size") config.hp.batch_size = parse_number<std::size_t>(key, value);
        else if (key == "hp.pretrain_epochs") config.hp.pretrain_epochs = parse_number<std::size_t>(key, value);
        else if (key == "hp.train_epochs") config.hp.train_epochs = parse_number<std::size_t>(key, value);
        else if (key == "hp.jitter_sigma") config.hp.jitter_sigma = parse_number<double>(key, value);
        else if (key == "hp.include_positive_pair") config.hp.include_positive_pair = parse_bool(key, value);
        else if (key == "model.hidden_dims") {
            config.hp.hidden_dims.clear();
            for (double d : parse_double_list(value))
                config.hp.hidden_dims.push_back(static_cast<std::size_t>(d));
        }
        else if (key == "run.seeds") {
            saw_seeds = true;
            for (double s : parse_double_list(value))
                config.seeds.push_back(static_cast<std::uint64_t>(s));
        }
        else if (key == "run.variant") config.variant = variant_from_string(value);
        else if (key == "run.out_dir") config.out_dir = value;
        else if (key == "run.dump_diagnostics") config.dump_diagnostics = parse_bool(key, value);
        else if (key == "sweep.axis") config.sweep_axis = value;
        else if (key == "sweep.grid") config.sweep_grid = parse_double_list(value);
        else
            throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }

    if (source_kind == "synthetic" || source_kind.empty())
        config.synthetic = recipe;
    else if (source_kind == "csv")
        config.csv = csv;
    else
        throw ConfigError("data.source must be synthetic or csv, got '" + source_kind + "'");
    if (!saw_seeds) config.seeds = {1, 2, 3};
    return config;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

EvalMetrics tally(const std::vector<TestExample>& test, int class_count,
                  const std::vector<int>& semantic_pred, const std::vector<int>& domain_pred) {
    if (test.empty()) throw ValidationError("evaluate: empty test set");
    EvalMetrics m;
    m.n_test = test.size();
    m.per_class.assign(class_count, 0.0);
    std::vector<std::size_t> class_total(class_count, 0), class_correct(class_count, 0);
    std::size_t correct_l = 0, correct_u = 0, domain_correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const TestExample& ex = test[i];
        const bool correct = semantic_pred[i] == ex.semantic_class;
        m.correct += correct;
        ++class_total[ex.semantic_class];
        class_correct[ex.semantic_class] += correct;
        if (ex.domain == 0) {
            ++m.n_l;
            correct_l += correct;
        } else {
            ++m.n_u;
            correct_u += correct;
        }
        if (!domain_pred.empty() && domain_pred[i] == ex.domain) ++domain_correct;
    }
    m.overall = static_cast<double>(m.correct) / static_cast<double>(m.n_test);
    m.domain_l = m.n_l ? static_cast<double>(correct_l) / static_cast<double>(m.n_l) : 0.0;
    m.domain_u = m.n_u ? static_cast<double>(correct_u) / static_cast<double>(m.n_u) : 0.0;
    m.domain_id = domain_pred.empty()
                      ? -1.0
                      : static_cast<double>(domain_correct) / static_cast<double>(m.n_test);
    for (int k = 0; k < class_count; ++k)
        m.per_class[k] = class_total[k]
                             ? static_cast<double>(class_correct[k]) /
                                   static_cast<double>(class_total[k])
                             : 0.0;
    return m;
}

Tensor forward_probs(const EncoderParams& encoder, const HeadParams& head,
                     const std::vector<TestExample>& test) {
    std::vector<std::vector<double>> xs;
    xs.reserve(test.size());
    for (const auto& ex : test) xs.push_back(ex.features);
    return classify(head, encode(encoder, Tensor::from_rows(xs)));
}

std::size_t row_argmax(const Tensor& probs, std::size_t row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs.cols(); ++j)
        if (probs.at(row, j) > probs.at(row, best)) best = j;
    return best;
}

}  // namespace

EvalMetrics evaluate(const EncoderParams& encoder, const HeadParams& head_2c,
                     const std::vector<TestExample>& test, int class_count) {
    if (test.empty()) throw ValidationError("evaluate: empty test set");
    const Tensor probs = forward_probs(encoder, head_2c, test);
    std::vector<int> semantic(test.size()), domain(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const std::size_t arg = row_argmax(probs, i);
        semantic[i] = static_cast<int>(arg % static_cast<std::size_t>(class_count));
        domain[i] = static_cast<int>(arg / static_cast<std::size_t>(class_count));
    }
    return tally(test, class_count, semantic, domain);
}

EvalMetrics evaluate_c_class(const EncoderParams& encoder, const HeadParams& g_head,
                             const std::vector<TestExample>& test, int class_count) {
    if (test.empty()) throw ValidationError("evaluate: empty test set");
    const Tensor probs = forward_probs(encoder, g_head, test);
    std::vector<int> semantic(test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
        semantic[i] = static_cast<int>(row_argmax(probs, i));
    return tally(test, class_count, semantic, {});
}

// ---------------------------------------------------------------------------
// Run / report

namespace {

HsslDataset build_dataset(const ExperimentConfig& config, std::uint64_t seed) {
    if (config.synthetic) return generate_synthetic(materialize(*config.synthetic), seed);
    const CsvDataset train = load_csv(config.csv->train_csv, config.csv->class_count);
    if (!config.csv->test_csv.empty()) {
        const CsvDataset test = load_csv(config.csv->test_csv, config.csv->class_count);
        return dataset_from_csv(train, test);
    }
    return dataset_from_csv(train, config.csv->split_fraction, seed);
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

ordered_json metrics_json(const EvalMetrics& m) {
    ordered_json j;
    j["overall"] = m.overall;
    j["domain_l"] = m.domain_l;
    j["domain_u"] = m.domain_u;
    if (m.domain_id >= 0) j["domain_id"] = m.domain_id;
    j["per_class"] = m.per_class;
    j["n_test"] = m.n_test;
    j["n_l"] = m.n_l;
    j["n_u"] = m.n_u;
    return j;
}

ordered_json config_json(const ExperimentConfig& config) {
    ordered_json j;
    if (config.synthetic) {
        const SyntheticRecipe& r = *config.synthetic;
        j["data"]["source"] = "synthetic";
        j["data"]["classes"] = r.class_count;
        j["data"]["input_dim"] = r.input_dim;
        j["data"]["n_labeled"] = r.n_labeled;
        j["data"]["n_unlabeled"] = r.n_unlabeled;
        j["data"]["n_test"] = r.n_test;
        j["data"]["geometry_seed"] = r.geometry_seed;
        j["data"]["mean_scale"] = r.mean_scale;
        j["data"]["shift_norm"] = r.shift_norm;
        j["data"]["shift_mode"] = r.shift_mode;
        j["data"]["cov_scale_l"] = r.cov_scale_l;
        j["data"]["cov_scale_u"] = r.cov_scale_u;
        j["data"]["label_dist_l"] = r.label_dist_l;
        j["data"]["label_dist_u"] = r.label_dist_u;
        j["data"]["powerlaw_exponent"] = r.powerlaw_exponent;
        j["data"]["test_unlabeled_fraction"] = r.test_unlabeled_fraction;
    } else {
        j["data"]["source"] = "csv";
        j["data"]["train"] = config.csv->train_csv;
        j["data"]["test"] = config.csv->test_csv;
        j["data"]["classes"] = config.csv->class_count;
        j["data"]["split_fraction"] = config.csv->split_fraction;
    }
    const Hyperparams& hp = config.hp;
    j["hp"]["lambda_pl"] = hp.lambda_pl;
    j["hp"]["lambda_pa"] = hp.lambda_pa;
    j["hp"]["lambda_mixup"] = hp.lambda_mixup;
    j["hp"]["tau"] = hp.tau;
    j["hp"]["epsilon"] = hp.epsilon;
    j["hp"]["beta"] = hp.beta;
    j["hp"]["alpha"] = hp.alpha;
    j["hp"]["lr0"] = hp.lr0;
    j["hp"]["momentum"] = hp.momentum;
    j["hp"]["weight_decay"] = hp.weight_decay;
    j["hp"]["batch_size"] = hp.batch_size;
    j["hp"]["pretrain_epochs"] = hp.pretrain_epochs;
    j["hp"]["train_epochs"] = hp.train_epochs;
    j["hp"]["hidden_dims"] = hp.hidden_dims;
    j["hp"]["jitter_sigma"] = hp.jitter_sigma;
    j["hp"]["include_positive_pair"] = hp.include_positive_pair;
    j["variant"] = to_string(config.variant);
    j["seeds"] = config.seeds;
    return j;
}

void write_history(const std::string& path, const std::vector<IterationRecord>& history) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open " + path + " for writing");
    for (const auto& rec : history) {
        ordered_json j;
        j["t"] = rec.t;
        j["lr"] = rec.lr;
        j["psi"] = rec.psi;
        j["loss_total"] = rec.loss_total;
        j["loss_sup"] = rec.loss_sup;
        j["loss_pl"] = rec.loss_pl;
        j["loss_pa"] = rec.loss_pa;
        j["loss_mixup"] = rec.loss_mixup;
        j["confident"] = rec.confident_count;
        out << j.dump() << "\n";
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open " + path + " for writing");
    out << text;
}

}  // namespace

std::string report_json(const ExperimentConfig& config, const RunReport& report) {
    ordered_json j;
    j["config"] = config_json(config);
    j["runs"] = ordered_json::array();
    for (const auto& outcome : report.runs) {
        ordered_json r;
        r["seed"] = outcome.seed;
        r["model"] = metrics_json(outcome.model);
        r["baseline"] = metrics_json(outcome.baseline);
        r["history_file"] = outcome.history_file;
        j["runs"].push_back(r);
    }
    j["summary"]["mean_overall"] = report.mean_overall;
    j["summary"]["baseline_mean"] = report.baseline_mean;
    if (report.runs.size() >= 2) {
        j["summary"]["std_overall"] = report.std_overall;
        j["summary"]["baseline_std"] = report.baseline_std;
    }
    return j.dump(2) + "\n";
}

std::string report_table(const ExperimentConfig& config, const RunReport& report) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "variant: " << to_string(config.variant) << "\n";
    os << "seed      model     baseline  dom_L     dom_U     dom_id\n";
    for (const auto& r : report.runs) {
        os << r.seed;
        for (std::size_t pad = std::to_string(r.seed).size(); pad < 10; ++pad) os << ' ';
        os << r.model.overall << "    " << r.baseline.overall << "    " << r.model.domain_l
           << "    " << r.model.domain_u << "    " << r.model.domain_id << "\n";
    }
    os << "mean      " << report.mean_overall << "    " << report.baseline_mean;
    if (report.runs.size() >= 2)
        os << "    (std " << report.std_overall << " / " << report.baseline_std << ")";
    os << "\n";
    return os.str();
}

RunReport run(const ExperimentConfig& config) {
    config.validate();
    fs::create_directories(config.out_dir);
    RunReport report;
    std::vector<double> accs, base_accs;

    for (std::uint64_t seed : config.seeds) {
        HsslDataset data = build_dataset(config, seed);
        Hyperparams hp = config.hp;
        hp.seed = seed;

        auto [pre_encoder, g_head] = pretrain(data.labeled, hp);
        const EvalMetrics baseline =
            evaluate_c_class(pre_encoder, g_head, data.test, data.class_count);

        TrainResult trained = train(data, hp, config.variant, pre_encoder, g_head);
        const EvalMetrics metrics =
            evaluate(trained.encoder, trained.head, data.test, data.class_count);

        SeedOutcome outcome;
        outcome.seed = seed;
        outcome.model = metrics;
        outcome.baseline = baseline;
        outcome.history_file = "history-" + std::to_string(seed) + ".jsonl";
        write_history((fs::path(config.out_dir) / outcome.history_file).string(),
                      trained.history);
        save_checkpoint((fs::path(config.out_dir) /
                         ("model-" + std::to_string(seed) + ".ckpt")).string(),
                        trained.encoder, trained.head);
        if (config.dump_diagnostics) {
            std::ofstream pl(fs::path(config.out_dir) /
                             ("pseudolabels-" + std::to_string(seed) + ".csv"));
            trained.store.dump_csv(pl);
            // final prototypes over the full training sets
            std::vector<std::size_t> all_l(data.labeled.size()), all_u(data.unlabeled.size());
            for (std::size_t i = 0; i < all_l.size(); ++i) all_l[i] = i;
            for (std::size_t i = 0; i < all_u.size(); ++i) all_u[i] = i;
            PrototypeSet protos =
                labeled_prototypes(trained.encoder, data.labeled, all_l, data.class_count);
            protos.merge(unlabeled_prototypes(trained.encoder, data.unlabeled, all_u,
                                              trained.store, hp.epsilon, data.class_count));
            std::ofstream pc(fs::path(config.out_dir) /
                             ("prototype-cosines-" + std::to_string(seed) + ".csv"));
            protos.dump_cosine_csv(pc);
        }
        report.runs.push_back(std::move(outcome));
        accs.push_back(metrics.overall);
        base_accs.push_back(baseline.overall);
    }

    report.mean_overall = mean_of(accs);
    report.std_overall = sample_std(accs);
    report.baseline_mean = mean_of(base_accs);
    report.baseline_std = sample_std(base_accs);

    write_text((fs::path(config.out_dir) / "report.json").string(),
               report_json(config, report));
    write_text((fs::path(config.out_dir) / "report.txt").string(),
               report_table(config, report));
    return report;
}

std::vector<AblationRow> ablate(const ExperimentConfig& config) {
    config.validate();
    fs::create_directories(config.out_dir);
    const Variant variants[] = {Variant::full,  Variant::no_wma,  Variant::no_sup,
                                Variant::no_pl, Variant::no_pa,   Variant::no_mixup,
                                Variant::no_prog_mixup};
    std::vector<AblationRow> rows;
    for (Variant v : variants) {
        ExperimentConfig sub = config;
        sub.variant = v;
        sub.out_dir = (fs::path(config.out_dir) / to_string(v)).string();
        rows.push_back({to_string(v), run(sub)});
    }

    ordered_json j;
    j["config"] = config_json(config);
    j["rows"] = ordered_json::array();
    std::ostringstream table;
    table.setf(std::ios::fixed);
    table.precision(4);
    table << "variant        mean      std\n";
    for (const auto& row : rows) {
        ordered_json r;
        r["variant"] = row.variant;
        r["mean_overall"] = row.report.mean_overall;
        if (row.report.runs.size() >= 2) r["std_overall"] = row.report.std_overall;
        j["rows"].push_back(r);
        table << row.variant;
        for (std::size_t pad = row.variant.size(); pad < 15; ++pad) table << ' ';
        table << row.report.mean_overall << "    " << row.report.std_overall << "\n";
    }
    write_text((fs::path(config.out_dir) / "ablation.json").string(), j.dump(2) + "\n");
    write_text((fs::path(config.out_dir) / "ablation.txt").string(), table.str());
    return rows;
}

std::vector<SweepPoint> sweep(const ExperimentConfig& config) {
    config.validate();
    if (config.sweep_axis.empty()) throw ConfigError("sweep: no axis configured");
    // Every grid value must be admissible before any run starts.
    for (double value : config.sweep_grid) {
        Hyperparams probe = config.hp;
        apply_axis(probe, config.sweep_axis, value);
        probe.validate();
    }
    fs::create_directories(config.out_dir);

    std::vector<SweepPoint> points;
    std::ostringstream csv;
    csv << "axis,value,mean_accuracy,std_accuracy\n";
    csv.precision(17);
    for (double value : config.sweep_grid) {
        ExperimentConfig sub = config;
        apply_axis(sub.hp, config.sweep_axis, value);
        std::ostringstream dir;
        dir << config.sweep_axis << "-" << value;
        sub.out_dir = (fs::path(config.out_dir) / dir.str()).string();
        RunReport rep = run(sub);
        csv << config.sweep_axis << "," << value << "," << rep.mean_overall << ","
            << rep.std_overall << "\n";
        points.push_back({value, std::move(rep)});
    }
    write_text((fs::path(config.out_dir) / "sweep.csv").string(), csv.str());
    return points;
}

}  // namespace unihssl
