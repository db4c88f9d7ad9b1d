#include "unihssl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace unihssl {

std::vector<double> one_hot(int index, int classes) {
    if (index < 0 || index >= classes)
        throw ValidationError("one_hot: index " + std::to_string(index) + " out of range for " +
                              std::to_string(classes) + " classes");
    std::vector<double> v(classes, 0.0);
    v[index] = 1.0;
    return v;
}

int LabeledExample::label_index() const {
    for (std::size_t i = 0; i < label.size(); ++i)
        if (label[i] == 1.0) return static_cast<int>(i);
    throw ValidationError("label_index: label vector is not one-hot");
}

void ExtendedLabel::check_simplex(double tol) const {
    double s = 0.0;
    for (double p : probs) {
        if (p < 0.0)
            throw ValidationError("extended label has negative entry " + std::to_string(p));
        s += p;
    }
    if (std::abs(s - 1.0) > tol)
        throw ValidationError("extended label sums to " + std::to_string(s) + ", expected 1");
}

std::size_t ExtendedLabel::argmax() const {
    return static_cast<std::size_t>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double ExtendedLabel::max() const { return *std::max_element(probs.begin(), probs.end()); }

ExtendedLabel expand_labeled(const std::vector<double>& one_hot_label) {
    int ones = 0;
    for (double v : one_hot_label) {
        if (v == 1.0)
            ++ones;
        else if (v != 0.0)
            throw ValidationError("expand_labeled: input is not one-hot");
    }
    if (ones != 1) throw ValidationError("expand_labeled: input is not one-hot");
    ExtendedLabel out;
    out.probs = one_hot_label;
    out.probs.resize(2 * one_hot_label.size(), 0.0);
    return out;
}

ExtendedLabel expand_initial_pseudo(const std::vector<double>& simplex) {
    double s = 0.0;
    for (double v : simplex) {
        if (v < 0.0) throw ValidationError("expand_initial_pseudo: negative entry");
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-8)
        throw ValidationError("expand_initial_pseudo: input sums to " + std::to_string(s));
    ExtendedLabel out;
    out.probs.assign(simplex.size(), 0.0);
    out.probs.insert(out.probs.end(), simplex.begin(), simplex.end());
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

void check_simplex_vector(const std::vector<double>& dist, const char* name) {
    if (dist.empty()) throw ValidationError(std::string(name) + " is empty");
    double s = 0.0;
    for (double p : dist) {
        if (p < 0.0) throw ValidationError(std::string(name) + " has a negative entry");
        s += p;
    }
    if (std::abs(s - 1.0) > 1e-8)
        throw ValidationError(std::string(name) + " sums to " + std::to_string(s));
}

int draw_class(const std::vector<double>& dist, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
        acc += dist[k];
        if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(dist.size()) - 1;
}

std::vector<double> draw_point(const std::vector<double>& mean, double sigma, Rng& rng) {
    std::vector<double> x(mean.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = mean[i] + sigma * rng.normal();
    return x;
}

}  // namespace

void SyntheticDomainSpec::validate() const {
    if (class_count < 1) throw ValidationError("synthetic spec: class_count must be >= 1");
    if (input_dim < 1) throw ValidationError("synthetic spec: input_dim must be >= 1");
    const std::size_t c = static_cast<std::size_t>(class_count);
    if (class_means.size() != c || class_shifts.size() != c)
        throw ValidationError("synthetic spec: need one mean and one shift per class");
    for (const auto& m : class_means)
        if (m.size() != static_cast<std::size_t>(input_dim))
            throw ValidationError("synthetic spec: class mean has wrong dimension");
    for (const auto& s : class_shifts)
        if (s.size() != static_cast<std::size_t>(input_dim))
            throw ValidationError("synthetic spec: class shift has wrong dimension");
    if (cov_scale_l.size() != c || cov_scale_u.size() != c)
        throw ValidationError("synthetic spec: need one covariance scale per class and domain");
    for (double s : cov_scale_l)
        if (!(s > 0.0)) throw ValidationError("synthetic spec: covariance scale must be > 0");
    for (double s : cov_scale_u)
        if (!(s > 0.0)) throw ValidationError("synthetic spec: covariance scale must be > 0");
    check_simplex_vector(label_dist_l, "label_dist_l");
    check_simplex_vector(label_dist_u, "label_dist_u");
    if (label_dist_l.size() != c || label_dist_u.size() != c)
        throw ValidationError("synthetic spec: label distribution length must equal class_count");
    if (!allow_identical_label_dists) {
        double tv = 0.0;
        for (std::size_t k = 0; k < c; ++k) tv += std::abs(label_dist_l[k] - label_dist_u[k]);
        if (tv / 2.0 <= 0.0)
            throw ValidationError("synthetic spec: the two label distributions must differ");
    }
    if (!(test_unlabeled_fraction >= 0.0 && test_unlabeled_fraction <= 1.0))
        throw ValidationError("synthetic spec: test_unlabeled_fraction must lie in [0,1]");
}

HsslDataset generate_synthetic(const SyntheticDomainSpec& spec, std::uint64_t seed) {
    spec.validate();
    HsslDataset data;
    data.class_count = spec.class_count;
    data.input_dim = spec.input_dim;

    Rng rng_l(seed, 0xda7a1);
    for (std::size_t i = 0; i < spec.n_labeled; ++i) {
        const int k = draw_class(spec.label_dist_l, rng_l);
        data.labeled.push_back(
            {draw_point(spec.class_means[k], spec.cov_scale_l[k], rng_l),
             one_hot(k, spec.class_count)});
    }

    Rng rng_u(seed, 0xda7a2);
    for (std::size_t i = 0; i < spec.n_unlabeled; ++i) {
        const int k = draw_class(spec.label_dist_u, rng_u);
        std::vector<double> mean = spec.class_means[k];
        for (int j = 0; j < spec.input_dim; ++j) mean[j] += spec.class_shifts[k][j];
        data.unlabeled.push_back({draw_point(mean, spec.cov_scale_u[k], rng_u), i});
        data.unlabeled_truth.push_back(k);
    }

    Rng rng_t(seed, 0xda7a3);
    const std::size_t n_test_u =
        static_cast<std::size_t>(std::llround(spec.test_unlabeled_fraction *
                                              static_cast<double>(spec.n_test)));
    const std::size_t n_test_l = spec.n_test - n_test_u;
    for (std::size_t i = 0; i < n_test_l; ++i) {
        const int k = draw_class(spec.label_dist_l, rng_t);
        data.test.push_back({draw_point(spec.class_means[k], spec.cov_scale_l[k], rng_t), k, 0});
    }
    for (std::size_t i = 0; i < n_test_u; ++i) {
        const int k = draw_class(spec.label_dist_u, rng_t);
        std::vector<double> mean = spec.class_means[k];
        for (int j = 0; j < spec.input_dim; ++j) mean[j] += spec.class_shifts[k][j];
        data.test.push_back({draw_point(mean, spec.cov_scale_u[k], rng_t), k, 1});
    }
    return data;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

CsvDataset load_csv(const std::string& path, int class_count) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    CsvDataset data;
    data.class_count = class_count;

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    const auto header = split_line(line);
    if (header.size() < 3 || header[header.size() - 2] != "label" ||
        header.back() != "domain")
        throw ParseError(path + ":1: header must be feature_0..feature_{d-1},label,domain");
    const int d = static_cast<int>(header.size()) - 2;
    for (int i = 0; i < d; ++i)
        if (header[i] != "feature_" + std::to_string(i))
            throw ParseError(path + ":1: expected column feature_" + std::to_string(i) +
                             ", found " + header[i]);
    data.input_dim = d;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_line(line);
        const std::string where = path + ":" + std::to_string(line_no);
        if (fields.size() != header.size())
            throw ParseError(where + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        CsvRow row;
        row.features.resize(d);
        for (int i = 0; i < d; ++i) {
            try {
                std::size_t consumed = 0;
                row.features[i] = std::stod(fields[i], &consumed);
                if (consumed != fields[i].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError(where + ": non-numeric feature value '" + fields[i] + "'");
            }
        }
        const std::string& label_field = fields[d];
        if (label_field.empty()) {
            row.label = -1;
        } else {
            try {
                std::size_t consumed = 0;
                row.label = std::stoi(label_field, &consumed);
                if (consumed != label_field.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError(where + ": non-integer label '" + label_field + "'");
            }
            if (row.label < 0 || row.label >= class_count)
                throw ParseError(where + ": label " + label_field + " out of range 0.." +
                                 std::to_string(class_count - 1));
        }
        const std::string& domain_field = fields[d + 1];
        if (domain_field != "L" && domain_field != "U")
            throw ParseError(where + ": domain must be L or U, found '" + domain_field + "'");
        row.domain = domain_field[0];
        data.rows.push_back(std::move(row));
    }
    return data;
}

void write_csv(const std::string& path, const CsvDataset& data) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    for (int i = 0; i < data.input_dim; ++i) out << "feature_" << i << ",";
    out << "label,domain\n";
    out.precision(17);
    for (const auto& row : data.rows) {
        for (double f : row.features) out << f << ",";
        if (row.label >= 0) out << row.label;
        out << "," << row.domain << "\n";
    }
    if (!out) throw ParseError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// CSV -> training structure

namespace {

HsslDataset assemble(const std::vector<CsvRow>& train_rows, const std::vector<CsvRow>& test_rows,
                     int class_count, int input_dim) {
    HsslDataset data;
    data.class_count = class_count;
    data.input_dim = input_dim;
    std::size_t next_id = 0;
    for (const auto& row : train_rows) {
        if (row.domain == 'L') {
            if (row.label < 0)
                throw ValidationError("labeled-domain training row has no label");
            data.labeled.push_back({row.features, one_hot(row.label, class_count)});
        } else {
            data.unlabeled.push_back({row.features, next_id++});
            data.unlabeled_truth.push_back(row.label);  // -1 when truly unknown
        }
    }
    for (const auto& row : test_rows) {
        if (row.label < 0) throw ValidationError("test row has no label; cannot evaluate");
        data.test.push_back({row.features, row.label, row.domain == 'U' ? 1 : 0});
    }
    return data;
}

}  // namespace

HsslDataset dataset_from_csv(const CsvDataset& data, double fraction, std::uint64_t seed) {
    std::vector<CsvRow> rows_l, rows_u;
    for (const auto& row : data.rows) (row.domain == 'L' ? rows_l : rows_u).push_back(row);
    if (rows_l.empty()) throw ValidationError("csv contains no labeled-domain rows");
    if (rows_u.empty()) throw ValidationError("csv contains no unlabeled-domain rows");
    auto [train_l, test_l] = split_train_test(rows_l, fraction, seed);
    auto [train_u, test_u] = split_train_test(rows_u, fraction, seed + 1);
    std::vector<CsvRow> train = train_l;
    train.insert(train.end(), train_u.begin(), train_u.end());
    std::vector<CsvRow> test = test_l;
    test.insert(test.end(), test_u.begin(), test_u.end());
    return assemble(train, test, data.class_count, data.input_dim);
}

HsslDataset dataset_from_csv(const CsvDataset& train, const CsvDataset& test) {
    if (train.input_dim != test.input_dim)
        throw ValidationError("train and test CSVs disagree on feature dimension");
    return assemble(train.rows, test.rows, train.class_count, train.input_dim);
}

std::pair<CsvDataset, CsvDataset> to_csv(const HsslDataset& data) {
    CsvDataset train, test;
    train.class_count = test.class_count = data.class_count;
    train.input_dim = test.input_dim = data.input_dim;
    for (const auto& ex : data.labeled) train.rows.push_back({ex.features, ex.label_index(), 'L'});
    for (std::size_t i = 0; i < data.unlabeled.size(); ++i)
        train.rows.push_back({data.unlabeled[i].features,
                              i < data.unlabeled_truth.size() ? data.unlabeled_truth[i] : -1,
                              'U'});
    for (const auto& ex : data.test)
        test.rows.push_back({ex.features, ex.semantic_class, ex.domain == 1 ? 'U' : 'L'});
    return {std::move(train), std::move(test)};
}

}  // namespace unihssl
