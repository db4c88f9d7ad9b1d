#include "unihssl/align.hpp"

#include <algorithm>
#include <ostream>

namespace unihssl {

const Tensor& PrototypeSet::at(std::size_t k) const {
    if (k >= vectors_.size() || !vectors_[k])
        throw ValidationError("prototype " + std::to_string(k) + " is absent");
    return *vectors_[k];
}

void PrototypeSet::set(std::size_t k, Tensor prototype) {
    if (k >= vectors_.size())
        throw ValidationError("prototype index " + std::to_string(k) + " out of range");
    vectors_[k] = std::move(prototype);
}

void PrototypeSet::merge(PrototypeSet other) {
    if (other.double_classes() != double_classes())
        throw DimensionError("prototype sets disagree on class count");
    for (std::size_t k = 0; k < vectors_.size(); ++k) {
        if (!other.vectors_[k]) continue;
        if (vectors_[k])
            throw ValidationError("prototype " + std::to_string(k) + " present in both sets");
        vectors_[k] = std::move(other.vectors_[k]);
    }
}

std::size_t PrototypeSet::paired_count() const {
    const std::size_t c = vectors_.size() / 2;
    std::size_t n = 0;
    for (std::size_t k = 0; k < c; ++k)
        if (vectors_[k] && vectors_[c + k]) ++n;
    return n;
}

void PrototypeSet::dump_cosine_csv(std::ostream& out) const {
    const std::size_t n = vectors_.size();
    out << "class";
    for (std::size_t j = 0; j < n; ++j) out << ",p" << j;
    out << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < n; ++i) {
        out << "p" << i;
        for (std::size_t j = 0; j < n; ++j) {
            out << ",";
            if (vectors_[i] && vectors_[j])
                out << cosine_sim(*vectors_[i], *vectors_[j]).value();
        }
        out << "\n";
    }
}

namespace {

// Encodes the selected examples in canonical order and emits the per-class
// mean rows. groups[k] holds dataset indices, already sorted ascending.
template <typename Example>
PrototypeSet prototypes_from_groups(const EncoderParams& encoder,
                                    const std::vector<Example>& examples,
                                    const std::vector<std::vector<std::size_t>>& groups,
                                    std::size_t slot_offset, std::size_t double_classes) {
    PrototypeSet protos(double_classes);
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<std::size_t>> positions(groups.size());
    for (std::size_t k = 0; k < groups.size(); ++k)
        for (std::size_t idx : groups[k]) {
            positions[k].push_back(rows.size());
            rows.push_back(examples[idx].features);
        }
    if (rows.empty()) return protos;
    const Tensor embeddings = encode(encoder, Tensor::from_rows(rows));
    for (std::size_t k = 0; k < groups.size(); ++k) {
        if (groups[k].empty()) continue;
        protos.set(slot_offset + k, mean_rows(select_rows(embeddings, positions[k])));
    }
    return protos;
}

}  // namespace

PrototypeSet labeled_prototypes(const EncoderParams& encoder,
                                const std::vector<LabeledExample>& labeled,
                                const std::vector<std::size_t>& batch_indices,
                                int class_count) {
    if (batch_indices.empty()) throw ValidationError("labeled_prototypes: empty batch");
    std::vector<std::vector<std::size_t>> groups(class_count);
    for (std::size_t idx : batch_indices) {
        if (idx >= labeled.size())
            throw ValidationError("labeled_prototypes: batch index out of range");
        groups[labeled[idx].label_index()].push_back(idx);
    }
    for (auto& g : groups) std::sort(g.begin(), g.end());
    return prototypes_from_groups(encoder, labeled, groups, 0, 2 * class_count);
}

PrototypeSet unlabeled_prototypes(const EncoderParams& encoder,
                                  const std::vector<UnlabeledExample>& unlabeled,
                                  const std::vector<std::size_t>& batch_indices,
                                  const PseudoLabelStore& store, double eps, int class_count) {
    if (!(eps > 0.0 && eps < 1.0))
        throw ConfigError("unlabeled_prototypes: eps must lie in (0,1)");
    const std::size_t c = static_cast<std::size_t>(class_count);
    std::vector<std::vector<std::size_t>> groups(c);
    for (std::size_t idx : batch_indices) {
        if (idx >= unlabeled.size())
            throw ValidationError("unlabeled_prototypes: batch index out of range");
        const ExtendedLabel& label = store.at(unlabeled[idx].stable_id);
        if (!(label.max() > eps)) continue;
        const std::size_t arg = label.argmax();
        if (arg < c) continue;  // confident but in the labeled-domain block
        groups[arg - c].push_back(idx);
    }
    for (auto& g : groups) std::sort(g.begin(), g.end());
    return prototypes_from_groups(encoder, unlabeled, groups, c, 2 * c);
}

Tensor prototype_alignment_loss(const PrototypeSet& protos, double tau,
                                bool include_positive_pair) {
    if (!(tau > 0.0)) throw ConfigError("prototype_alignment_loss: tau must be > 0");
    const std::size_t c = protos.double_classes() / 2;
    if (protos.paired_count() < 2) return Tensor::scalar(0.0);

    const double inv_tau = 1.0 / tau;
    Tensor acc = Tensor::scalar(0.0);
    for (std::size_t k = 0; k < c; ++k) {
        if (!protos.present(k) || !protos.present(c + k)) continue;
        const Tensor pos = scale(cosine_sim(protos.at(k), protos.at(c + k)), inv_tau);

        // log(exp(pos) / sum_k' exp(sim)) = pos - log(denominator)
        Tensor den1, den2;
        for (std::size_t kp = 0; kp < c; ++kp) {
            if (kp != k || include_positive_pair) {
                if (protos.present(c + kp)) {
                    Tensor e = exp(scale(cosine_sim(protos.at(k), protos.at(c + kp)), inv_tau));
                    den1 = den1.defined() ? add(den1, e) : e;
                }
                if (protos.present(kp)) {
                    Tensor e = exp(scale(cosine_sim(protos.at(kp), protos.at(c + k)), inv_tau));
                    den2 = den2.defined() ? add(den2, e) : e;
                }
            }
        }
        if (den1.defined()) acc = add(acc, sub(pos, log(den1)));
        if (den2.defined()) acc = add(acc, sub(pos, log(den2)));
    }
    return scale(acc, -1.0);
}

}  // namespace unihssl
