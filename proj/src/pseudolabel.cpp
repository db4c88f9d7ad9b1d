#include "unihssl/pseudolabel.hpp"

#include <ostream>

namespace unihssl {

void PseudoLabelStore::insert(std::size_t stable_id, ExtendedLabel label) {
    label.check_simplex();
    entries_[stable_id] = std::move(label);
}

void PseudoLabelStore::wma_update(const std::vector<std::size_t>& ids,
                                  const std::vector<std::vector<double>>& predictions,
                                  double beta) {
    if (!(beta > 0.0 && beta < 1.0))
        throw ConfigError("wma_update: beta must lie in (0,1), got " + std::to_string(beta));
    if (ids.size() != predictions.size())
        throw ValidationError("wma_update: ids and predictions disagree in length");
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto it = entries_.find(ids[i]);
        if (it == entries_.end())
            throw ValidationError("wma_update: unknown stable_id " + std::to_string(ids[i]));
        ExtendedLabel& stored = it->second;
        if (stored.probs.size() != predictions[i].size())
            throw DimensionError("wma_update: prediction length " +
                                 std::to_string(predictions[i].size()) + " vs stored " +
                                 std::to_string(stored.probs.size()));
        for (std::size_t j = 0; j < stored.probs.size(); ++j)
            stored.probs[j] = beta * stored.probs[j] + (1.0 - beta) * predictions[i][j];
        stored.check_simplex();  // convex combination of simplex points
    }
    ++iteration_;
}

void PseudoLabelStore::assign_direct(const std::vector<std::size_t>& ids,
                                     const std::vector<std::vector<double>>& predictions) {
    if (ids.size() != predictions.size())
        throw ValidationError("assign_direct: ids and predictions disagree in length");
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto it = entries_.find(ids[i]);
        if (it == entries_.end())
            throw ValidationError("assign_direct: unknown stable_id " + std::to_string(ids[i]));
        it->second.probs = predictions[i];
        it->second.check_simplex();
    }
    ++iteration_;
}

const ExtendedLabel& PseudoLabelStore::at(std::size_t stable_id) const {
    auto it = entries_.find(stable_id);
    if (it == entries_.end())
        throw ValidationError("pseudo-label store: unknown stable_id " +
                              std::to_string(stable_id));
    return it->second;
}

bool PseudoLabelStore::contains(std::size_t stable_id) const {
    return entries_.count(stable_id) > 0;
}

std::vector<std::pair<std::size_t, ExtendedLabel>> PseudoLabelStore::confident_subset(
    double eps) const {
    if (!(eps > 0.0 && eps < 1.0))
        throw ConfigError("confident_subset: eps must lie in (0,1), got " + std::to_string(eps));
    std::vector<std::pair<std::size_t, ExtendedLabel>> out;
    for (const auto& [id, label] : entries_)
        if (label.max() > eps) out.emplace_back(id, label);
    return out;
}

void PseudoLabelStore::dump_csv(std::ostream& out) const {
    out << "stable_id,argmax_class,max_confidence\n";
    out.precision(17);
    for (const auto& [id, label] : entries_)
        out << id << "," << label.argmax() << "," << label.max() << "\n";
}

PseudoLabelStore init_store(const EncoderParams& encoder, const HeadParams& g_head,
                            const std::vector<UnlabeledExample>& unlabeled) {
    PseudoLabelStore store;
    if (unlabeled.empty()) return store;
    std::vector<std::vector<double>> rows;
    rows.reserve(unlabeled.size());
    for (const auto& ex : unlabeled) rows.push_back(ex.features);
    const Tensor probs = classify(g_head, encode(encoder, Tensor::from_rows(rows)));
    const std::size_t c = g_head.out_classes();
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
        std::vector<double> p(c);
        for (std::size_t j = 0; j < c; ++j) p[j] = probs.at(i, j);
        store.insert(unlabeled[i].stable_id, expand_initial_pseudo(p));
    }
    return store;
}

ndgrad::Tensor masked_pl_loss(const EncoderParams& encoder, const HeadParams& head,
                              const std::vector<const UnlabeledExample*>& examples,
                              const std::vector<ExtendedLabel>& targets) {
    if (examples.size() != targets.size())
        throw ValidationError("masked_pl_loss: examples and targets disagree in length");
    if (examples.empty()) return Tensor::scalar(0.0);
    std::vector<std::vector<double>> xs, ys;
    xs.reserve(examples.size());
    ys.reserve(targets.size());
    for (const auto* ex : examples) xs.push_back(ex->features);
    for (const auto& t : targets) ys.push_back(t.probs);
    const Tensor pred = classify(head, encode(encoder, Tensor::from_rows(xs)));
    return cross_entropy(pred, Tensor::from_rows(ys));
}

}  // namespace unihssl
