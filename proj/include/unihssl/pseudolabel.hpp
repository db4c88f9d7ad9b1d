#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <vector>

#include "unihssl/data.hpp"
#include "unihssl/model.hpp"

namespace unihssl {

// Per-unlabeled-instance extended pseudo-labels, maintained across training
// iterations by weighted moving average. Stored vectors are plain values:
// losses treat them as constants (stop-gradient).
class PseudoLabelStore {
public:
    PseudoLabelStore() = default;

    // ExtendedLabel per id; every vector must sit on the 2C simplex.
    void insert(std::size_t stable_id, ExtendedLabel label);

    // new = beta * old + (1 - beta) * prediction, entrywise; only the given
    // ids change, and the iteration stamp advances once per call.
    void wma_update(const std::vector<std::size_t>& ids,
                    const std::vector<std::vector<double>>& predictions, double beta);
    // Ablation path: the prediction replaces the stored value outright.
    void assign_direct(const std::vector<std::size_t>& ids,
                       const std::vector<std::vector<double>>& predictions);

    const ExtendedLabel& at(std::size_t stable_id) const;
    bool contains(std::size_t stable_id) const;
    std::size_t size() const { return entries_.size(); }
    std::size_t iteration() const { return iteration_; }

    // Entries whose maximum entry strictly exceeds eps, in ascending id order.
    std::vector<std::pair<std::size_t, ExtendedLabel>> confident_subset(double eps) const;

    const std::map<std::size_t, ExtendedLabel>& entries() const { return entries_; }

    // Diagnostic dump: stable_id, argmax class, max confidence per entry.
    void dump_csv(std::ostream& out) const;

private:
    std::map<std::size_t, ExtendedLabel> entries_;
    std::size_t iteration_ = 0;
};

// Initial pseudo-labels from the pre-trained C-class model: the prediction
// g(f(x)) fills the unlabeled-domain block, the labeled-domain block is zero.
PseudoLabelStore init_store(const EncoderParams& encoder, const HeadParams& g_head,
                            const std::vector<UnlabeledExample>& unlabeled);

// Cross-entropy of the current 2C predictions against the stored pseudo-label
// targets, averaged over the given confident examples; exact zero when the
// subset is empty. Targets are constants: no gradient flows into them.
ndgrad::Tensor masked_pl_loss(const EncoderParams& encoder, const HeadParams& head,
                              const std::vector<const UnlabeledExample*>& examples,
                              const std::vector<ExtendedLabel>& targets);

}  // namespace unihssl
