#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "unihssl/data.hpp"
#include "unihssl/model.hpp"
#include "unihssl/pseudolabel.hpp"

namespace unihssl {

// Feature-space class centroids over the 2C joint label space: slots 0..C-1
// come from the labeled domain, C..2C-1 from confidently pseudo-labeled
// instances. Absent classes stay absent; nothing is fabricated. Vectors stay
// attached to the differentiation graph, so the alignment loss trains the
// encoder through them.
class PrototypeSet {
public:
    explicit PrototypeSet(std::size_t double_classes)
        : vectors_(double_classes) {}

    std::size_t double_classes() const { return vectors_.size(); }
    bool present(std::size_t k) const { return vectors_[k].has_value(); }
    const Tensor& at(std::size_t k) const;
    void set(std::size_t k, Tensor prototype);

    // Moves the other set's present entries in; slots may not collide.
    void merge(PrototypeSet other);

    // Count of semantic classes with both the labeled and unlabeled prototype.
    std::size_t paired_count() const;

    // Diagnostic dump: the 2C x 2C cosine-similarity matrix (blank where a
    // prototype is absent).
    void dump_cosine_csv(std::ostream& out) const;

private:
    std::vector<std::optional<Tensor>> vectors_;
};

// Mean embedding per class over the batch, grouped by ground-truth label.
// Summation order is canonical: classes ascending, dataset index ascending
// within a class, so any reordering of the batch leaves results bit-identical.
PrototypeSet labeled_prototypes(const EncoderParams& encoder,
                                const std::vector<LabeledExample>& labeled,
                                const std::vector<std::size_t>& batch_indices,
                                int class_count);

// Mean embedding per unlabeled-domain class over the batch instances whose
// pseudo-label clears the confidence threshold AND points at that class.
// Confident instances whose argmax falls in the labeled-domain block
// contribute to no prototype.
PrototypeSet unlabeled_prototypes(const EncoderParams& encoder,
                                  const std::vector<UnlabeledExample>& unlabeled,
                                  const std::vector<std::size_t>& batch_indices,
                                  const PseudoLabelStore& store, double eps, int class_count);

// Cross-domain contrastive alignment over prototype pairs (k, C+k): each
// semantic class contributes two symmetric log-ratio terms whose denominators
// range over the non-corresponding cross-domain pairs. By default the
// positive pair is excluded from the denominators, so individual terms can go
// negative and the loss is unbounded below as alignment improves;
// include_positive_pair switches to the standard InfoNCE denominator. Terms
// with absent prototypes are skipped; fewer than two complete pairs yields 0.
Tensor prototype_alignment_loss(const PrototypeSet& protos, double tau,
                                bool include_positive_pair = false);

}  // namespace unihssl
