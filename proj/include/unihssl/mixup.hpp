#pragma once

#include <cstddef>
#include <vector>

#include "unihssl/data.hpp"
#include "unihssl/model.hpp"
#include "unihssl/pseudolabel.hpp"

namespace unihssl {

// psi(t) = 0.5 + t / (2T): the schedule expanding the mixing-coefficient
// range from [0, 0.5] at the start of training to [0, 1] at the end.
double schedule_psi(std::size_t t, std::size_t total_iterations);

enum class LambdaSchedule {
    progressive,  // lambda ~ psi(t) * Beta(alpha, alpha)
    plain_beta,   // lambda ~ Beta(alpha, alpha), the non-progressive ablation
};

double sample_lambda(std::size_t t, std::size_t total_iterations, double alpha, Rng& rng,
                     LambdaSchedule schedule = LambdaSchedule::progressive);

// A synthetic cross-domain instance; the target lives on the 2C simplex and
// is a constant in the mixup loss.
struct MixedExample {
    std::vector<double> features;
    std::vector<double> target;
};

// x_m = lambda * x_u + (1 - lambda) * x_l,
// y_m = lambda * pseudo + (1 - lambda) * expanded ground truth.
// lambda weights the unlabeled sample; the endpoints reproduce the inputs
// bit-exactly.
MixedExample mix_pair(const LabeledExample& labeled, const std::vector<double>& x_u,
                      const ExtendedLabel& y_u, double lambda);

// Pairs every instance of the larger batch with a uniformly random instance
// of the smaller one (drawn with replacement), one fresh lambda per pair.
// Feature jitter, when nonzero, perturbs both inputs before mixing. Returns
// an empty set (zero-loss contribution) when either batch is empty, with a
// warning on stderr.
std::vector<MixedExample> build_mixup_set(
    const std::vector<const LabeledExample*>& labeled_batch,
    const std::vector<const UnlabeledExample*>& unlabeled_batch, const PseudoLabelStore& store,
    std::size_t t, std::size_t total_iterations, double alpha, Rng& rng,
    LambdaSchedule schedule = LambdaSchedule::progressive, double jitter_sigma = 0.0);

// Mean squared distance between the 2C prediction rows and the constant
// mixed targets; exact zero for an empty set.
Tensor mixup_loss(const EncoderParams& encoder, const HeadParams& head,
                  const std::vector<MixedExample>& batch);

}  // namespace unihssl
