#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unihssl/align.hpp"
#include "unihssl/data.hpp"
#include "unihssl/mixup.hpp"
#include "unihssl/model.hpp"
#include "unihssl/pseudolabel.hpp"

namespace unihssl {

// Every knob of the training procedure in one validated record. Defaults:
// lambda_pl = lambda_mixup = 1, lambda_pa = 1e-2, tau = epsilon = 0.5,
// beta = 0.8, SGD lr 5e-4 with Nesterov momentum 0.9 and L2 1e-3, batch 32,
// 10 pre-training epochs, 100 training epochs.
struct Hyperparams {
    double lambda_pl = 1.0;
    double lambda_pa = 1e-2;
    double lambda_mixup = 1.0;
    double tau = 0.5;      // alignment temperature
    double epsilon = 0.5;  // pseudo-label confidence threshold
    double beta = 0.8;     // WMA rate
    double alpha = 0.75;   // Beta shape for mixup draws
    double lr0 = 5e-4;
    double momentum = 0.9;
    double weight_decay = 1e-3;
    std::size_t batch_size = 32;
    std::size_t pretrain_epochs = 10;
    std::size_t train_epochs = 100;
    std::uint64_t seed = 1;
    std::vector<std::size_t> hidden_dims = {64, 32};  // encoder widths after the input
    double jitter_sigma = 0.0;  // feature-space noise applied before mixing
    bool include_positive_pair = false;

    void validate() const;  // ConfigError on violation
};

// Ablation switches: no_wma overwrites pseudo-labels with the current
// prediction instead of blending; no_sup/no_pl/no_pa/no_mixup zero the
// corresponding loss weight; no_prog_mixup draws lambda from the unscaled
// Beta distribution.
enum class Variant { full, no_wma, no_sup, no_pl, no_pa, no_mixup, no_prog_mixup };

Variant variant_from_string(const std::string& name);  // ConfigError on unknown
std::string to_string(Variant variant);

struct IterationRecord {
    std::size_t t = 0;
    double lr = 0;
    double psi = 0;
    double loss_total = 0;
    double loss_sup = 0;
    double loss_pl = 0;
    double loss_pa = 0;
    double loss_mixup = 0;
    std::size_t confident_count = 0;  // confident pseudo-labels in the batch
};

struct TrainResult {
    EncoderParams encoder;
    HeadParams head;  // 2C classes
    PseudoLabelStore store;
    std::vector<IterationRecord> history;
};

// lr(t) = lr0 * 0.5 * (1 + cos(pi * t / T)), no restarts.
double cosine_lr(std::size_t t, std::size_t total_iterations, double lr0);

// g <- grad + weight_decay * theta; v <- momentum * v + g;
// theta <- theta - lr * (g + momentum * v).
class NesterovSgd {
public:
    NesterovSgd(std::vector<Tensor*> params, double momentum, double weight_decay);
    void step(double lr);  // TrainingError on a non-finite gradient

private:
    std::vector<Tensor*> params_;
    std::vector<std::vector<double>> velocity_;
    double momentum_;
    double weight_decay_;
};

// Cyclic shuffled minibatches: an epoch is one shuffled pass, the final batch
// of an epoch may be short, then the order is reshuffled.
class BatchStream {
public:
    BatchStream(std::size_t n, std::size_t batch_size, Rng rng);
    std::vector<std::size_t> next();
    std::size_t batches_per_epoch() const;

private:
    void reshuffle();
    std::size_t n_;
    std::size_t batch_size_;
    std::size_t pos_ = 0;
    Rng rng_;
    std::vector<std::size_t> order_;
};

// Supervised pre-training of the C-class model (encoder + g head) by
// minibatch SGD on cross-entropy at constant lr0.
std::pair<EncoderParams, HeadParams> pretrain(const std::vector<LabeledExample>& labeled,
                                              const Hyperparams& hp);

// The joint loop: per iteration draws one labeled and one unlabeled batch,
// computes the supervised loss, refreshes pseudo-labels, accumulates the
// masked pseudo-label loss, the prototype alignment loss and the mixup loss,
// and takes one Nesterov step at the cosine-annealed rate.
// T = train_epochs * ceil(max(N_l, N_u) / batch_size).
TrainResult train(const HsslDataset& data, const Hyperparams& hp,
                  Variant variant = Variant::full);
// Continues from an already pre-trained C-class model (cloned, not mutated).
TrainResult train(const HsslDataset& data, const Hyperparams& hp, Variant variant,
                  const EncoderParams& pretrained_encoder, const HeadParams& g_head);

// Plain supervised training of the 2C head on expanded labels, written as an
// independent loop: the reference side of the reduction identity (all
// auxiliary weights zero must match it bit for bit).
TrainResult train_supervised_reference(const HsslDataset& data, const Hyperparams& hp,
                                       const EncoderParams& pretrained_encoder,
                                       const HeadParams& g_head);

}  // namespace unihssl
