#include "unihssl/trainer.hpp"

#include <cmath>
#include <sstream>

namespace unihssl {

namespace {

// Stream tags: each consumer of randomness gets its own engine so that, for
// example, the labeled batch order does not depend on whether mixup ran.
constexpr std::uint64_t kStreamInit = 11;
constexpr std::uint64_t kStreamPretrainBatches = 12;
constexpr std::uint64_t kStreamLabeledBatches = 13;
constexpr std::uint64_t kStreamUnlabeledBatches = 14;
constexpr std::uint64_t kStreamMixup = 15;

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void check_params_finite(const std::vector<Tensor*>& params, const std::string& context) {
    for (const Tensor* p : params)
        for (double v : p->values())
            if (!std::isfinite(v)) throw TrainingError("non-finite parameter " + context);
}

}  // namespace

void Hyperparams::validate() const {
    if (lambda_pl < 0 || lambda_pa < 0 || lambda_mixup < 0)
        throw ConfigError("loss weights must be >= 0");
    if (!(tau > 0)) throw ConfigError("tau must be > 0");
    if (!(epsilon > 0 && epsilon < 1)) throw ConfigError("epsilon must lie in (0,1)");
    if (!(beta > 0 && beta < 1)) throw ConfigError("beta must lie in (0,1)");
    if (!(alpha > 0)) throw ConfigError("alpha must be > 0");
    if (!(lr0 > 0)) throw ConfigError("lr0 must be > 0");
    if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0,1)");
    if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (train_epochs < 1) throw ConfigError("train_epochs must be >= 1");
    if (hidden_dims.empty()) throw ConfigError("hidden_dims must name at least the embed width");
    for (std::size_t d : hidden_dims)
        if (d == 0) throw ConfigError("hidden layer width must be >= 1");
    if (jitter_sigma < 0) throw ConfigError("jitter_sigma must be >= 0");
}

Variant variant_from_string(const std::string& name) {
    if (name == "full" || name.empty()) return Variant::full;
    if (name == "no_wma") return Variant::no_wma;
    if (name == "no_sup") return Variant::no_sup;
    if (name == "no_pl") return Variant::no_pl;
    if (name == "no_pa") return Variant::no_pa;
    if (name == "no_mixup") return Variant::no_mixup;
    if (name == "no_prog_mixup") return Variant::no_prog_mixup;
    throw ConfigError("unknown variant '" + name + "'");
}

std::string to_string(Variant variant) {
    switch (variant) {
        case Variant::full: return "full";
        case Variant::no_wma: return "no_wma";
        case Variant::no_sup: return "no_sup";
        case Variant::no_pl: return "no_pl";
        case Variant::no_pa: return "no_pa";
        case Variant::no_mixup: return "no_mixup";
        case Variant::no_prog_mixup: return "no_prog_mixup";
    }
    throw ConfigError("unknown variant value");
}

double cosine_lr(std::size_t t, std::size_t total_iterations, double lr0) {
    if (total_iterations == 0) throw ContractError("cosine_lr: total_iterations must be >= 1");
    if (t > total_iterations) throw ContractError("cosine_lr: t exceeds total_iterations");
    return lr0 * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(t) /
                                       static_cast<double>(total_iterations)));
}

NesterovSgd::NesterovSgd(std::vector<Tensor*> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
    velocity_.reserve(params_.size());
    for (const Tensor* p : params_) velocity_.emplace_back(p->size(), 0.0);
}

void NesterovSgd::step(double lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& grad = params_[i]->grad_buffer();
        auto& theta = params_[i]->mutable_values();
        auto& v = velocity_[i];
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double g = grad[j] + weight_decay_ * theta[j];
            if (!std::isfinite(g))
                throw TrainingError("non-finite gradient in parameter " + std::to_string(i) +
                                    " entry " + std::to_string(j));
            v[j] = momentum_ * v[j] + g;
            theta[j] -= lr * (g + momentum_ * v[j]);
        }
    }
}

BatchStream::BatchStream(std::size_t n, std::size_t batch_size, Rng rng)
    : n_(n), batch_size_(batch_size), rng_(rng) {
    if (n_ == 0) throw ValidationError("BatchStream: empty dataset");
    if (batch_size_ == 0) throw ConfigError("BatchStream: batch_size must be >= 1");
    order_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
    reshuffle();
}

void BatchStream::reshuffle() {
    rng_.shuffle(order_);
    pos_ = 0;
}

std::vector<std::size_t> BatchStream::next() {
    if (pos_ >= n_) reshuffle();
    const std::size_t take = std::min(batch_size_, n_ - pos_);
    std::vector<std::size_t> batch(order_.begin() + pos_, order_.begin() + pos_ + take);
    pos_ += take;
    return batch;
}

std::size_t BatchStream::batches_per_epoch() const { return ceil_div(n_, batch_size_); }

// ---------------------------------------------------------------------------
// Pre-training

std::pair<EncoderParams, HeadParams> pretrain(const std::vector<LabeledExample>& labeled,
                                              const Hyperparams& hp) {
    hp.validate();
    if (labeled.empty()) throw ValidationError("pretrain: empty labeled set");
    const std::size_t c = labeled.front().label.size();
    const std::size_t d = labeled.front().features.size();

    std::vector<std::size_t> dims;
    dims.push_back(d);
    dims.insert(dims.end(), hp.hidden_dims.begin(), hp.hidden_dims.end());
    Rng init_rng(hp.seed, kStreamInit);
    EncoderParams encoder = make_encoder(dims, init_rng);
    HeadParams g_head = make_head(encoder.embed_dim(), c, init_rng);

    std::vector<Tensor*> params = encoder.parameters();
    for (Tensor* p : g_head.parameters()) params.push_back(p);
    NesterovSgd opt(params, hp.momentum, hp.weight_decay);

    BatchStream batches(labeled.size(), hp.batch_size, Rng(hp.seed, kStreamPretrainBatches));
    const std::size_t iters = hp.pretrain_epochs * batches.batches_per_epoch();
    for (std::size_t it = 0; it < iters; ++it) {
        const auto batch = batches.next();
        std::vector<std::vector<double>> xs, ys;
        xs.reserve(batch.size());
        ys.reserve(batch.size());
        for (std::size_t idx : batch) {
            xs.push_back(labeled[idx].features);
            ys.push_back(labeled[idx].label);
        }
        const Tensor loss = cross_entropy(classify(g_head, encode(encoder, Tensor::from_rows(xs))),
                                          Tensor::from_rows(ys));
        if (!std::isfinite(loss.value()))
            throw TrainingError("pretrain: non-finite loss at iteration " + std::to_string(it));
        for (Tensor* p : params) p->zero_grad();
        backward(loss);
        opt.step(hp.lr0);
        check_params_finite(params, "after pretrain iteration " + std::to_string(it));
    }
    return {std::move(encoder), std::move(g_head)};
}

// ---------------------------------------------------------------------------
// Joint loop

namespace {

struct LossTerms {
    double sup = 0, pl = 0, pa = 0, mixup = 0;
    std::string breakdown() const {
        std::ostringstream os;
        os << "sup=" << sup << " pl=" << pl << " pa=" << pa << " mixup=" << mixup;
        return os.str();
    }
};

}  // namespace

TrainResult train(const HsslDataset& data, const Hyperparams& hp, Variant variant,
                  const EncoderParams& pretrained_encoder, const HeadParams& g_head) {
    hp.validate();
    if (data.labeled.empty()) throw ValidationError("train: empty labeled set");
    if (data.unlabeled.empty()) throw ValidationError("train: empty unlabeled set");
    const int c = data.class_count;

    EncoderParams encoder = clone(pretrained_encoder);
    HeadParams head = init_2c_from_pretrained(g_head, hp.seed);
    PseudoLabelStore store = init_store(pretrained_encoder, g_head, data.unlabeled);

    const double w_sup = variant == Variant::no_sup ? 0.0 : 1.0;
    const double w_pl = variant == Variant::no_pl ? 0.0 : hp.lambda_pl;
    const double w_pa = variant == Variant::no_pa ? 0.0 : hp.lambda_pa;
    const double w_mix = variant == Variant::no_mixup ? 0.0 : hp.lambda_mixup;
    const LambdaSchedule schedule = variant == Variant::no_prog_mixup
                                        ? LambdaSchedule::plain_beta
                                        : LambdaSchedule::progressive;

    std::vector<Tensor*> params = encoder.parameters();
    for (Tensor* p : head.parameters()) params.push_back(p);
    NesterovSgd opt(params, hp.momentum, hp.weight_decay);

    BatchStream labeled_batches(data.labeled.size(), hp.batch_size,
                                Rng(hp.seed, kStreamLabeledBatches));
    BatchStream unlabeled_batches(data.unlabeled.size(), hp.batch_size,
                                  Rng(hp.seed, kStreamUnlabeledBatches));
    Rng mixup_rng(hp.seed, kStreamMixup);

    const std::size_t total =
        hp.train_epochs * ceil_div(std::max(data.labeled.size(), data.unlabeled.size()),
                                   hp.batch_size);

    TrainResult result;
    result.history.reserve(total);

    for (std::size_t t = 1; t <= total; ++t) {
        const double lr = cosine_lr(t - 1, total, hp.lr0);
        const auto batch_l = labeled_batches.next();
        const auto batch_u = unlabeled_batches.next();

        LossTerms terms;
        Tensor loss_total;
        auto add_term = [&loss_total](const Tensor& term, double weight) {
            if (!term.defined() || weight == 0.0) return;
            const Tensor scaled = weight == 1.0 ? term : scale(term, weight);
            loss_total = loss_total.defined() ? add(loss_total, scaled) : scaled;
        };

        // (1) supervised loss on the labeled batch, in the 2C space
        Tensor loss_sup;
        if (w_sup != 0.0) {
            std::vector<std::vector<double>> xs, ys;
            xs.reserve(batch_l.size());
            ys.reserve(batch_l.size());
            for (std::size_t idx : batch_l) {
                xs.push_back(data.labeled[idx].features);
                ys.push_back(expand_labeled(data.labeled[idx].label).probs);
            }
            loss_sup = cross_entropy(classify(head, encode(encoder, Tensor::from_rows(xs))),
                                     Tensor::from_rows(ys));
            terms.sup = loss_sup.value();
        }
        add_term(loss_sup, w_sup);

        // (2) pseudo-label refresh from the current model's predictions
        {
            std::vector<std::vector<double>> xs;
            std::vector<std::size_t> ids;
            xs.reserve(batch_u.size());
            ids.reserve(batch_u.size());
            for (std::size_t idx : batch_u) {
                xs.push_back(data.unlabeled[idx].features);
                ids.push_back(data.unlabeled[idx].stable_id);
            }
            const Tensor probs = classify(head, encode(encoder, Tensor::from_rows(xs)));
            std::vector<std::vector<double>> rows(batch_u.size());
            for (std::size_t i = 0; i < batch_u.size(); ++i) {
                rows[i].resize(2 * c);
                for (int j = 0; j < 2 * c; ++j) rows[i][j] = probs.at(i, j);
            }
            if (variant == Variant::no_wma)
                store.assign_direct(ids, rows);
            else
                store.wma_update(ids, rows, hp.beta);
        }

        // (3) masked pseudo-label loss over the batch's confident entries
        std::vector<const UnlabeledExample*> confident;
        std::vector<ExtendedLabel> confident_targets;
        for (std::size_t idx : batch_u) {
            const ExtendedLabel& label = store.at(data.unlabeled[idx].stable_id);
            if (label.max() > hp.epsilon) {
                confident.push_back(&data.unlabeled[idx]);
                confident_targets.push_back(label);
            }
        }
        Tensor loss_pl;
        if (w_pl != 0.0) {
            loss_pl = masked_pl_loss(encoder, head, confident, confident_targets);
            terms.pl = loss_pl.value();
        }
        add_term(loss_pl, w_pl);

        // (4)-(5) per-batch prototypes and the alignment loss
        Tensor loss_pa;
        if (w_pa != 0.0) {
            PrototypeSet protos = labeled_prototypes(encoder, data.labeled, batch_l, c);
            protos.merge(
                unlabeled_prototypes(encoder, data.unlabeled, batch_u, store, hp.epsilon, c));
            loss_pa = prototype_alignment_loss(protos, hp.tau, hp.include_positive_pair);
            terms.pa = loss_pa.value();
        }
        add_term(loss_pa, w_pa);

        // (6)-(7) progressive mixup set and its loss
        Tensor loss_mix;
        if (w_mix != 0.0) {
            std::vector<const LabeledExample*> lb;
            std::vector<const UnlabeledExample*> ub;
            lb.reserve(batch_l.size());
            ub.reserve(batch_u.size());
            for (std::size_t idx : batch_l) lb.push_back(&data.labeled[idx]);
            for (std::size_t idx : batch_u) ub.push_back(&data.unlabeled[idx]);
            const auto mixed = build_mixup_set(lb, ub, store, t, total, hp.alpha, mixup_rng,
                                               schedule, hp.jitter_sigma);
            loss_mix = mixup_loss(encoder, head, mixed);
            terms.mixup = loss_mix.value();
        }
        add_term(loss_mix, w_mix);

        // (8) combine, backpropagate, step
        if (!loss_total.defined()) loss_total = Tensor::scalar(0.0);
        const double total_value = loss_total.value();
        if (!std::isfinite(total_value))
            throw TrainingError("non-finite total loss at iteration " + std::to_string(t) +
                                " (" + terms.breakdown() + ")");
        for (Tensor* p : params) p->zero_grad();
        backward(loss_total);
        try {
            opt.step(lr);
        } catch (const TrainingError& e) {
            throw TrainingError(std::string(e.what()) + " at iteration " + std::to_string(t) +
                                " (" + terms.breakdown() + ")");
        }
        check_params_finite(params, "after iteration " + std::to_string(t));

        result.history.push_back({t, lr, schedule_psi(t, total), total_value, terms.sup,
                                  terms.pl, terms.pa, terms.mixup, confident.size()});
    }

    result.encoder = std::move(encoder);
    result.head = std::move(head);
    result.store = std::move(store);
    return result;
}

TrainResult train(const HsslDataset& data, const Hyperparams& hp, Variant variant) {
    auto [encoder, g_head] = pretrain(data.labeled, hp);
    return train(data, hp, variant, encoder, g_head);
}

TrainResult train_supervised_reference(const HsslDataset& data, const Hyperparams& hp,
                                       const EncoderParams& pretrained_encoder,
                                       const HeadParams& g_head) {
    hp.validate();
    if (data.labeled.empty()) throw ValidationError("train: empty labeled set");

    EncoderParams encoder = clone(pretrained_encoder);
    HeadParams head = init_2c_from_pretrained(g_head, hp.seed);

    std::vector<Tensor*> params = encoder.parameters();
    for (Tensor* p : head.parameters()) params.push_back(p);
    NesterovSgd opt(params, hp.momentum, hp.weight_decay);

    BatchStream labeled_batches(data.labeled.size(), hp.batch_size,
                                Rng(hp.seed, kStreamLabeledBatches));
    const std::size_t total =
        hp.train_epochs * ceil_div(std::max(data.labeled.size(), data.unlabeled.size()),
                                   hp.batch_size);

    TrainResult result;
    result.history.reserve(total);
    for (std::size_t t = 1; t <= total; ++t) {
        const double lr = cosine_lr(t - 1, total, hp.lr0);
        const auto batch = labeled_batches.next();
        std::vector<std::vector<double>> xs, ys;
        xs.reserve(batch.size());
        ys.reserve(batch.size());
        for (std::size_t idx : batch) {
            xs.push_back(data.labeled[idx].features);
            ys.push_back(expand_labeled(data.labeled[idx].label).probs);
        }
        const Tensor loss = cross_entropy(classify(head, encode(encoder, Tensor::from_rows(xs))),
                                          Tensor::from_rows(ys));
        for (Tensor* p : params) p->zero_grad();
        backward(loss);
        opt.step(lr);
        result.history.push_back(
            {t, lr, schedule_psi(t, total), loss.value(), loss.value(), 0, 0, 0, 0});
    }

    result.encoder = std::move(encoder);
    result.head = std::move(head);
    return result;
}

}  // namespace unihssl
