#include "unihssl/mixup.hpp"

#include <cmath>
#include <iostream>

namespace unihssl {

double schedule_psi(std::size_t t, std::size_t total_iterations) {
    if (total_iterations == 0) throw ContractError("schedule_psi: total_iterations must be >= 1");
    if (t > total_iterations)
        throw ContractError("schedule_psi: t = " + std::to_string(t) + " exceeds T = " +
                            std::to_string(total_iterations));
    return 0.5 + static_cast<double>(t) / (2.0 * static_cast<double>(total_iterations));
}

double sample_lambda(std::size_t t, std::size_t total_iterations, double alpha, Rng& rng,
                     LambdaSchedule schedule) {
    if (!(alpha > 0.0)) throw ConfigError("sample_lambda: alpha must be > 0");
    const double b = rng.beta(alpha, alpha);
    if (schedule == LambdaSchedule::plain_beta) return b;
    const double psi = schedule_psi(t, total_iterations);
    const double lambda = psi * b;
    if (lambda > psi) throw ContractError("sample_lambda: draw exceeded psi(t)");
    return lambda;
}

MixedExample mix_pair(const LabeledExample& labeled, const std::vector<double>& x_u,
                      const ExtendedLabel& y_u, double lambda) {
    if (labeled.features.size() != x_u.size())
        throw DimensionError("mix_pair: feature dimensions differ, " +
                             std::to_string(labeled.features.size()) + " vs " +
                             std::to_string(x_u.size()));
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ContractError("mix_pair: lambda must lie in [0,1]");
    const ExtendedLabel y_l = expand_labeled(labeled.label);
    if (y_l.probs.size() != y_u.probs.size())
        throw DimensionError("mix_pair: label spaces differ");

    MixedExample out;
    if (lambda == 0.0) {  // exact endpoints, bit for bit
        out.features = labeled.features;
        out.target = y_l.probs;
        return out;
    }
    if (lambda == 1.0) {
        out.features = x_u;
        out.target = y_u.probs;
        return out;
    }
    out.features.resize(x_u.size());
    for (std::size_t i = 0; i < x_u.size(); ++i)
        out.features[i] = lambda * x_u[i] + (1.0 - lambda) * labeled.features[i];
    out.target.resize(y_u.probs.size());
    for (std::size_t i = 0; i < y_u.probs.size(); ++i)
        out.target[i] = lambda * y_u.probs[i] + (1.0 - lambda) * y_l.probs[i];
    ExtendedLabel check{out.target};
    check.check_simplex();
    return out;
}

std::vector<MixedExample> build_mixup_set(
    const std::vector<const LabeledExample*>& labeled_batch,
    const std::vector<const UnlabeledExample*>& unlabeled_batch, const PseudoLabelStore& store,
    std::size_t t, std::size_t total_iterations, double alpha, Rng& rng,
    LambdaSchedule schedule, double jitter_sigma) {
    if (labeled_batch.empty() || unlabeled_batch.empty()) {
        std::cerr << "warning: mixup skipped, "
                  << (labeled_batch.empty() ? "labeled" : "unlabeled") << " batch is empty\n";
        return {};
    }

    auto jitter = [&](std::vector<double> x) {
        if (jitter_sigma > 0.0)
            for (double& v : x) v += jitter_sigma * rng.normal();
        return x;
    };

    const std::size_t n = std::max(labeled_batch.size(), unlabeled_batch.size());
    const bool labeled_is_base = labeled_batch.size() >= unlabeled_batch.size();
    std::vector<MixedExample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const LabeledExample* l;
        const UnlabeledExample* u;
        if (labeled_is_base) {
            l = labeled_batch[i];
            u = unlabeled_batch[rng.uniform_index(unlabeled_batch.size())];
        } else {
            u = unlabeled_batch[i];
            l = labeled_batch[rng.uniform_index(labeled_batch.size())];
        }
        const double lambda = sample_lambda(t, total_iterations, alpha, rng, schedule);
        if (jitter_sigma > 0.0) {
            LabeledExample jl{jitter(l->features), l->label};
            out.push_back(mix_pair(jl, jitter(u->features), store.at(u->stable_id), lambda));
        } else {
            out.push_back(mix_pair(*l, u->features, store.at(u->stable_id), lambda));
        }
    }
    return out;
}

Tensor mixup_loss(const EncoderParams& encoder, const HeadParams& head,
                  const std::vector<MixedExample>& batch) {
    if (batch.empty()) return Tensor::scalar(0.0);
    std::vector<std::vector<double>> xs, ys;
    xs.reserve(batch.size());
    ys.reserve(batch.size());
    for (const auto& ex : batch) {
        xs.push_back(ex.features);
        ys.push_back(ex.target);
    }
    const Tensor pred = classify(head, encode(encoder, Tensor::from_rows(xs)));
    return mse(pred, Tensor::from_rows(ys));
}

}  // namespace unihssl
