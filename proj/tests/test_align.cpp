#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "testutil.hpp"
#include "unihssl/align.hpp"

using namespace unihssl;

namespace {

using testutil::alignment_oracle;

PrototypeSet set_from(const std::vector<std::vector<double>>& protos,
                      const std::vector<bool>& present) {
    PrototypeSet out(protos.size());
    for (std::size_t k = 0; k < protos.size(); ++k)
        if (present[k]) out.set(k, Tensor::from_values({protos[k].size()}, protos[k]));
    return out;
}

std::vector<LabeledExample> random_labeled(std::size_t n, std::size_t dim, int classes,
                                           Rng& rng) {
    std::vector<LabeledExample> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({testutil::random_values(dim, rng),
                       one_hot(static_cast<int>(rng.uniform_index(classes)), classes)});
    return out;
}

}  // namespace

TEST_SUITE("align") {

TEST_CASE("a singleton class prototype is that embedding") {
    Rng rng(41);
    EncoderParams enc = make_encoder({3, 4}, rng);
    std::vector<LabeledExample> labeled = {{{0.5, -1.0, 2.0}, {0, 1, 0}}};
    const PrototypeSet protos = labeled_prototypes(enc, labeled, {0}, 3);
    CHECK(protos.present(1));
    CHECK_FALSE(protos.present(0));
    CHECK_FALSE(protos.present(2));
    const Tensor z = encode(enc, Tensor::from_rows({labeled[0].features}));
    for (std::size_t j = 0; j < 4; ++j) CHECK(protos.at(1).at(j) == z.at(0, j));
}

TEST_CASE("two instances average their embeddings") {
    Rng rng(42);
    EncoderParams enc = make_encoder({2, 3}, rng);
    std::vector<LabeledExample> labeled = {{{1.0, 0.0}, {1, 0}}, {{0.0, 1.0}, {1, 0}}};
    const PrototypeSet protos = labeled_prototypes(enc, labeled, {0, 1}, 2);
    const Tensor z = encode(enc, Tensor::from_rows({labeled[0].features, labeled[1].features}));
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(protos.at(0).at(j) ==
              doctest::Approx((z.at(0, j) + z.at(1, j)) / 2.0).epsilon(1e-15));
}

TEST_CASE("labeled prototypes match a brute-force group-by mean") {
    Rng rng(43);
    EncoderParams enc = make_encoder({4, 5, 3}, rng);
    const auto labeled = random_labeled(20, 4, 3, rng);
    std::vector<std::size_t> batch;
    for (std::size_t i = 0; i < labeled.size(); ++i) batch.push_back(i);
    const PrototypeSet protos = labeled_prototypes(enc, labeled, batch, 3);

    std::map<int, std::pair<std::vector<double>, std::size_t>> groups;
    for (const auto& ex : labeled) {
        const auto z = testutil::mlp_forward_oracle(
            {enc.weights[0].values(), enc.weights[1].values()},
            {enc.biases[0].values(), enc.biases[1].values()}, {4, 5, 3}, ex.features);
        auto& [acc, n] = groups[ex.label_index()];
        acc.resize(3, 0.0);
        for (std::size_t j = 0; j < 3; ++j) acc[j] += z[j];
        ++n;
    }
    for (const auto& [k, group] : groups) {
        REQUIRE(protos.present(k));
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(protos.at(k).at(j) ==
                  doctest::Approx(group.first[j] / group.second).epsilon(1e-12));
    }
}

TEST_CASE("prototypes are invariant to batch order, bit for bit") {
    Rng rng(44);
    EncoderParams enc = make_encoder({4, 6, 3}, rng);
    const auto labeled = random_labeled(16, 4, 3, rng);
    std::vector<std::size_t> batch, shuffled;
    for (std::size_t i = 0; i < labeled.size(); ++i) batch.push_back(i);
    shuffled = batch;
    rng.shuffle(shuffled);
    const PrototypeSet a = labeled_prototypes(enc, labeled, batch, 3);
    const PrototypeSet b = labeled_prototypes(enc, labeled, shuffled, 3);
    for (int k = 0; k < 3; ++k) {
        REQUIRE(a.present(k) == b.present(k));
        if (a.present(k))
            for (std::size_t j = 0; j < 3; ++j) CHECK(a.at(k).at(j) == b.at(k).at(j));
    }
}

TEST_CASE("unlabeled prototypes use only confident entries of the matching block") {
    Rng rng(45);
    EncoderParams enc = make_encoder({2, 3}, rng);
    std::vector<UnlabeledExample> unlabeled = {
        {{1.0, 0.0}, 0}, {{0.0, 1.0}, 1}, {{1.0, 1.0}, 2}, {{0.5, 0.5}, 3}};
    PseudoLabelStore store;
    store.insert(0, ExtendedLabel{{0.0, 0.0, 0.0, 0.9, 0.1, 0.0}});  // confident, class C+1
    store.insert(1, ExtendedLabel{{0.0, 0.0, 0.0, 0.2, 0.4, 0.4}});  // not confident
    store.insert(2, ExtendedLabel{{0.9, 0.1, 0.0, 0.0, 0.0, 0.0}});  // confident, labeled block
    store.insert(3, ExtendedLabel{{0.0, 0.0, 0.0, 0.8, 0.1, 0.1}});  // confident, class C+1

    const PrototypeSet protos = unlabeled_prototypes(enc, unlabeled, {0, 1, 2, 3}, store, 0.5, 3);
    REQUIRE(protos.present(3));
    CHECK_FALSE(protos.present(4));
    CHECK_FALSE(protos.present(5));
    // mean of embeddings of ids 0 and 3 only
    const Tensor z =
        encode(enc, Tensor::from_rows({unlabeled[0].features, unlabeled[3].features}));
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(protos.at(3).at(j) ==
              doctest::Approx((z.at(0, j) + z.at(1, j)) / 2.0).epsilon(1e-15));
}

TEST_CASE("no confident instances leaves every unlabeled prototype absent") {
    Rng rng(46);
    EncoderParams enc = make_encoder({2, 3}, rng);
    std::vector<UnlabeledExample> unlabeled = {{{1.0, 0.0}, 0}};
    PseudoLabelStore store;
    store.insert(0, ExtendedLabel{{0.25, 0.25, 0.25, 0.25, 0.0, 0.0}});
    const PrototypeSet protos = unlabeled_prototypes(enc, unlabeled, {0}, store, 0.5, 3);
    for (int k = 3; k < 6; ++k) CHECK_FALSE(protos.present(k));
}

TEST_CASE("equal cross-domain similarities give zero loss at C = 2") {
    const std::vector<double> a = {1.0, 0.0, 0.5};
    const std::vector<double> b = {0.0, 1.0, -0.5};
    const PrototypeSet protos = set_from({a, a, b, b}, {true, true, true, true});
    CHECK(std::abs(prototype_alignment_loss(protos, 0.5).value()) < 1e-12);
}

TEST_CASE("hand-computed orthogonal prototype case") {
    // cos(p0,p2) = 1, cos(p0,p3) = cos(p1,p2) = 0, cos(p1,p3) = 1, tau = 0.5:
    // every term is log(e^2 / e^0) = 2, so the loss is -8.
    const std::vector<double> e1 = {1.0, 0.0, 0.0};
    const std::vector<double> e2 = {0.0, 1.0, 0.0};
    const PrototypeSet protos = set_from({e1, e2, e1, e2}, {true, true, true, true});
    CHECK(prototype_alignment_loss(protos, 0.5).value() == doctest::Approx(-8.0).epsilon(1e-12));
}

TEST_CASE("alignment loss matches the scalar oracle on random prototype sets") {
    Rng rng(47);
    for (int c : {2, 3, 5}) {
        for (int rep = 0; rep < 34; ++rep) {
            std::vector<std::vector<double>> protos;
            std::vector<bool> present;
            for (int k = 0; k < 2 * c; ++k) {
                protos.push_back(testutil::random_values(4, rng));
                present.push_back(rep % 3 == 0 ? rng.uniform() > 0.25 : true);
            }
            const double tau = rng.uniform(0.2, 2.0);
            const Tensor loss = prototype_alignment_loss(set_from(protos, present), tau);
            CHECK(loss.value() ==
                  doctest::Approx(alignment_oracle(protos, present, tau)).epsilon(1e-10));
        }
    }
}

TEST_CASE("include_positive_pair switches to the standard denominator") {
    Rng rng(48);
    std::vector<std::vector<double>> protos;
    for (int k = 0; k < 6; ++k) protos.push_back(testutil::random_values(4, rng));
    const std::vector<bool> all(6, true);
    const Tensor loss = prototype_alignment_loss(set_from(protos, all), 0.5, true);
    CHECK(loss.value() ==
          doctest::Approx(alignment_oracle(protos, all, 0.5, true)).epsilon(1e-10));
    // with the positive pair in the denominator every log-ratio is <= 0
    CHECK(loss.value() >= 0.0);
}

TEST_CASE("fewer than two complete pairs yields exactly zero") {
    Rng rng(49);
    std::vector<std::vector<double>> protos;
    for (int k = 0; k < 6; ++k) protos.push_back(testutil::random_values(4, rng));
    CHECK(prototype_alignment_loss(set_from(protos, {true, true, true, false, false, false}),
                                   0.5)
              .value() == 0.0);
    CHECK(prototype_alignment_loss(set_from(protos, {true, false, false, true, true, false}),
                                   0.5)
              .value() == 0.0);
}

TEST_CASE("tau must be positive") {
    PrototypeSet protos(4);
    CHECK_THROWS_AS(prototype_alignment_loss(protos, 0.0), ConfigError);
}

TEST_CASE("loss decreases as the positive-pair cosine rises, all else fixed") {
    auto loss_at = [](double cos_theta) {
        const double sin_theta = std::sqrt(1.0 - cos_theta * cos_theta);
        const std::vector<double> p0 = {1, 0, 0};
        const std::vector<double> p1 = {0, 1, 0};
        const std::vector<double> p2 = {cos_theta, 0, sin_theta};  // cos(p0,p2) = cos_theta
        const std::vector<double> p3 = {0, 1, 0};
        return prototype_alignment_loss(set_from({p0, p1, p2, p3}, {true, true, true, true}),
                                        0.5)
            .value();
    };
    CHECK(loss_at(0.9) < loss_at(0.5));
    CHECK(loss_at(0.5) < loss_at(0.1));
}

TEST_CASE("gradient flows into the encoder through both prototype paths") {
    Rng rng(50);
    EncoderParams enc = make_encoder({3, 4, 3}, rng);
    const auto labeled = random_labeled(8, 3, 2, rng);
    std::vector<UnlabeledExample> unlabeled;
    PseudoLabelStore store;
    for (std::size_t i = 0; i < 8; ++i) {
        unlabeled.push_back({testutil::random_values(3, rng), i});
        std::vector<double> probs(4, 0.0);
        probs[2 + rng.uniform_index(2)] = 0.9;
        double rest = 0.1 / 3.0;
        for (double& p : probs)
            if (p == 0.0) p = rest;
        store.insert(i, ExtendedLabel{probs});
    }
    std::vector<std::size_t> batch = {0, 1, 2, 3, 4, 5, 6, 7};
    auto loss_fn = [&] {
        PrototypeSet protos = labeled_prototypes(enc, labeled, batch, 2);
        protos.merge(unlabeled_prototypes(enc, unlabeled, batch, store, 0.5, 2));
        return prototype_alignment_loss(protos, 0.5);
    };
    std::vector<Tensor*> params = enc.parameters();
    const auto result = testutil::check_gradients(params, loss_fn);
    CHECK(result.max_rel_error <= 1e-4);
    // the loss actually depends on the encoder
    bool any_nonzero = false;
    for (Tensor* p : params)
        for (double g : p->grad_buffer())
            if (g != 0.0) any_nonzero = true;
    CHECK(any_nonzero);
}

TEST_CASE("cosine matrix dump covers all slots") {
    Rng rng(51);
    std::vector<std::vector<double>> protos;
    for (int k = 0; k < 4; ++k) protos.push_back(testutil::random_values(3, rng));
    std::ostringstream os;
    set_from(protos, {true, true, false, true}).dump_cosine_csv(os);
    const std::string text = os.str();
    CHECK(text.find("class,p0,p1,p2,p3") == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

}  // TEST_SUITE
