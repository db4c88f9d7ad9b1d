#include <doctest.h>

#include <sstream>

#include "testutil.hpp"
#include "unihssl/model.hpp"

using namespace unihssl;

namespace {

EncoderParams manual_encoder(std::vector<std::size_t> dims,
                             std::vector<std::vector<double>> weights,
                             std::vector<std::vector<double>> biases) {
    EncoderParams enc;
    enc.layer_dims = dims;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        enc.weights.push_back(Tensor::parameter({dims[i], dims[i + 1]}, std::move(weights[i])));
        enc.biases.push_back(Tensor::parameter({dims[i + 1]}, std::move(biases[i])));
    }
    return enc;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("zero weights and biases give a zero embedding") {
    EncoderParams enc = manual_encoder({3, 2}, {std::vector<double>(6, 0.0)},
                                       {std::vector<double>(2, 0.0)});
    const Tensor z = encode(enc, Tensor::from_rows({{1.5, -2.0, 0.25}}));
    CHECK(z.at(0, 0) == 0.0);
    CHECK(z.at(0, 1) == 0.0);
}

TEST_CASE("identity single-layer encoder reproduces its input") {
    EncoderParams enc =
        manual_encoder({2, 2}, {{1, 0, 0, 1}}, {std::vector<double>(2, 0.0)});
    const Tensor x = Tensor::from_rows({{-1.25, 3.5}, {0.0, 7.0}});
    const Tensor z = encode(enc, x);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(z.at(i, j) == x.at(i, j));
}

TEST_CASE("random one-hidden-layer net matches the loop-forward oracle") {
    Rng rng(11);
    EncoderParams enc = make_encoder({4, 6, 3}, rng);
    const auto x = testutil::random_values(4, rng);
    const Tensor z = encode(enc, Tensor::from_rows({x}));
    const auto expected = testutil::mlp_forward_oracle(
        {enc.weights[0].values(), enc.weights[1].values()},
        {enc.biases[0].values(), enc.biases[1].values()}, {4, 6, 3}, x);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(z.at(0, j) == doctest::Approx(expected[j]).epsilon(1e-12));
}

TEST_CASE("encode rejects a feature-width mismatch") {
    Rng rng(12);
    EncoderParams enc = make_encoder({4, 3}, rng);
    CHECK_THROWS_AS(encode(enc, Tensor::zeros({2, 5})), ndgrad::DimensionError);
}

TEST_CASE("classify: zero logits are uniform, a dominant logit is one-hot") {
    HeadParams head;
    head.weight = Tensor::parameter({2, 4}, std::vector<double>(8, 0.0));
    head.bias = Tensor::parameter({4}, std::vector<double>(4, 0.0));
    const Tensor uniform = classify(head, Tensor::from_rows({{0.3, -0.7}}));
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(uniform.at(0, j) == doctest::Approx(0.25).epsilon(1e-15));

    head.bias = Tensor::parameter({4}, {0.0, 1000.0, 0.0, 0.0});
    const Tensor spiked = classify(head, Tensor::from_rows({{0.3, -0.7}}));
    CHECK(spiked.at(0, 1) == doctest::Approx(1.0));
    CHECK(spiked.at(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("classify matches the formula oracle and rows stay on the simplex") {
    Rng rng(14);
    HeadParams head = make_head(3, 5, rng);
    const auto zv = testutil::random_values(2 * 3, rng);
    const Tensor probs = classify(head, Tensor::from_values({2, 3}, zv));
    for (std::size_t i = 0; i < 2; ++i) {
        std::vector<double> logits(5, 0.0);
        for (std::size_t j = 0; j < 5; ++j) {
            for (std::size_t k = 0; k < 3; ++k)
                logits[j] += zv[i * 3 + k] * head.weight.at(k, j);
            logits[j] += head.bias.at(j);
        }
        const auto expected = testutil::softmax_oracle(logits);
        double row = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(probs.at(i, j) == doctest::Approx(expected[j]).epsilon(1e-12));
            row += probs.at(i, j);
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("init_2c copies the pre-trained columns verbatim") {
    Rng rng(15);
    HeadParams g = make_head(4, 3, rng);
    HeadParams h = init_2c_from_pretrained(g, 99);
    REQUIRE(h.out_classes() == 6);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(h.weight.at(i, j) == g.weight.at(i, j));
    for (std::size_t j = 0; j < 3; ++j) CHECK(h.bias.at(j) == g.bias.at(j));
}

TEST_CASE("init_2c seed contract: same seed same tail, different seed different tail") {
    Rng rng(16);
    HeadParams g = make_head(4, 3, rng);
    HeadParams h1 = init_2c_from_pretrained(g, 7);
    HeadParams h2 = init_2c_from_pretrained(g, 7);
    HeadParams h3 = init_2c_from_pretrained(g, 8);
    bool tails_differ = false;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 3; j < 6; ++j) {
            CHECK(h1.weight.at(i, j) == h2.weight.at(i, j));
            if (h1.weight.at(i, j) != h3.weight.at(i, j)) tails_differ = true;
            CHECK(h1.weight.at(i, j - 3) == h3.weight.at(i, j - 3));  // copied halves agree
        }
    CHECK(tails_differ);
}

TEST_CASE("init_2c preserves the pre-trained decision function on the first C logits") {
    Rng rng(17);
    HeadParams g = make_head(5, 4, rng);
    HeadParams h = init_2c_from_pretrained(g, 3);
    const auto zv = testutil::random_values(3 * 5, rng);
    const Tensor z = Tensor::from_values({3, 5}, zv);
    const Tensor logits_g = add_rowvec(matmul(z, g.weight), g.bias);
    const Tensor logits_h = add_rowvec(matmul(z, h.weight), h.bias);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(logits_h.at(i, j) == logits_g.at(i, j));
}

TEST_CASE("checkpoint round trip is bit-exact") {
    Rng rng(18);
    EncoderParams enc = make_encoder({6, 5, 3}, rng);
    HeadParams head = make_head(3, 8, rng);
    std::stringstream buffer;
    save_checkpoint(buffer, enc, head);
    auto [enc2, head2] = load_checkpoint(buffer);
    REQUIRE(enc2.layer_dims == enc.layer_dims);
    for (std::size_t l = 0; l < enc.weights.size(); ++l) {
        CHECK(enc2.weights[l].values() == enc.weights[l].values());
        CHECK(enc2.biases[l].values() == enc.biases[l].values());
    }
    CHECK(head2.weight.values() == head.weight.values());
    CHECK(head2.bias.values() == head.bias.values());
}

TEST_CASE("loading garbage is rejected") {
    std::stringstream buffer;
    buffer << "not a checkpoint at all, truly";
    CHECK_THROWS_AS(load_checkpoint(buffer), ValidationError);
}

TEST_CASE("clone detaches parameter storage") {
    Rng rng(19);
    EncoderParams enc = make_encoder({3, 2}, rng);
    EncoderParams copy = clone(enc);
    copy.weights[0].mutable_values()[0] += 1.0;
    CHECK(copy.weights[0].values()[0] != enc.weights[0].values()[0]);
}

}  // TEST_SUITE
