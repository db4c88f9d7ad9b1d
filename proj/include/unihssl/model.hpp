#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ndgrad/rng.hpp"
#include "ndgrad/tensor.hpp"
#include "unihssl/errors.hpp"

namespace unihssl {

using ndgrad::Rng;
using ndgrad::Tensor;

// Multi-layer perceptron feature encoder: linear layers chained along
// layer_dims with a rectifier between consecutive layers (none after the
// final, embedding layer).
struct EncoderParams {
    std::vector<std::size_t> layer_dims;  // input_dim, hidden..., embed_dim
    std::vector<Tensor> weights;          // [layer_dims[i] x layer_dims[i+1]]
    std::vector<Tensor> biases;           // [layer_dims[i+1]]

    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t embed_dim() const { return layer_dims.back(); }
    std::vector<Tensor*> parameters();
};

// Linear layer + row softmax over out_classes (C for the pre-training head,
// 2C for the joint-label-space head).
struct HeadParams {
    Tensor weight;  // [embed_dim x out_classes]
    Tensor bias;    // [out_classes]

    std::size_t embed_dim() const { return weight.rows(); }
    std::size_t out_classes() const { return weight.cols(); }
    std::vector<Tensor*> parameters();
};

// Initialization: biases zero, weights uniform in +-sqrt(6 / (fan_in + fan_out)).
EncoderParams make_encoder(const std::vector<std::size_t>& layer_dims, Rng& rng);
HeadParams make_head(std::size_t embed_dim, std::size_t out_classes, Rng& rng);

// Deep copies into fresh parameter tensors. Tensor handles share storage, so
// anything that trains a model must clone it first.
EncoderParams clone(const EncoderParams& enc);
HeadParams clone(const HeadParams& head);

// [b x input_dim] -> [b x embed_dim]
Tensor encode(const EncoderParams& enc, const Tensor& x);
// [b x embed_dim] -> [b x out_classes], rows on the simplex
Tensor classify(const HeadParams& head, const Tensor& z);

// Builds the 2C head from a pre-trained C head: weight columns and bias
// entries for the first C classes are copied verbatim (they jointly define
// the pre-trained decision function), the remaining C columns are freshly
// initialized from the standard scheme under the given seed.
HeadParams init_2c_from_pretrained(const HeadParams& g_head, std::uint64_t seed);

// Versioned little-endian binary checkpoint; round trips are bit-exact.
void save_checkpoint(std::ostream& out, const EncoderParams& enc, const HeadParams& head);
void save_checkpoint(const std::string& path, const EncoderParams& enc, const HeadParams& head);
std::pair<EncoderParams, HeadParams> load_checkpoint(std::istream& in);
std::pair<EncoderParams, HeadParams> load_checkpoint(const std::string& path);

}  // namespace unihssl
