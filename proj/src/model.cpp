#include "unihssl/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "unihssl/errors.hpp"

namespace unihssl {

namespace {

std::vector<double> glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = rng.uniform(-bound, bound);
    return w;
}

}  // namespace

std::vector<Tensor*> EncoderParams::parameters() {
    std::vector<Tensor*> out;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out.push_back(&weights[i]);
        out.push_back(&biases[i]);
    }
    return out;
}

std::vector<Tensor*> HeadParams::parameters() { return {&weight, &bias}; }

EncoderParams make_encoder(const std::vector<std::size_t>& layer_dims, Rng& rng) {
    if (layer_dims.size() < 2)
        throw ConfigError("encoder needs at least input and embedding dimensions");
    for (std::size_t d : layer_dims)
        if (d == 0) throw ConfigError("encoder layer width must be >= 1");
    EncoderParams enc;
    enc.layer_dims = layer_dims;
    for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
        enc.weights.push_back(Tensor::parameter({layer_dims[i], layer_dims[i + 1]},
                                                glorot_uniform(layer_dims[i], layer_dims[i + 1], rng)));
        enc.biases.push_back(Tensor::parameter({layer_dims[i + 1]},
                                               std::vector<double>(layer_dims[i + 1], 0.0)));
    }
    return enc;
}

HeadParams make_head(std::size_t embed_dim, std::size_t out_classes, Rng& rng) {
    HeadParams head;
    head.weight = Tensor::parameter({embed_dim, out_classes},
                                    glorot_uniform(embed_dim, out_classes, rng));
    head.bias = Tensor::parameter({out_classes}, std::vector<double>(out_classes, 0.0));
    return head;
}

EncoderParams clone(const EncoderParams& enc) {
    EncoderParams out;
    out.layer_dims = enc.layer_dims;
    for (std::size_t i = 0; i < enc.weights.size(); ++i) {
        out.weights.push_back(Tensor::parameter(enc.weights[i].shape(), enc.weights[i].values()));
        out.biases.push_back(Tensor::parameter(enc.biases[i].shape(), enc.biases[i].values()));
    }
    return out;
}

HeadParams clone(const HeadParams& head) {
    HeadParams out;
    out.weight = Tensor::parameter(head.weight.shape(), head.weight.values());
    out.bias = Tensor::parameter(head.bias.shape(), head.bias.values());
    return out;
}

Tensor encode(const EncoderParams& enc, const Tensor& x) {
    if (x.cols() != enc.input_dim())
        throw ndgrad::DimensionError("encode: input has " + std::to_string(x.cols()) +
                                     " features, encoder expects " +
                                     std::to_string(enc.input_dim()));
    Tensor h = x;
    for (std::size_t i = 0; i < enc.weights.size(); ++i) {
        if (i > 0) h = relu(h);
        h = add_rowvec(matmul(h, enc.weights[i]), enc.biases[i]);
    }
    return h;
}

Tensor classify(const HeadParams& head, const Tensor& z) {
    if (z.cols() != head.embed_dim())
        throw ndgrad::DimensionError("classify: embedding width " + std::to_string(z.cols()) +
                                     " does not match head input " +
                                     std::to_string(head.embed_dim()));
    return softmax_rows(add_rowvec(matmul(z, head.weight), head.bias));
}

HeadParams init_2c_from_pretrained(const HeadParams& g_head, std::uint64_t seed) {
    const std::size_t embed = g_head.embed_dim();
    const std::size_t c = g_head.out_classes();
    Rng rng(seed, /*stream=*/0x2c);
    HeadParams h = make_head(embed, 2 * c, rng);
    auto& w = h.weight.mutable_values();
    const auto& gw = g_head.weight.values();
    for (std::size_t i = 0; i < embed; ++i)
        for (std::size_t j = 0; j < c; ++j) w[i * 2 * c + j] = gw[i * c + j];
    auto& b = h.bias.mutable_values();
    const auto& gb = g_head.bias.values();
    for (std::size_t j = 0; j < c; ++j) b[j] = gb[j];
    return h;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr char kMagic[8] = {'U', 'H', 'S', 'S', 'L', 'C', 'K', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

std::uint64_t read_u64(std::istream& in) {
    char buf[8];
    in.read(buf, 8);
    if (!in) throw ValidationError("checkpoint: truncated stream");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
    write_u64(out, v.size());
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        write_u64(out, bits);
    }
}

std::vector<double> read_doubles(std::istream& in) {
    const std::uint64_t n = read_u64(in);
    std::vector<double> v(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t bits = read_u64(in);
        std::memcpy(&v[i], &bits, 8);
    }
    return v;
}

}  // namespace

void save_checkpoint(std::ostream& out, const EncoderParams& enc, const HeadParams& head) {
    out.write(kMagic, 8);
    write_u64(out, enc.layer_dims.size());
    for (std::size_t d : enc.layer_dims) write_u64(out, d);
    for (std::size_t i = 0; i < enc.weights.size(); ++i) {
        write_doubles(out, enc.weights[i].values());
        write_doubles(out, enc.biases[i].values());
    }
    write_u64(out, head.embed_dim());
    write_u64(out, head.out_classes());
    write_doubles(out, head.weight.values());
    write_doubles(out, head.bias.values());
    if (!out) throw ValidationError("checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const EncoderParams& enc, const HeadParams& head) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("checkpoint: cannot open " + path + " for writing");
    save_checkpoint(out, enc, head);
}

std::pair<EncoderParams, HeadParams> load_checkpoint(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw ValidationError("checkpoint: bad magic (wrong file or version)");
    EncoderParams enc;
    const std::uint64_t n_dims = read_u64(in);
    for (std::uint64_t i = 0; i < n_dims; ++i)
        enc.layer_dims.push_back(static_cast<std::size_t>(read_u64(in)));
    if (enc.layer_dims.size() < 2) throw ValidationError("checkpoint: malformed layer dims");
    for (std::size_t i = 0; i + 1 < enc.layer_dims.size(); ++i) {
        enc.weights.push_back(Tensor::parameter({enc.layer_dims[i], enc.layer_dims[i + 1]},
                                                read_doubles(in)));
        enc.biases.push_back(Tensor::parameter({enc.layer_dims[i + 1]}, read_doubles(in)));
    }
    const std::size_t embed = static_cast<std::size_t>(read_u64(in));
    const std::size_t out_classes = static_cast<std::size_t>(read_u64(in));
    HeadParams head;
    head.weight = Tensor::parameter({embed, out_classes}, read_doubles(in));
    head.bias = Tensor::parameter({out_classes}, read_doubles(in));
    return {std::move(enc), std::move(head)};
}

std::pair<EncoderParams, HeadParams> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("checkpoint: cannot open " + path);
    return load_checkpoint(in);
}

}  // namespace unihssl
