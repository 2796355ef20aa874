#include "convbench/network.hpp"

#include <fstream>

#include "convbench/binio.hpp"
#include "convbench/rng.hpp"

namespace convbench {
namespace {

constexpr char kMagic[4] = {'N', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

Tensor uniform_tensor(Shape shape, double bound, std::uint64_t& rng_state) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) {
        t[i] = next_uniform(rng_state, bound);
    }
    return t;
}

std::uint32_t kind_code(NetworkKind kind) {
    switch (kind) {
    case NetworkKind::Autoencoder: return 0;
    case NetworkKind::Unet: return 1;
    case NetworkKind::UnetSmall: return 2;
    case NetworkKind::ConvLstmUnet: return 3;
    }
    return 0;
}

NetworkKind kind_from_code(std::uint32_t code) {
    switch (code) {
    case 0: return NetworkKind::Autoencoder;
    case 1: return NetworkKind::Unet;
    case 2: return NetworkKind::UnetSmall;
    case 3: return NetworkKind::ConvLstmUnet;
    default: throw IoError("unknown network kind code " + std::to_string(code));
    }
}

} // namespace

NetworkKind network_kind_from_string(const std::string& name) {
    if (name == "autoencoder") {
        return NetworkKind::Autoencoder;
    }
    if (name == "unet") {
        return NetworkKind::Unet;
    }
    if (name == "unet_small") {
        return NetworkKind::UnetSmall;
    }
    if (name == "convlstm_unet") {
        return NetworkKind::ConvLstmUnet;
    }
    throw ConfigError("model", "unknown model '" + name +
                                   "' (expected autoencoder|unet|unet_small|convlstm_unet)");
}

std::string to_string(NetworkKind kind) {
    switch (kind) {
    case NetworkKind::Autoencoder: return "autoencoder";
    case NetworkKind::Unet: return "unet";
    case NetworkKind::UnetSmall: return "unet_small";
    case NetworkKind::ConvLstmUnet: return "convlstm_unet";
    }
    return "?";
}

NetworkSpec NetworkSpec::defaults(NetworkKind kind) {
    NetworkSpec s;
    s.kind = kind;
    if (kind == NetworkKind::UnetSmall) {
        s.depth = 2;
    }
    return s;
}

void NetworkSpec::validate() const {
    if (in_channels < 1) {
        throw ConfigError("in_channels", "must be >= 1");
    }
    if (base_channels < 1) {
        throw ConfigError("base_channels", "must be >= 1");
    }
    if (depth < 1) {
        throw ConfigError("depth", "must be >= 1");
    }
    if (kernel < 1 || kernel % 2 == 0) {
        throw ConfigError("kernel", "must be odd and >= 1 for same-size convolutions");
    }
    if (pool < 2) {
        throw ConfigError("pool", "must be >= 2");
    }
    if (seq_len < 1) {
        throw ConfigError("seq_len", "must be >= 1");
    }
    if (hidden_channels < 1) {
        throw ConfigError("hidden_channels", "must be >= 1");
    }
}

int Network::channels(int stage) const {
    return spec_.base_channels << stage;
}

Network Network::build(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Network net;
    net.spec_ = spec;
    std::uint64_t rng = seed;
    const int k = spec.kernel;
    const bool has_skips = spec.kind != NetworkKind::Autoencoder;

    if (spec.kind == NetworkKind::ConvLstmUnet) {
        net.lstm_ = ConvLSTMWeights::init(spec.in_channels, spec.hidden_channels, k, rng, "lstm.");
    }
    const int trunk_in =
        spec.kind == NetworkKind::ConvLstmUnet ? spec.hidden_channels : spec.in_channels;

    auto conv_layer = [&](const std::string& id, int ci, int co, int kh, int kw) {
        ConvLayer layer;
        const double bound = std::sqrt(1.0 / (static_cast<double>(ci) * kh * kw));
        layer.w = std::make_unique<Parameter>(id + ".w",
                                              uniform_tensor({co, ci, kh, kw}, bound, rng));
        layer.b = std::make_unique<Parameter>(id + ".b", Tensor({co}));
        return layer;
    };
    auto tconv_layer = [&](const std::string& id, int ci, int co, int kk) {
        ConvLayer layer;
        const double bound = std::sqrt(1.0 / (static_cast<double>(ci) * kk * kk));
        layer.w = std::make_unique<Parameter>(id + ".w",
                                              uniform_tensor({ci, co, kk, kk}, bound, rng));
        layer.b = std::make_unique<Parameter>(id + ".b", Tensor({co}));
        return layer;
    };

    int cur = trunk_in;
    for (int i = 0; i < spec.depth; ++i) {
        net.enc_.push_back(conv_layer("enc" + std::to_string(i), cur, net.channels(i), k, k));
        cur = net.channels(i);
    }
    for (int s = spec.depth - 1; s >= 0; --s) {
        int out_ch;
        if (has_skips) {
            out_ch = net.channels(s);
        } else {
            out_ch = s > 0 ? net.channels(s - 1) : net.channels(0);
        }
        net.up_.push_back(tconv_layer("up" + std::to_string(s), cur, out_ch, spec.pool));
        cur = out_ch;
        if (has_skips) {
            net.merge_.push_back(
                conv_layer("merge" + std::to_string(s), 2 * cur, net.channels(s), k, k));
            cur = net.channels(s);
        }
    }
    net.head_ = conv_layer("head", cur, spec.in_channels, k, k);
    return net;
}

std::vector<Parameter*> Network::parameters() {
    std::vector<Parameter*> out;
    if (lstm_) {
        for (Parameter* p : lstm_->parameters()) {
            out.push_back(p);
        }
    }
    auto push_layers = [&](std::vector<ConvLayer>& layers) {
        for (ConvLayer& l : layers) {
            out.push_back(l.w.get());
            out.push_back(l.b.get());
        }
    };
    push_layers(enc_);
    // decoder stages interleave upsample and merge in execution order
    for (std::size_t j = 0; j < up_.size(); ++j) {
        out.push_back(up_[j].w.get());
        out.push_back(up_[j].b.get());
        if (j < merge_.size()) {
            out.push_back(merge_[j].w.get());
            out.push_back(merge_[j].b.get());
        }
    }
    out.push_back(head_.w.get());
    out.push_back(head_.b.get());
    return out;
}

std::vector<const Parameter*> Network::parameters_const() const {
    auto* self = const_cast<Network*>(this);
    std::vector<Parameter*> mut = self->parameters();
    return {mut.begin(), mut.end()};
}

std::int64_t Network::parameter_count() const {
    std::int64_t n = 0;
    for (const Parameter* p : parameters_const()) {
        n += p->value().size();
    }
    return n;
}

Var Network::trunk_forward(Tape& tape, Var x, bool zero_skips) {
    const Tensor& xv = tape.value(x);
    if (xv.rank() != 3) {
        throw DimensionError("network input must be [C,H,W]");
    }
    int denom = 1;
    for (int i = 0; i < spec_.depth; ++i) {
        denom *= spec_.pool;
    }
    if (xv.extent(1) % denom != 0 || xv.extent(2) % denom != 0) {
        throw DimensionError("input spatial dims " + shape_str(xv.shape()) +
                             " not divisible by pool^depth = " + std::to_string(denom));
    }
    const int pad = spec_.kernel / 2;
    const bool has_skips = spec_.kind != NetworkKind::Autoencoder;

    std::vector<Var> skips;
    Var cur = x;
    for (int i = 0; i < spec_.depth; ++i) {
        Var f = tape.activation(
            tape.conv2d(cur, tape.param(*enc_[i].w), tape.param(*enc_[i].b), 1, pad),
            Activation::Relu);
        if (has_skips) {
            skips.push_back(f);
        }
        cur = tape.max_pool2d(f, spec_.pool);
    }
    for (std::size_t j = 0; j < up_.size(); ++j) {
        const int stage = spec_.depth - 1 - static_cast<int>(j);
        Var upped = tape.add_channel_bias(
            tape.transposed_conv2d(cur, tape.param(*up_[j].w), spec_.pool, 0),
            tape.param(*up_[j].b));
        cur = tape.activation(upped, Activation::Relu);
        if (has_skips) {
            Var skip = skips[static_cast<std::size_t>(stage)];
            if (zero_skips) {
                skip = tape.leaf(Tensor(tape.value(skip).shape()));
            }
            Var cat = tape.concat_channels(cur, skip);
            cur = tape.activation(
                tape.conv2d(cat, tape.param(*merge_[j].w), tape.param(*merge_[j].b), 1, pad),
                Activation::Relu);
        }
    }
    return tape.activation(
        tape.conv2d(cur, tape.param(*head_.w), tape.param(*head_.b), 1, pad),
        Activation::Sigmoid);
}

Var Network::forward_on_tape(Tape& tape, Var x, bool zero_skips) {
    if (spec_.kind == NetworkKind::ConvLstmUnet) {
        throw UsageError("forward_on_tape: ConvLstmUnet takes a sequence, use "
                         "forward_sequence_on_tape");
    }
    const Tensor& xv = tape.value(x);
    if (xv.rank() != 3 || xv.extent(0) != spec_.in_channels) {
        throw DimensionError("network input must be [" + std::to_string(spec_.in_channels) +
                             ",H,W], got " + shape_str(xv.shape()));
    }
    return trunk_forward(tape, x, zero_skips);
}

Var Network::forward_sequence_on_tape(Tape& tape, const std::vector<Var>& xs) {
    if (spec_.kind != NetworkKind::ConvLstmUnet) {
        throw UsageError("forward_sequence_on_tape requires a ConvLstmUnet network");
    }
    if (static_cast<int>(xs.size()) != spec_.seq_len) {
        throw DimensionError("sequence length " + std::to_string(xs.size()) +
                             " != seq_len " + std::to_string(spec_.seq_len));
    }
    for (Var v : xs) {
        const Tensor& f = tape.value(v);
        if (f.rank() != 3 || f.extent(0) != spec_.in_channels) {
            throw DimensionError("sequence frames must be [" +
                                 std::to_string(spec_.in_channels) + ",H,W]");
        }
    }
    // the hidden state h_t is the cell's exposed output and what the trunk
    // consumes; the memory cell C stays internal to the rollout
    ConvLSTMStateVar state = convlstm_rollout(tape, xs, *lstm_);
    return trunk_forward(tape, state.h, false);
}

Tensor Network::forward_single(const Tensor& x, bool zero_skips) {
    Tape tape;
    return tape.value(forward_on_tape(tape, tape.leaf(x), zero_skips));
}

Tensor Network::forward_sequence(const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(xs.size());
    for (const Tensor& t : xs) {
        vars.push_back(tape.leaf(t));
    }
    return tape.value(forward_sequence_on_tape(tape, vars));
}

void Network::save(std::ostream& os) const {
    binio::put_magic(os, kMagic);
    binio::put_u32(os, kVersion);
    binio::put_u32(os, kind_code(spec_.kind));
    binio::put_u32(os, static_cast<std::uint32_t>(spec_.in_channels));
    binio::put_u32(os, static_cast<std::uint32_t>(spec_.base_channels));
    binio::put_u32(os, static_cast<std::uint32_t>(spec_.depth));
    binio::put_u32(os, static_cast<std::uint32_t>(spec_.kernel));
    binio::put_u32(os, static_cast<std::uint32_t>(spec_.pool));
    binio::put_u32(os, static_cast<std::uint32_t>(spec_.seq_len));
    binio::put_u32(os, static_cast<std::uint32_t>(spec_.hidden_channels));
    binio::put_u32(os, 0); // output activation: sigmoid
    const auto params = parameters_const();
    binio::put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
        const std::string& id = p->id();
        binio::put_u32(os, static_cast<std::uint32_t>(id.size()));
        os.write(id.data(), static_cast<std::streamsize>(id.size()));
        const Tensor& v = p->value();
        binio::put_u32(os, static_cast<std::uint32_t>(v.rank()));
        for (int a = 0; a < v.rank(); ++a) {
            binio::put_u64(os, static_cast<std::uint64_t>(v.extent(a)));
        }
        for (std::int64_t i = 0; i < v.size(); ++i) {
            binio::put_f64(os, v[i]);
        }
    }
    if (!os) {
        throw IoError("failed writing NCKP stream");
    }
}

void Network::save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open " + path + " for writing");
    }
    save(os);
}

Network Network::load(std::istream& is) {
    binio::expect_magic(is, kMagic, "NCKP");
    const std::uint32_t version = binio::get_u32(is);
    if (version != kVersion) {
        throw IoError("unsupported NCKP version " + std::to_string(version));
    }
    NetworkSpec spec;
    spec.kind = kind_from_code(binio::get_u32(is));
    spec.in_channels = static_cast<int>(binio::get_u32(is));
    spec.base_channels = static_cast<int>(binio::get_u32(is));
    spec.depth = static_cast<int>(binio::get_u32(is));
    spec.kernel = static_cast<int>(binio::get_u32(is));
    spec.pool = static_cast<int>(binio::get_u32(is));
    spec.seq_len = static_cast<int>(binio::get_u32(is));
    spec.hidden_channels = static_cast<int>(binio::get_u32(is));
    if (binio::get_u32(is) != 0) {
        throw IoError("unsupported output activation code");
    }
    Network net = build(spec, 0);
    auto params = net.parameters();
    const std::uint32_t n = binio::get_u32(is);
    if (n != params.size()) {
        throw IoError("NCKP parameter count mismatch");
    }
    for (Parameter* p : params) {
        const std::uint32_t len = binio::get_u32(is);
        std::string id(len, '\0');
        if (!is.read(id.data(), static_cast<std::streamsize>(len))) {
            throw IoError("unexpected end of NCKP stream");
        }
        if (id != p->id()) {
            throw IoError("NCKP parameter order mismatch: expected " + p->id() + ", got " + id);
        }
        const std::uint32_t rank = binio::get_u32(is);
        Shape shape(rank);
        for (std::uint32_t a = 0; a < rank; ++a) {
            shape[a] = static_cast<int>(binio::get_u64(is));
        }
        if (shape != p->value().shape()) {
            throw IoError("NCKP shape mismatch for " + id);
        }
        for (std::int64_t i = 0; i < p->value().size(); ++i) {
            p->value()[i] = binio::get_f64(is);
        }
    }
    return net;
}

Network Network::load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path);
    }
    return load(is);
}

} // namespace convbench
