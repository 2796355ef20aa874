#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "convbench/autodiff.hpp"
#include "convbench/convlstm.hpp"

namespace convbench {

enum class NetworkKind { Autoencoder, Unet, UnetSmall, ConvLstmUnet };

NetworkKind network_kind_from_string(const std::string& name);
std::string to_string(NetworkKind kind);

/// Declarative architecture description. All four kinds share the conv /
/// pool trunk geometry; seq_len and hidden_channels only matter for
/// ConvLstmUnet. The output head is always a sigmoid so predictions live
/// in (0,1) like the normalized fields.
struct NetworkSpec {
    NetworkKind kind = NetworkKind::Autoencoder;
    int in_channels = 3; // u_x, u_y, T
    int base_channels = 16;
    int depth = 3;
    int kernel = 3;
    int pool = 2;
    int seq_len = 5;
    int hidden_channels = 16;

    static NetworkSpec defaults(NetworkKind kind);
    void validate() const;
    bool operator==(const NetworkSpec&) const = default;
};

/// An instantiated architecture: ordered Parameters plus the forward wiring
/// for its kind. Encoder stages are conv(k)+relu followed by max pooling;
/// decoders mirror with stride-`pool` transposed convolutions. UNet kinds
/// concatenate each encoder stage's pre-pool features onto the matching
/// decoder stage and merge with a conv. ConvLstmUnet runs a ConvLSTM over
/// the input window and feeds the final hidden state into the UNet trunk.
///
/// Training requires exclusive access; concurrent forward passes on a frozen
/// network are safe (parameters are only read).
class Network {
public:
    Network() = default;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    /// Deterministic build: weights uniform in +-sqrt(1/fan_in) drawn from
    /// `seed`, biases zero (ConvLSTM forget bias 1.0).
    static Network build(const NetworkSpec& spec, std::uint64_t seed);

    const NetworkSpec& spec() const { return spec_; }
    std::vector<Parameter*> parameters();
    std::int64_t parameter_count() const;

    Var forward_on_tape(Tape& tape, Var x, bool zero_skips = false);
    Var forward_sequence_on_tape(Tape& tape, const std::vector<Var>& xs);

    /// Single-frame kinds only. `zero_skips` replaces UNet skip inputs with
    /// zeros (diagnostic knob for checking the connections are live).
    Tensor forward_single(const Tensor& x, bool zero_skips = false);
    /// ConvLstmUnet only; xs.size() must equal spec().seq_len.
    Tensor forward_sequence(const std::vector<Tensor>& xs);

    /// NCKP checkpoint: magic "NCKP", u32 version, the spec fields, then
    /// every parameter as (u32 id length, id bytes, u32 rank, u64 extents,
    /// f64 values), all little-endian. Round-trips bit-exactly.
    void save(std::ostream& os) const;
    void save_file(const std::string& path) const;
    static Network load(std::istream& is);
    static Network load_file(const std::string& path);

private:
    struct ConvLayer {
        std::unique_ptr<Parameter> w;
        std::unique_ptr<Parameter> b;
    };

    Var trunk_forward(Tape& tape, Var x, bool zero_skips);
    std::vector<const Parameter*> parameters_const() const;
    int channels(int stage) const;

    NetworkSpec spec_;
    std::vector<ConvLayer> enc_;
    std::vector<ConvLayer> up_;    // transposed conv upsamplers, deepest first
    std::vector<ConvLayer> merge_; // unet merge convs, deepest first
    ConvLayer head_;
    std::optional<ConvLSTMWeights> lstm_;
};

} // namespace convbench
