#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mml/autodiff.hpp"
#include "mml/rng.hpp"

namespace mml::nets {

enum class Activation { Tanh, Sigmoid, Relu, Linear };
enum class NoiseKind { Uniform, Normal };  // uniform[-1,1] or standard normal
enum class InitScheme { UniformFanIn, NormalScaled };

// A contiguous run of pre-activation units interpreted as (mean, log-variance)
// pairs. Each pair collapses to one stochastic output m + exp(s/2)*e, where e
// is an externally supplied noise scalar; no activation is applied to the
// pair's pre-activations. `count` is the number of pre-activation units and
// must be even.
struct GaussianRange {
    std::size_t layer = 0;  // 1-based layer index (0 is the input layer)
    std::size_t first_unit = 0;
    std::size_t count = 0;
};

// Layer sizes count pre-activation units. layer_sizes[0] is the full input
// width including any input noise: forward_net expects a user input of length
// layer_sizes[0] - input_noise and appends the noise to it. Hidden noise is
// added to the pre-activations of the listed layers. A layer's effective
// output width is its size minus half the gaussian units in it, and the next
// layer's fan-in is that effective width.
struct NetworkSpec {
    std::vector<std::size_t> layer_sizes;
    std::vector<Activation> activations;  // one per non-input layer
    std::size_t input_noise = 0;
    std::vector<std::size_t> hidden_noise_layers;
    std::vector<GaussianRange> gaussian;
    NoiseKind noise_kind = NoiseKind::Uniform;

    std::size_t layers() const { return layer_sizes.size(); }
    std::size_t gaussian_units(std::size_t layer) const;
    std::size_t effective_width(std::size_t layer) const;
    std::size_t input_dim() const { return layer_sizes.front() - input_noise; }
    std::size_t output_dim() const { return effective_width(layer_sizes.size() - 1); }
    std::size_t parameter_count() const;
    std::size_t noise_slot_count() const;
    bool has_hidden_noise(std::size_t layer) const;
    void validate() const;

    static NetworkSpec mlp(std::vector<std::size_t> sizes, Activation hidden,
                           Activation output);
};

// Flat parameter storage: for each non-input layer, the weight matrix
// (row-major, fan_out x fan_in) followed by the biases.
struct ParameterSet {
    std::vector<double> values;

    struct LayerSlice {
        std::size_t weights;  // offset
        std::size_t biases;   // offset
        std::size_t rows;     // fan_out
        std::size_t cols;     // fan_in
    };
    std::vector<LayerSlice> layers;

    std::size_t size() const { return values.size(); }
};

ParameterSet init(const NetworkSpec& spec, std::uint64_t seed,
                  InitScheme scheme = InitScheme::UniformFanIn);

// Graph of one network instance on a tape. Parameter leaves may be shared
// across instances (batch samples) by passing them to build_graph.
struct NetGraph {
    std::vector<ad::NodeId> params;
    std::vector<ad::NodeId> inputs;
    std::vector<ad::NodeId> noise;
    std::vector<std::vector<ad::NodeId>> layer_outputs;  // effective outputs per layer
    const std::vector<ad::NodeId>& outputs() const { return layer_outputs.back(); }
};

// Creates parameter leaves bound to `params` values.
std::vector<ad::NodeId> param_leaves(ad::Tape& tape, const ParameterSet& params);

// Builds the forward graph with the given (shared) parameter leaves; input and
// noise values become fresh bound leaves.
NetGraph build_graph(ad::Tape& tape, const NetworkSpec& spec,
                     std::span<const ad::NodeId> params,
                     std::span<const double> input, std::span<const double> noise);

// Same, but wires existing tape nodes as the inputs (for composing networks:
// gradients flow through the feeding graph).
NetGraph build_graph_on(ad::Tape& tape, const NetworkSpec& spec,
                        std::span<const ad::NodeId> params,
                        std::span<const ad::NodeId> input_nodes,
                        std::span<const double> noise);

// Plain evaluation. Noise must be supplied iff the spec has noise slots.
std::vector<double> forward_net(const NetworkSpec& spec, const ParameterSet& params,
                                std::span<const double> input,
                                std::span<const double> noise = {});

// Draws all noise slots from the spec's distribution and evaluates.
std::vector<double> sample_forward(const NetworkSpec& spec, const ParameterSet& params,
                                   std::span<const double> input, Rng& rng);

std::vector<double> draw_noise(const NetworkSpec& spec, Rng& rng);

// Flat little-endian float64 array with a one-line JSON header
// {"spec": ..., "seed": ..., "count": ...}.
void save_parameters(std::ostream& os, const NetworkSpec& spec,
                     const ParameterSet& params, std::uint64_t seed);
struct LoadedParameters {
    NetworkSpec spec;
    ParameterSet params;
    std::uint64_t seed;
};
LoadedParameters load_parameters(std::istream& is);

}  // namespace mml::nets
