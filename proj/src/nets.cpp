#include "mml/nets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace mml::nets {

std::size_t NetworkSpec::gaussian_units(std::size_t layer) const {
    std::size_t n = 0;
    for (const auto& g : gaussian)
        if (g.layer == layer) n += g.count;
    return n;
}

std::size_t NetworkSpec::effective_width(std::size_t layer) const {
    if (layer == 0) return layer_sizes[0];
    return layer_sizes[layer] - gaussian_units(layer) / 2;
}

std::size_t NetworkSpec::parameter_count() const {
    std::size_t total = 0;
    for (std::size_t l = 1; l < layer_sizes.size(); ++l)
        total += (effective_width(l - 1) + 1) * layer_sizes[l];
    return total;
}

std::size_t NetworkSpec::noise_slot_count() const {
    std::size_t n = input_noise;
    for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
        if (has_hidden_noise(l)) n += layer_sizes[l];
        n += gaussian_units(l) / 2;
    }
    return n;
}

bool NetworkSpec::has_hidden_noise(std::size_t layer) const {
    return std::find(hidden_noise_layers.begin(), hidden_noise_layers.end(), layer) !=
           hidden_noise_layers.end();
}

void NetworkSpec::validate() const {
    if (layer_sizes.size() < 2) throw ConfigError("NetworkSpec: need at least two layers");
    if (activations.size() != layer_sizes.size() - 1)
        throw ConfigError("NetworkSpec: one activation per non-input layer");
    for (std::size_t l = 1; l < layer_sizes.size(); ++l)
        if (layer_sizes[l] == 0) throw ConfigError("NetworkSpec: empty layer");
    if (input_noise > layer_sizes[0])
        throw ConfigError("NetworkSpec: input noise wider than the input layer");
    for (std::size_t l : hidden_noise_layers)
        if (l == 0 || l >= layer_sizes.size())
            throw ConfigError("NetworkSpec: hidden noise on a non-existent layer");
    for (const auto& g : gaussian) {
        if (g.layer == 0 || g.layer >= layer_sizes.size())
            throw ConfigError("NetworkSpec: gaussian range on a non-existent layer");
        if (g.count == 0 || g.count % 2 != 0)
            throw ConfigError("NetworkSpec: gaussian range must cover an even, positive unit count");
        if (g.first_unit + g.count > layer_sizes[g.layer])
            throw ConfigError("NetworkSpec: gaussian range exceeds layer width");
    }
    for (std::size_t i = 0; i < gaussian.size(); ++i)
        for (std::size_t j = i + 1; j < gaussian.size(); ++j) {
            const auto& a = gaussian[i];
            const auto& b = gaussian[j];
            if (a.layer != b.layer) continue;
            const bool overlap = a.first_unit < b.first_unit + b.count &&
                                 b.first_unit < a.first_unit + a.count;
            if (overlap) throw ConfigError("NetworkSpec: overlapping gaussian ranges");
        }
}

NetworkSpec NetworkSpec::mlp(std::vector<std::size_t> sizes, Activation hidden,
                             Activation output) {
    NetworkSpec spec;
    spec.layer_sizes = std::move(sizes);
    spec.activations.assign(spec.layer_sizes.size() - 1, hidden);
    spec.activations.back() = output;
    return spec;
}

ParameterSet init(const NetworkSpec& spec, std::uint64_t seed, InitScheme scheme) {
    spec.validate();
    ParameterSet out;
    out.values.reserve(spec.parameter_count());
    Rng rng(seed);
    for (std::size_t l = 1; l < spec.layers(); ++l) {
        const std::size_t fan_in = spec.effective_width(l - 1);
        const std::size_t fan_out = spec.layer_sizes[l];
        ParameterSet::LayerSlice slice;
        slice.weights = out.values.size();
        slice.rows = fan_out;
        slice.cols = fan_in;
        const double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
        for (std::size_t i = 0; i < fan_out * fan_in; ++i) {
            if (scheme == InitScheme::UniformFanIn)
                out.values.push_back(rng.uniform(-bound, bound));
            else
                out.values.push_back(rng.normal() * bound);
        }
        slice.biases = out.values.size();
        for (std::size_t i = 0; i < fan_out; ++i) out.values.push_back(0.0);
        out.layers.push_back(slice);
    }
    return out;
}

std::vector<ad::NodeId> param_leaves(ad::Tape& tape, const ParameterSet& params) {
    std::vector<ad::NodeId> ids;
    ids.reserve(params.values.size());
    for (double v : params.values) ids.push_back(tape.leaf(v));
    return ids;
}

namespace {

ad::NodeId apply_activation(ad::Tape& tape, Activation act, ad::NodeId x) {
    switch (act) {
        case Activation::Tanh: return tape.tanh(x);
        case Activation::Sigmoid: return tape.sigmoid(x);
        case Activation::Relu: return tape.relu(x);
        case Activation::Linear: return x;
    }
    throw StateError("unknown activation");
}

}  // namespace

NetGraph build_graph(ad::Tape& tape, const NetworkSpec& spec,
                     std::span<const ad::NodeId> params,
                     std::span<const double> input, std::span<const double> noise) {
    if (input.size() != spec.input_dim())
        throw ShapeError("build_graph: input length mismatch");
    std::vector<ad::NodeId> input_nodes;
    input_nodes.reserve(input.size());
    for (double v : input) input_nodes.push_back(tape.leaf(v));
    return build_graph_on(tape, spec, params, input_nodes, noise);
}

NetGraph build_graph_on(ad::Tape& tape, const NetworkSpec& spec,
                        std::span<const ad::NodeId> params,
                        std::span<const ad::NodeId> input_nodes,
                        std::span<const double> noise) {
    spec.validate();
    if (params.size() != spec.parameter_count())
        throw ShapeError("build_graph: parameter leaf count mismatch");
    if (input_nodes.size() != spec.input_dim())
        throw ShapeError("build_graph: input length mismatch");
    if (noise.size() != spec.noise_slot_count())
        throw ShapeError("build_graph: noise length mismatch");

    NetGraph g;
    g.params.assign(params.begin(), params.end());

    std::size_t noise_cursor = 0;
    std::vector<ad::NodeId> current;
    current.reserve(spec.layer_sizes[0]);
    for (ad::NodeId id : input_nodes) {
        g.inputs.push_back(id);
        current.push_back(id);
    }
    for (std::size_t i = 0; i < spec.input_noise; ++i) {
        const ad::NodeId id = tape.leaf(noise[noise_cursor++]);
        g.noise.push_back(id);
        current.push_back(id);
    }
    g.layer_outputs.push_back(current);

    std::size_t offset = 0;
    for (std::size_t l = 1; l < spec.layers(); ++l) {
        const std::size_t fan_in = current.size();
        const std::size_t fan_out = spec.layer_sizes[l];
        const bool noisy = spec.has_hidden_noise(l);

        std::vector<ad::NodeId> pre(fan_out);
        for (std::size_t j = 0; j < fan_out; ++j) {
            ad::NodeId acc = params[offset + fan_out * fan_in + j];  // bias
            for (std::size_t i = 0; i < fan_in; ++i)
                acc = tape.add(acc, tape.mul(params[offset + j * fan_in + i], current[i]));
            if (noisy) {
                const ad::NodeId e = tape.leaf(noise[noise_cursor + j]);
                g.noise.push_back(e);
                acc = tape.add(acc, e);
            }
            pre[j] = acc;
        }
        if (noisy) noise_cursor += fan_out;
        offset += fan_out * fan_in + fan_out;

        // mark gaussian pairs: unit -> role (0 none, 1 mean, 2 logvar)
        std::vector<std::uint8_t> role(fan_out, 0);
        std::vector<GaussianRange> ranges;
        for (const auto& r : spec.gaussian)
            if (r.layer == l) ranges.push_back(r);
        std::sort(ranges.begin(), ranges.end(),
                  [](const GaussianRange& a, const GaussianRange& b) {
                      return a.first_unit < b.first_unit;
                  });
        for (const auto& r : ranges)
            for (std::size_t u = 0; u < r.count; u += 2) {
                role[r.first_unit + u] = 1;
                role[r.first_unit + u + 1] = 2;
            }

        std::vector<ad::NodeId> post;
        post.reserve(spec.effective_width(l));
        for (std::size_t j = 0; j < fan_out; ++j) {
            if (role[j] == 2) continue;  // consumed by its mean partner
            if (role[j] == 1) {
                // m + exp(s/2) * e, gradients flow to both m and s
                const ad::NodeId m = pre[j];
                const ad::NodeId s = pre[j + 1];
                const ad::NodeId e = tape.leaf(noise[noise_cursor++]);
                g.noise.push_back(e);
                const ad::NodeId sigma = tape.exp(tape.mul(tape.constant(0.5), s));
                post.push_back(tape.add(m, tape.mul(sigma, e)));
            } else {
                post.push_back(apply_activation(tape, spec.activations[l - 1], pre[j]));
            }
        }
        g.layer_outputs.push_back(post);
        current = std::move(post);
    }
    return g;
}

std::vector<double> forward_net(const NetworkSpec& spec, const ParameterSet& params,
                                std::span<const double> input,
                                std::span<const double> noise) {
    ad::Tape tape;
    const auto leaves = param_leaves(tape, params);
    const NetGraph g = build_graph(tape, spec, leaves, input, noise);
    std::vector<double> out;
    out.reserve(g.outputs().size());
    for (ad::NodeId id : g.outputs()) out.push_back(tape.value(id));
    return out;
}

std::vector<double> draw_noise(const NetworkSpec& spec, Rng& rng) {
    std::vector<double> noise(spec.noise_slot_count());
    for (double& e : noise)
        e = spec.noise_kind == NoiseKind::Uniform ? rng.uniform(-1.0, 1.0) : rng.normal();
    return noise;
}

std::vector<double> sample_forward(const NetworkSpec& spec, const ParameterSet& params,
                                   std::span<const double> input, Rng& rng) {
    const auto noise = draw_noise(spec, rng);
    return forward_net(spec, params, input, noise);
}

namespace {

nlohmann::json spec_to_json(const NetworkSpec& spec) {
    nlohmann::json j;
    j["layer_sizes"] = spec.layer_sizes;
    std::vector<std::string> acts;
    for (Activation a : spec.activations) {
        switch (a) {
            case Activation::Tanh: acts.push_back("tanh"); break;
            case Activation::Sigmoid: acts.push_back("sigmoid"); break;
            case Activation::Relu: acts.push_back("relu"); break;
            case Activation::Linear: acts.push_back("linear"); break;
        }
    }
    j["activations"] = acts;
    j["input_noise"] = spec.input_noise;
    j["hidden_noise_layers"] = spec.hidden_noise_layers;
    nlohmann::json ranges = nlohmann::json::array();
    for (const auto& r : spec.gaussian)
        ranges.push_back({{"layer", r.layer}, {"first_unit", r.first_unit}, {"count", r.count}});
    j["gaussian"] = ranges;
    j["noise_kind"] = spec.noise_kind == NoiseKind::Uniform ? "uniform" : "normal";
    return j;
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
    NetworkSpec spec;
    spec.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    for (const auto& s : j.at("activations")) {
        const std::string name = s.get<std::string>();
        if (name == "tanh") spec.activations.push_back(Activation::Tanh);
        else if (name == "sigmoid") spec.activations.push_back(Activation::Sigmoid);
        else if (name == "relu") spec.activations.push_back(Activation::Relu);
        else if (name == "linear") spec.activations.push_back(Activation::Linear);
        else throw ConfigError("unknown activation '" + name + "'");
    }
    spec.input_noise = j.at("input_noise").get<std::size_t>();
    spec.hidden_noise_layers = j.at("hidden_noise_layers").get<std::vector<std::size_t>>();
    for (const auto& r : j.at("gaussian")) {
        GaussianRange range;
        range.layer = r.at("layer").get<std::size_t>();
        range.first_unit = r.at("first_unit").get<std::size_t>();
        range.count = r.at("count").get<std::size_t>();
        spec.gaussian.push_back(range);
    }
    spec.noise_kind = j.at("noise_kind").get<std::string>() == "uniform" ? NoiseKind::Uniform
                                                                         : NoiseKind::Normal;
    return spec;
}

}  // namespace

void save_parameters(std::ostream& os, const NetworkSpec& spec,
                     const ParameterSet& params, std::uint64_t seed) {
    nlohmann::json header;
    header["spec"] = spec_to_json(spec);
    header["seed"] = seed;
    header["count"] = params.values.size();
    os << header.dump() << '\n';
    for (double v : params.values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        unsigned char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
        os.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

LoadedParameters load_parameters(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw StateError("load_parameters: missing header");
    const nlohmann::json header = nlohmann::json::parse(line);
    LoadedParameters out;
    out.spec = spec_from_json(header.at("spec"));
    out.seed = header.at("seed").get<std::uint64_t>();
    const std::size_t count = header.at("count").get<std::size_t>();
    if (count != out.spec.parameter_count())
        throw ShapeError("load_parameters: count does not match spec");
    // rebuild slices from the spec, then read the raw values
    out.params = init(out.spec, out.seed);
    out.params.values.clear();
    out.params.values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        unsigned char bytes[8];
        is.read(reinterpret_cast<char*>(bytes), 8);
        if (!is) throw StateError("load_parameters: truncated value block");
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
        double v;
        std::memcpy(&v, &bits, sizeof v);
        out.params.values.push_back(v);
    }
    return out;
}

}  // namespace mml::nets
