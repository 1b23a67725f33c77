#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mml/nets.hpp"

using namespace mml;
using namespace mml::nets;

TEST_CASE("parameter counting: 2-3-1 has 13 parameters") {
    const auto spec = NetworkSpec::mlp({2, 3, 1}, Activation::Tanh, Activation::Sigmoid);
    CHECK(spec.parameter_count() == 13);
    const auto params = init(spec, 5);
    CHECK(params.values.size() == 13);
}

TEST_CASE("init is deterministic given the seed") {
    const auto spec = NetworkSpec::mlp({4, 6, 2}, Activation::Tanh, Activation::Linear);
    const auto a = init(spec, 123);
    const auto b = init(spec, 123);
    const auto c = init(spec, 124);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
}

TEST_CASE("uniform fan-in init: fan_in 4 stays within [-0.5, 0.5] and centers near 0") {
    // 10^4 draws of a fan_in=4 layer
    NetworkSpec spec = NetworkSpec::mlp({4, 100, 1}, Activation::Tanh, Activation::Linear);
    double max_abs = 0.0, sum = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const auto p = init(spec, seed);
        const auto& slice = p.layers[0];
        for (std::size_t i = 0; i < slice.rows * slice.cols; ++i) {
            const double w = p.values[slice.weights + i];
            max_abs = std::max(max_abs, std::abs(w));
            sum += w;
            ++n;
        }
    }
    CHECK(n == 10000);
    CHECK(max_abs <= 0.5);
    CHECK(std::abs(sum / static_cast<double>(n)) < 0.01);
}

TEST_CASE("biases start at zero") {
    const auto spec = NetworkSpec::mlp({3, 4, 2}, Activation::Relu, Activation::Linear);
    const auto p = init(spec, 9);
    for (const auto& slice : p.layers)
        for (std::size_t i = 0; i < slice.rows; ++i) CHECK(p.values[slice.biases + i] == 0.0);
}

namespace {

// 1 input, one layer of a single gaussian pair: output = m + exp(s/2)*e with
// m = w0*x + b0, s = w1*x + b1.
NetworkSpec gaussian_pair_spec() {
    NetworkSpec spec;
    spec.layer_sizes = {1, 2};
    spec.activations = {Activation::Linear};
    spec.gaussian = {{1, 0, 2}};
    spec.noise_kind = NoiseKind::Normal;
    return spec;
}

ParameterSet manual_params(const NetworkSpec& spec, std::vector<double> values) {
    ParameterSet p = init(spec, 0);
    p.values = std::move(values);
    return p;
}

}  // namespace

TEST_CASE("gaussian unit follows m + exp(s/2)*e") {
    const auto spec = gaussian_pair_spec();
    CHECK(spec.noise_slot_count() == 1);
    CHECK(spec.output_dim() == 1);
    // weights: w_m=0, w_s=0; biases: b_m=0.2, b_s=0
    const auto p = manual_params(spec, {0.0, 0.0, 0.2, 0.0});
    const double e = 1.5;
    const auto out = forward_net(spec, p, std::vector<double>{0.3}, std::vector<double>{e});
    CHECK(out[0] == doctest::Approx(1.7).epsilon(1e-15));
}

TEST_CASE("gaussian unit with log-variance -50 collapses to its mean") {
    const auto spec = gaussian_pair_spec();
    const auto p = manual_params(spec, {0.4, 0.0, 0.1, -50.0});
    for (double e : {-3.0, 0.0, 2.5}) {
        const auto out =
            forward_net(spec, p, std::vector<double>{1.0}, std::vector<double>{e});
        CHECK(std::abs(out[0] - 0.5) < 1e-9);
    }
}

TEST_CASE("gradient w.r.t. log-variance: d/ds[e*exp(s/2)] = 1 at s=0, e=2") {
    const auto spec = gaussian_pair_spec();
    const auto p = manual_params(spec, {0.0, 0.0, 0.0, 0.0});  // m=0, s=0
    ad::Tape tape;
    const auto leaves = param_leaves(tape, p);
    const auto g = build_graph(tape, spec, leaves, std::vector<double>{0.0},
                               std::vector<double>{2.0});
    tape.backward(g.outputs()[0]);
    // bias of the log-variance unit is parameter index 3
    CHECK(tape.grad(leaves[3]) == doctest::Approx(1.0).epsilon(1e-12));

    // cross-check against central differences on the same parameter
    const double eps = 1e-6;
    auto plus = p, minus = p;
    plus.values[3] += eps;
    minus.values[3] -= eps;
    const double f_plus =
        forward_net(spec, plus, std::vector<double>{0.0}, std::vector<double>{2.0})[0];
    const double f_minus =
        forward_net(spec, minus, std::vector<double>{0.0}, std::vector<double>{2.0})[0];
    const double fd = (f_plus - f_minus) / (2 * eps);
    CHECK(std::abs(tape.grad(leaves[3]) - fd) < 1e-5);
}

TEST_CASE("reparameterized net passes grad_check under fixed noise") {
    NetworkSpec spec;
    spec.layer_sizes = {2, 6, 3};
    spec.activations = {Activation::Tanh, Activation::Linear};
    spec.gaussian = {{2, 0, 2}};
    spec.input_noise = 1;
    spec.hidden_noise_layers = {1};
    spec.validate();

    const auto p = init(spec, 31);
    Rng rng(7);
    const auto noise = draw_noise(spec, rng);
    const std::vector<double> input{0.3};  // input_dim = 2 - 1

    // finite differences across all parameters
    ad::Tape tape;
    const auto leaves = param_leaves(tape, p);
    const auto g = build_graph(tape, spec, leaves, input, noise);
    // scalar head: sum of outputs
    ad::NodeId sum = g.outputs()[0];
    for (std::size_t i = 1; i < g.outputs().size(); ++i) sum = tape.add(sum, g.outputs()[i]);
    tape.backward(sum);

    const double eps = 1e-5;
    double worst = 0.0;
    for (std::size_t k = 0; k < p.values.size(); ++k) {
        auto plus = p, minus = p;
        plus.values[k] += eps;
        minus.values[k] -= eps;
        const auto f_plus = forward_net(spec, plus, input, noise);
        const auto f_minus = forward_net(spec, minus, input, noise);
        double fp = 0.0, fm = 0.0;
        for (double v : f_plus) fp += v;
        for (double v : f_minus) fm += v;
        const double fd = (fp - fm) / (2 * eps);
        const double rel = std::abs(tape.grad(leaves[k]) - fd) / (std::abs(fd) + 1e-12);
        worst = std::max(worst, rel);
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("noise shape errors") {
    NetworkSpec spec = NetworkSpec::mlp({2, 3, 1}, Activation::Tanh, Activation::Sigmoid);
    spec.input_noise = 1;
    const auto p = init(spec, 3);
    CHECK_THROWS_AS(forward_net(spec, p, std::vector<double>{0.5}, {}), ShapeError);
    CHECK_THROWS_AS(
        forward_net(spec, p, std::vector<double>{0.5}, std::vector<double>{0.1, 0.2}),
        ShapeError);
    // missing input element
    CHECK_THROWS_AS(forward_net(spec, p, std::vector<double>{}, std::vector<double>{0.1}),
                    ShapeError);
}

TEST_CASE("sample_forward: no noise sites means identical outputs") {
    const auto spec = NetworkSpec::mlp({2, 4, 2}, Activation::Tanh, Activation::Sigmoid);
    const auto p = init(spec, 11);
    Rng rng(5);
    const std::vector<double> x{0.2, -0.4};
    const auto a = sample_forward(spec, p, x, rng);
    const auto b = sample_forward(spec, p, x, rng);
    CHECK(a == b);
}

TEST_CASE("sample_forward: input noise makes outputs non-degenerate") {
    NetworkSpec spec = NetworkSpec::mlp({2, 6, 1}, Activation::Tanh, Activation::Linear);
    spec.input_noise = 2;  // blind generator: all input is noise
    const auto p = init(spec, 17);
    Rng rng(23);
    double mean = 0.0, sq = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double v = sample_forward(spec, p, {}, rng)[0];
        mean += v;
        sq += v * v;
    }
    mean /= n;
    const double var = sq / n - mean * mean;
    CHECK(var > 0.0);
}

TEST_CASE("hidden noise changes outputs on more than 99% of calls") {
    NetworkSpec spec = NetworkSpec::mlp({1, 8, 1}, Activation::Tanh, Activation::Linear);
    spec.hidden_noise_layers = {1};
    const auto p = init(spec, 29);
    const std::vector<double> zeros(spec.noise_slot_count(), 0.0);
    const auto base = forward_net(spec, p, std::vector<double>{0.3}, zeros);
    Rng rng(31);
    int differing = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        const auto out = sample_forward(spec, p, std::vector<double>{0.3}, rng);
        if (out[0] != base[0]) ++differing;
    }
    CHECK(differing > 990);
}

TEST_CASE("zero noise with collapsed variance equals the deterministic affine map") {
    // linear layer whose two units form a gaussian pair; with e=0 the output
    // equals the mean pre-activation computed by hand
    const auto spec = gaussian_pair_spec();
    const auto p = manual_params(spec, {0.8, 0.3, -0.1, -50.0});
    const double x = 0.7;
    const auto out = forward_net(spec, p, std::vector<double>{x}, std::vector<double>{0.0});
    const double m = 0.8 * x - 0.1;
    CHECK(std::abs(out[0] - m) < 1e-12);
}

TEST_CASE("moment matching: gaussian head fits target mean and variance") {
    // one gaussian pair driven by a constant input; analytic moments are
    // (m, exp(s)), so descend (m-mu)^2 + (exp(s)-v)^2 directly
    const auto spec = gaussian_pair_spec();
    auto p = manual_params(spec, {0.0, 0.0, 0.0, 0.0});
    const double mu = 0.7, var = 0.25;
    ad::Optimizer opt(ad::OptimizerKind::Sgd, 0.1);
    std::vector<double> grads(p.values.size(), 0.0);
    for (int it = 0; it < 4000; ++it) {
        ad::Tape tape;
        const auto leaves = param_leaves(tape, p);
        // rebuild affine heads: m = w0*x+b0, s = w1*x+b1 with x = 1
        const ad::NodeId x = tape.leaf(1.0);
        const ad::NodeId m = tape.add(tape.mul(leaves[0], x), leaves[2]);
        const ad::NodeId s = tape.add(tape.mul(leaves[1], x), leaves[3]);
        const ad::NodeId dm = tape.sub(m, tape.constant(mu));
        const ad::NodeId dv = tape.sub(tape.exp(s), tape.constant(var));
        const ad::NodeId loss = tape.add(tape.mul(dm, dm), tape.mul(dv, dv));
        tape.backward(loss);
        for (std::size_t k = 0; k < leaves.size(); ++k) grads[k] = tape.grad(leaves[k]);
        opt.step(p.values, grads);
        if (tape.value(loss) < 1e-4) break;
    }
    // final loss
    const double m = p.values[0] + p.values[2];
    const double s = p.values[1] + p.values[3];
    const double loss = (m - mu) * (m - mu) + (std::exp(s) - var) * (std::exp(s) - var);
    CHECK(loss < 1e-3);
}

TEST_CASE("save/load round-trips spec and values exactly") {
    NetworkSpec spec;
    spec.layer_sizes = {3, 5, 4};
    spec.activations = {Activation::Relu, Activation::Sigmoid};
    spec.input_noise = 1;
    spec.hidden_noise_layers = {1};
    spec.gaussian = {{2, 0, 2}};
    spec.noise_kind = NoiseKind::Normal;
    const auto p = init(spec, 404);

    std::stringstream ss;
    save_parameters(ss, spec, p, 404);
    const auto loaded = load_parameters(ss);
    CHECK(loaded.seed == 404);
    CHECK(loaded.params.values == p.values);
    CHECK(loaded.spec.layer_sizes == spec.layer_sizes);
    CHECK(loaded.spec.gaussian.size() == 1);
    CHECK(loaded.spec.noise_kind == NoiseKind::Normal);
}

TEST_CASE("spec validation rejects malformed gaussian ranges") {
    NetworkSpec spec = NetworkSpec::mlp({2, 4, 1}, Activation::Tanh, Activation::Sigmoid);
    spec.gaussian = {{1, 0, 3}};  // odd count
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.gaussian = {{1, 2, 4}};  // exceeds layer width
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.gaussian = {{1, 0, 2}, {1, 1, 2}};  // overlap
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.gaussian = {{3, 0, 2}};  // no such layer
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("zero-input layers are bias-only (m=1 predictor support)") {
    const auto spec = NetworkSpec::mlp({0, 3, 1}, Activation::Tanh, Activation::Sigmoid);
    CHECK(spec.parameter_count() == 3 + 4);  // (0+1)*3 + (3+1)*1
    const auto p = init(spec, 2);
    const auto out = forward_net(spec, p, {}, {});
    CHECK(out.size() == 1);
    CHECK(out[0] == 0.5);  // all-zero biases -> sigmoid(0)
}
