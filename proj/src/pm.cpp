#include "mml/pm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <json.hpp>

#include "mml/stats.hpp"

namespace mml::pm {

void PatternSet::validate() const {
    if (patterns.empty()) throw ShapeError("PatternSet: empty");
    for (const auto& p : patterns)
        if (p.size() != patterns[0].size()) throw ShapeError("PatternSet: ragged patterns");
    if (weights.size() != patterns.size())
        throw ShapeError("PatternSet: one weight per pattern");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ShapeError("PatternSet: negative weight");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ShapeError("PatternSet: weights must sum to 1");
}

PatternSet PatternSet::uniform(std::vector<std::vector<double>> patterns) {
    PatternSet set;
    set.weights.assign(patterns.size(), 1.0 / static_cast<double>(patterns.size()));
    set.patterns = std::move(patterns);
    return set;
}

PatternSet PatternSet::eight_level_scalar() {
    std::vector<std::vector<double>> pats;
    for (int k = 0; k < 8; ++k) pats.push_back({(2.0 * k + 1.0) / 16.0});
    return uniform(std::move(pats));
}

PMSystem PMSystem::create(std::size_t input_dim, const PMOptions& options,
                          std::uint64_t seed) {
    if (options.code_units == 0) throw ConfigError("PMSystem: need at least one code unit");
    PMSystem sys;
    sys.options = options;
    sys.encoder_spec = nets::NetworkSpec::mlp({input_dim, options.encoder_hidden,
                                               options.code_units},
                                              nets::Activation::Tanh,
                                              nets::Activation::Sigmoid);
    sys.encoder = nets::init(sys.encoder_spec, derive_stream(seed, "pm.encoder"));
    for (std::size_t i = 0; i < options.code_units; ++i) {
        sys.predictor_specs.push_back(nets::NetworkSpec::mlp(
            {options.code_units - 1, options.predictor_hidden, 1}, nets::Activation::Tanh,
            nets::Activation::Sigmoid));
        sys.predictors.push_back(nets::init(sys.predictor_specs[i],
                                            derive_stream(seed, "pm.predictor." +
                                                                    std::to_string(i))));
    }
    return sys;
}

CodeVector evaluate(const PMSystem& system, std::span<const double> pattern) {
    CodeVector cv;
    cv.y = nets::forward_net(system.encoder_spec, system.encoder, pattern);
    const std::size_t m = system.code_units();
    cv.predictions.resize(m);
    std::vector<double> others(m - 1);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < m; ++j)
            if (j != i) others[k++] = cv.y[j];
        cv.predictions[i] =
            nets::forward_net(system.predictor_specs[i], system.predictors[i], others)[0];
    }
    return cv;
}

namespace {

std::vector<double> flatten_predictors(const PMSystem& system) {
    std::vector<double> flat;
    for (const auto& p : system.predictors)
        flat.insert(flat.end(), p.values.begin(), p.values.end());
    return flat;
}

void unflatten_predictors(PMSystem& system, std::span<const double> flat) {
    std::size_t offset = 0;
    for (auto& p : system.predictors) {
        std::copy_n(flat.begin() + offset, p.values.size(), p.values.begin());
        offset += p.values.size();
    }
}

// Builds the shared objective: predictors (block a) vs encoder (block b).
// Gradients flow from each p_i back through the predictor weights into the
// code and on into the encoder; which block moves is the engine's business.
ad::NodeId build_pm_objective(ad::Tape& tape, const PMSystem& system,
                              const PatternSet& data,
                              std::span<const ad::NodeId> pred_leaves,
                              std::span<const ad::NodeId> enc_leaves) {
    const std::size_t m = system.code_units();

    std::vector<std::span<const ad::NodeId>> per_predictor;
    std::size_t offset = 0;
    for (const auto& p : system.predictors) {
        per_predictor.push_back(pred_leaves.subspan(offset, p.values.size()));
        offset += p.values.size();
    }

    ad::NodeId acc = tape.constant(0.0);
    std::vector<std::vector<ad::NodeId>> codes(data.size());
    for (std::size_t pat = 0; pat < data.size(); ++pat) {
        const auto enc =
            nets::build_graph(tape, system.encoder_spec, enc_leaves, data.patterns[pat], {});
        const auto& y = enc.outputs();
        codes[pat] = y;
        ad::NodeId pattern_sum = tape.constant(0.0);
        std::vector<ad::NodeId> others(m - 1);
        for (std::size_t i = 0; i < m; ++i) {
            std::size_t k = 0;
            for (std::size_t j = 0; j < m; ++j)
                if (j != i) others[k++] = y[j];
            const auto pred = nets::build_graph_on(tape, system.predictor_specs[i],
                                                   per_predictor[i], others, {});
            const ad::NodeId diff = tape.sub(y[i], pred.outputs()[0]);
            pattern_sum = tape.add(pattern_sum, tape.mul(diff, diff));
        }
        acc = tape.add(acc, tape.mul(tape.constant(data.weights[pat]), pattern_sum));
    }
    ad::NodeId loss = tape.mul(acc, tape.constant(1.0 / static_cast<double>(m)));

    if (system.options.variance_bonus != 0.0) {
        // encoder-only term: lambda * mean_i Var(y_i); predictor gradients
        // do not touch it, so the game stays zero-sum
        ad::NodeId var_sum = tape.constant(0.0);
        for (std::size_t i = 0; i < m; ++i) {
            ad::NodeId mean = tape.constant(0.0);
            ad::NodeId second = tape.constant(0.0);
            for (std::size_t pat = 0; pat < data.size(); ++pat) {
                const ad::NodeId w = tape.constant(data.weights[pat]);
                mean = tape.add(mean, tape.mul(w, codes[pat][i]));
                second = tape.add(second, tape.mul(w, tape.mul(codes[pat][i], codes[pat][i])));
            }
            var_sum = tape.add(var_sum, tape.sub(second, tape.mul(mean, mean)));
        }
        const ad::NodeId bonus = tape.mul(
            tape.constant(system.options.variance_bonus / static_cast<double>(m)), var_sum);
        loss = tape.add(loss, bonus);
    }
    return loss;
}

engine::Objective make_objective(const PMSystem& system, const PatternSet& data) {
    return [&system, &data](ad::Tape& tape, std::span<const ad::NodeId> a,
                            std::span<const ad::NodeId> b, engine::StepContext&) {
        return build_pm_objective(tape, system, data, a, b);
    };
}

}  // namespace

double pm_objective(const PMSystem& system, const PatternSet& data) {
    data.validate();
    ad::Tape tape;
    const auto pred = flatten_predictors(system);
    std::vector<ad::NodeId> pa, pb;
    for (double v : pred) pa.push_back(tape.leaf(v));
    for (double v : system.encoder.values) pb.push_back(tape.leaf(v));
    return tape.value(build_pm_objective(tape, system, data, pa, pb));
}

engine::GameConfig pm_default_game() {
    engine::GameConfig game;
    game.schedule = engine::Schedule::Alternating;
    game.k_min = 1;
    game.k_max = 1;
    game.minimizer.lr.base = 0.5;   // predictors track the moving code
    game.maximizer.lr.base = 0.1;   // encoder moves five times slower
    game.minimizer.optimizer = ad::OptimizerKind::SgdMomentum;
    game.minimizer.momentum = 0.5;
    game.maximizer.optimizer = ad::OptimizerKind::SgdMomentum;
    game.maximizer.momentum = 0.5;
    game.max_steps = 40000;
    return game;
}

engine::GameTrace pm_train(PMSystem& system, const PatternSet& data,
                           engine::GameConfig game, std::uint64_t steps,
                           std::uint64_t seed) {
    data.validate();
    if (data.dim() != system.input_dim())
        throw ShapeError("pm_train: pattern dimension does not match the encoder");
    game.max_steps = steps;
    auto res = engine::play(game, make_objective(system, data), flatten_predictors(system),
                            system.encoder.values, seed);
    unflatten_predictors(system, res.a);
    system.encoder.values = std::move(res.b);
    return std::move(res.trace);
}

std::pair<double, double> pm_equilibrium_residual(const PMSystem& system,
                                                  const PatternSet& data) {
    return engine::equilibrium_residual(make_objective(system, data),
                                        flatten_predictors(system), system.encoder.values);
}

CodeStatistics code_statistics(const PMSystem& system, const PatternSet& data) {
    data.validate();
    const std::size_t m = system.code_units();
    CodeStatistics st;
    st.marginals.assign(m, 0.0);
    st.unit_variance.assign(m, 0.0);
    st.mean_predictions.assign(m, 0.0);
    st.pairwise_cov.assign(m, std::vector<double>(m, 0.0));

    std::vector<std::vector<int>> codewords(data.size());
    std::vector<double> bit_mean(m, 0.0);
    std::vector<double> second(m, 0.0);

    for (std::size_t pat = 0; pat < data.size(); ++pat) {
        const double w = data.weights[pat];
        const CodeVector cv = evaluate(system, data.patterns[pat]);
        codewords[pat].resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double y = cv.y[i];
            const int bit = y > 0.5 ? 1 : 0;
            codewords[pat][i] = bit;
            st.binarity += w * std::abs(y - std::round(y)) / static_cast<double>(m);
            st.marginals[i] += w * y;
            second[i] += w * y * y;
            st.mean_predictions[i] += w * cv.predictions[i];
            bit_mean[i] += w * bit;
        }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                st.pairwise_cov[i][j] += w * codewords[pat][i] * codewords[pat][j];
    }
    for (std::size_t i = 0; i < m; ++i) {
        st.unit_variance[i] = second[i] - st.marginals[i] * st.marginals[i];
        for (std::size_t j = 0; j < m; ++j)
            st.pairwise_cov[i][j] -= bit_mean[i] * bit_mean[j];
    }
    st.total_correlation = stats::total_correlation(codewords, data.weights);

    std::map<std::vector<int>, int> seen;
    for (const auto& cw : codewords) ++seen[cw];
    st.distinct_codewords = seen.size();
    return st;
}

void write_json(std::ostream& os, const CodeStatistics& st) {
    nlohmann::json j;
    j["binarity"] = st.binarity;
    j["marginals"] = st.marginals;
    j["pairwise_cov"] = st.pairwise_cov;
    j["total_correlation"] = st.total_correlation;
    j["distinct_codewords"] = st.distinct_codewords;
    j["unit_variance"] = st.unit_variance;
    j["mean_predictions"] = st.mean_predictions;
    os << j.dump(2) << '\n';
}

bool factorial_certified(const CodeStatistics& st, std::size_t expected_codewords,
                         const FactorialThresholds& t) {
    if (st.binarity >= t.binarity) return false;
    if (st.distinct_codewords != expected_codewords) return false;
    if (st.total_correlation >= t.total_correlation) return false;
    for (double p : st.marginals)
        if (p < t.marginal_low || p > t.marginal_high) return false;
    return true;
}

UnconditionalProbability unconditional_probability(const PMSystem& system,
                                                   std::size_t unit,
                                                   const PatternSet& data, bool force,
                                                   const FactorialThresholds& thresholds) {
    if (unit >= system.code_units())
        throw ShapeError("unconditional_probability: unit index out of range");
    const CodeStatistics st = code_statistics(system, data);
    const bool binary = st.binarity < thresholds.binarity;
    const bool independent = st.total_correlation < thresholds.total_correlation;
    if (!(binary && independent)) {
        if (!force)
            throw NotFactorialError(
                "unconditional_probability: code is not a certified binary factorial code "
                "(binarity " +
                std::to_string(st.binarity) + ", total correlation " +
                std::to_string(st.total_correlation) + "); pass force to read anyway");
        return {st.mean_predictions[unit], true};
    }
    return {st.mean_predictions[unit], false};
}

double reconstruction_error(const PMSystem& system, const PatternSet& data) {
    if (!system.decoder) throw StateError("reconstruction_error: no decoder trained");
    double err = 0.0;
    for (std::size_t pat = 0; pat < data.size(); ++pat) {
        const CodeVector cv = evaluate(system, data.patterns[pat]);
        const auto rec = nets::forward_net(*system.decoder_spec, *system.decoder, cv.y);
        double d = 0.0;
        for (std::size_t k = 0; k < rec.size(); ++k) {
            const double e = rec[k] - data.patterns[pat][k];
            d += e * e;
        }
        err += data.weights[pat] * d;
    }
    return err;
}

double train_decoder(PMSystem& system, const PatternSet& data, std::uint64_t steps,
                     std::uint64_t seed, const DecoderOptions& options) {
    data.validate();
    const std::size_t m = system.code_units();
    system.decoder_spec = nets::NetworkSpec::mlp({m, options.hidden, data.dim()},
                                                 nets::Activation::Tanh,
                                                 nets::Activation::Linear);
    system.decoder = nets::init(*system.decoder_spec, derive_stream(seed, "pm.decoder"));

    // encoder frozen: codes are plain numbers here
    std::vector<std::vector<double>> codes(data.size());
    for (std::size_t pat = 0; pat < data.size(); ++pat)
        codes[pat] = evaluate(system, data.patterns[pat]).y;

    ad::Optimizer opt(ad::OptimizerKind::Sgd, options.learning_rate);
    std::vector<double> grads(system.decoder->values.size());
    double last = 0.0;
    for (std::uint64_t it = 0; it < steps; ++it) {
        ad::Tape tape;
        const auto leaves = nets::param_leaves(tape, *system.decoder);
        ad::NodeId loss = tape.constant(0.0);
        for (std::size_t pat = 0; pat < data.size(); ++pat) {
            const auto g =
                nets::build_graph(tape, *system.decoder_spec, leaves, codes[pat], {});
            ad::NodeId sq = tape.constant(0.0);
            for (std::size_t k = 0; k < data.dim(); ++k) {
                const ad::NodeId d =
                    tape.sub(g.outputs()[k], tape.constant(data.patterns[pat][k]));
                sq = tape.add(sq, tape.mul(d, d));
            }
            loss = tape.add(loss, tape.mul(tape.constant(data.weights[pat]), sq));
        }
        tape.backward(loss);
        for (std::size_t k = 0; k < leaves.size(); ++k) grads[k] = tape.grad(leaves[k]);
        opt.step(system.decoder->values, grads);
        last = tape.value(loss);
    }
    return last;
}

std::vector<std::vector<double>> sample_generative(const PMSystem& system,
                                                   const PatternSet& data,
                                                   std::size_t count, Rng& rng,
                                                   bool force) {
    if (!system.decoder) throw StateError("sample_generative: train a decoder first");
    const std::size_t m = system.code_units();
    std::vector<double> probs(m);
    for (std::size_t i = 0; i < m; ++i)
        probs[i] = unconditional_probability(system, i, data, force).value;

    std::vector<std::vector<double>> samples;
    samples.reserve(count);
    std::vector<double> bits(m);
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t i = 0; i < m; ++i) bits[i] = rng.bernoulli(probs[i]) ? 1.0 : 0.0;
        samples.push_back(nets::forward_net(*system.decoder_spec, *system.decoder, bits));
    }
    return samples;
}

}  // namespace mml::pm
