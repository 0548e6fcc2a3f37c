#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ueba/core.hpp"
#include "ueba/rng.hpp"

namespace ueba {

enum class Activation { Tanh, Relu };

inline std::string_view to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

inline Activation activation_from(std::string_view s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw Error("unknown activation '" + std::string(s) + "'");
}

struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
    double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

struct AeTrainMeta {
    double dropout_rate = 0.0;
    double noise_sigma = 0.0;
    int early_stop_patience = 0;
    int epochs_run = 0;
    double lambda = 0.0;  // score calibration; 0 means uncalibrated
    double calibration_median = 0.0;
    std::vector<double> val_loss_history;
};

// Replicator network with a compression bottleneck. Hidden layers use the
// configured activation; the output layer is linear (targets are z-scaled
// and unbounded).
struct AutoencoderModel {
    std::vector<std::size_t> layer_sizes;  // symmetric, first == last == feature dim
    std::vector<Matrix> weights;           // weights[l]: sizes[l+1] x sizes[l]
    std::vector<std::vector<double>> biases;
    Activation activation = Activation::Tanh;
    AeTrainMeta train_meta;

    std::size_t input_dim() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }

    std::vector<double> forward(std::span<const double> x) const {
        if (x.size() != input_dim()) throw Error("autoencoder: input dimension mismatch");
        std::vector<double> a(x.begin(), x.end());
        for (std::size_t l = 0; l < weights.size(); ++l) {
            std::vector<double> z(layer_sizes[l + 1], 0.0);
            for (std::size_t r = 0; r < weights[l].rows; ++r) {
                double sum = biases[l][r];
                for (std::size_t c = 0; c < weights[l].cols; ++c) sum += weights[l].at(r, c) * a[c];
                z[r] = sum;
            }
            const bool output_layer = (l + 1 == weights.size());
            if (!output_layer) {
                for (double& v : z)
                    v = activation == Activation::Tanh ? std::tanh(v) : (v > 0.0 ? v : 0.0);
            }
            a = std::move(z);
        }
        return a;
    }
};

struct ReplicationError {
    double l2 = 0.0;
    double l1 = 0.0;
    double max_component = 0.0;
};

inline ReplicationError replication_error(const AutoencoderModel& m, std::span<const double> x) {
    const std::vector<double> out = m.forward(x);
    ReplicationError e;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = std::abs(out[i] - x[i]);
        e.l2 += d * d;
        e.l1 += d;
        e.max_component = std::max(e.max_component, d);
    }
    e.l2 = std::sqrt(e.l2);
    return e;
}

// The three distances normalized to a comparable per-component scale, then
// combined by max so that each one can dominate when it carries the signal.
inline double combined_error(const ReplicationError& e, std::size_t dim) {
    const double d = static_cast<double>(std::max<std::size_t>(dim, 1));
    return std::max({e.l2 / std::sqrt(d), e.l1 / d, e.max_component});
}

inline double squash_score(double err, double lambda) { return 1.0 - std::exp(-lambda * err); }

// Bounded incongruity in [0, 1). Bands: < 0.1 normal, > 0.5 incongruous,
// in between weak signals.
inline double incongruity_score(const AutoencoderModel& m, std::span<const double> x) {
    if (m.train_meta.lambda <= 0.0) throw Error("incongruity_score: model is not calibrated");
    return squash_score(combined_error(replication_error(m, x), m.input_dim()), m.train_meta.lambda);
}

constexpr double kNormalBand = 0.1;
constexpr double kIncongruBand = 0.5;

// --- initialization and gradients ---------------------------------------------

inline std::vector<std::size_t> default_layer_sizes(std::size_t input_dim) {
    const std::size_t h = std::max<std::size_t>(2, (2 * input_dim + 2) / 3);
    const std::size_t b = std::max<std::size_t>(1, input_dim / 3);
    return {input_dim, h, b, h, input_dim};
}

inline AutoencoderModel init_autoencoder(const std::vector<std::size_t>& layer_sizes, Activation act,
                                         std::uint64_t seed) {
    if (layer_sizes.size() < 3) throw Error("autoencoder: need at least one hidden layer");
    if (layer_sizes.front() != layer_sizes.back())
        throw Error("autoencoder: first and last layer sizes must equal the feature dimension");
    std::size_t bottleneck = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 1; i + 1 < layer_sizes.size(); ++i) bottleneck = std::min(bottleneck, layer_sizes[i]);
    if (bottleneck >= layer_sizes.front())
        throw Error("autoencoder: bottleneck must be strictly smaller than the input dimension");

    AutoencoderModel m;
    m.layer_sizes = layer_sizes;
    m.activation = act;
    Rng rng = Rng::derive(seed, "ae:init");
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        Matrix w(layer_sizes[l + 1], layer_sizes[l]);
        const double r = std::sqrt(6.0 / static_cast<double>(layer_sizes[l] + layer_sizes[l + 1]));
        for (double& v : w.a) v = rng.uniform(-r, r);
        m.weights.push_back(std::move(w));
        // small positive bias keeps relu units away from the kink at init
        m.biases.emplace_back(layer_sizes[l + 1], 0.01);
    }
    return m;
}

// Mean over the batch of 0.5*||f(x) - target||^2, with analytic gradients.
// Optional dropout masks (one per example and hidden layer) are applied in
// both passes; nullptr means no dropout.
inline double loss_and_gradients(const AutoencoderModel& m,
                                 std::span<const std::vector<double>> inputs,
                                 std::span<const std::vector<double>> targets,
                                 std::vector<Matrix>& grad_w,
                                 std::vector<std::vector<double>>& grad_b,
                                 const std::vector<std::vector<std::vector<double>>>* masks = nullptr) {
    const std::size_t layers = m.weights.size();
    grad_w.clear();
    grad_b.clear();
    for (std::size_t l = 0; l < layers; ++l) {
        grad_w.emplace_back(m.weights[l].rows, m.weights[l].cols);
        grad_b.emplace_back(m.biases[l].size(), 0.0);
    }
    double loss = 0.0;
    for (std::size_t ex = 0; ex < inputs.size(); ++ex) {
        // forward, keeping activations
        std::vector<std::vector<double>> acts{inputs[ex]};
        std::vector<std::vector<double>> zs;
        for (std::size_t l = 0; l < layers; ++l) {
            std::vector<double> z(m.layer_sizes[l + 1], 0.0);
            const auto& prev = acts.back();
            for (std::size_t r = 0; r < m.weights[l].rows; ++r) {
                double sum = m.biases[l][r];
                for (std::size_t c = 0; c < m.weights[l].cols; ++c) sum += m.weights[l].at(r, c) * prev[c];
                z[r] = sum;
            }
            zs.push_back(z);
            if (l + 1 < layers) {
                for (double& v : z) v = m.activation == Activation::Tanh ? std::tanh(v) : (v > 0.0 ? v : 0.0);
                if (masks)
                    for (std::size_t r = 0; r < z.size(); ++r) z[r] *= (*masks)[ex][l][r];
            }
            acts.push_back(std::move(z));
        }
        const auto& out = acts.back();
        std::vector<double> delta(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double d = out[i] - targets[ex][i];
            delta[i] = d;
            loss += 0.5 * d * d;
        }
        // backward
        for (std::size_t l = layers; l-- > 0;) {
            const auto& prev = acts[l];
            for (std::size_t r = 0; r < m.weights[l].rows; ++r) {
                grad_b[l][r] += delta[r];
                for (std::size_t c = 0; c < m.weights[l].cols; ++c)
                    grad_w[l].at(r, c) += delta[r] * prev[c];
            }
            if (l == 0) break;
            std::vector<double> next(m.layer_sizes[l], 0.0);
            for (std::size_t c = 0; c < m.weights[l].cols; ++c) {
                double sum = 0.0;
                for (std::size_t r = 0; r < m.weights[l].rows; ++r) sum += m.weights[l].at(r, c) * delta[r];
                next[c] = sum;
            }
            // through dropout mask, then the activation derivative
            if (masks)
                for (std::size_t c = 0; c < next.size(); ++c) next[c] *= (*masks)[ex][l - 1][c];
            for (std::size_t c = 0; c < next.size(); ++c) {
                const double z = zs[l - 1][c];
                next[c] *= m.activation == Activation::Tanh
                               ? 1.0 - std::tanh(z) * std::tanh(z)
                               : (z > 0.0 ? 1.0 : 0.0);
            }
            delta = std::move(next);
        }
    }
    const double inv = 1.0 / static_cast<double>(inputs.size());
    for (auto& g : grad_w)
        for (double& v : g.a) v *= inv;
    for (auto& g : grad_b)
        for (double& v : g) v *= inv;
    return loss * inv;
}

// --- training -----------------------------------------------------------------

struct AeHyperparams {
    std::vector<std::size_t> layer_sizes;  // empty: input -> 2/3 -> 1/3 -> mirror
    Activation activation = Activation::Tanh;
    double dropout_rate = 0.2;
    double noise_sigma = 0.1;
    int patience = 10;
    int max_epochs = 200;
    std::size_t batch_size = 64;
    double learning_rate = 0.01;
    double momentum = 0.9;
    bool lr_halving = true;
};

inline void shuffle_indices(Rng& rng, std::vector<std::size_t>& idx) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j =
            static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(idx[i - 1], idx[j]);
    }
}

namespace detail {

inline double validation_loss(const AutoencoderModel& m, std::span<const std::vector<double>> data,
                              std::span<const std::size_t> idx) {
    double loss = 0.0;
    for (std::size_t i : idx) {
        const auto out = m.forward(data[i]);
        for (std::size_t k = 0; k < out.size(); ++k) {
            const double d = out[k] - data[i][k];
            loss += 0.5 * d * d;
        }
    }
    return loss / static_cast<double>(idx.size());
}

}  // namespace detail

// Mini-batch gradient descent with momentum on the replication loss, with
// input-noise injection, inverted dropout on hidden layers and early stop on
// the validation loss. Deterministic for a fixed seed: the rng is split into
// independent streams ("ae:split", "ae:order", "ae:noise", "ae:dropout") so
// disabling noise or dropout does not shift the others.
inline AutoencoderModel train_autoencoder(const std::vector<std::vector<double>>& vectors,
                                          const AeHyperparams& hp, std::uint64_t seed,
                                          double validation_fraction) {
    if (vectors.size() < 100) throw Error("train_autoencoder: need at least 100 training vectors");
    if (!(validation_fraction > 0.0 && validation_fraction <= 0.5))
        throw Error("train_autoencoder: validation_fraction must be in (0, 0.5]");
    const std::size_t d = vectors.front().size();
    for (const auto& v : vectors)
        if (v.size() != d) throw Error("train_autoencoder: inconsistent vector dimensions");

    const auto sizes = hp.layer_sizes.empty() ? default_layer_sizes(d) : hp.layer_sizes;
    if (sizes.front() != d || sizes.back() != d)
        throw Error("train_autoencoder: layer sizes do not match the feature dimension");
    AutoencoderModel model = init_autoencoder(sizes, hp.activation, seed);
    model.train_meta.dropout_rate = hp.dropout_rate;
    model.train_meta.noise_sigma = hp.noise_sigma;
    model.train_meta.early_stop_patience = hp.patience;

    Rng r_split = Rng::derive(seed, "ae:split");
    Rng r_order = Rng::derive(seed, "ae:order");
    Rng r_noise = Rng::derive(seed, "ae:noise");
    Rng r_drop = Rng::derive(seed, "ae:dropout");

    std::vector<std::size_t> idx(vectors.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    shuffle_indices(r_split, idx);
    const std::size_t n_val =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(validation_fraction *
                                                                       static_cast<double>(idx.size()))));
    std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
    if (train.empty()) throw Error("train_autoencoder: empty training split");

    std::vector<Matrix> vel_w;
    std::vector<std::vector<double>> vel_b;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        vel_w.emplace_back(model.weights[l].rows, model.weights[l].cols);
        vel_b.emplace_back(model.biases[l].size(), 0.0);
    }

    double lr = hp.learning_rate;
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<Matrix> best_w = model.weights;
    std::vector<std::vector<double>> best_b = model.biases;
    int stall = 0;
    int epochs = 0;

    std::vector<Matrix> gw;
    std::vector<std::vector<double>> gb;
    for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
        ++epochs;
        shuffle_indices(r_order, train);
        for (std::size_t start = 0; start < train.size(); start += hp.batch_size) {
            const std::size_t stop = std::min(start + hp.batch_size, train.size());
            std::vector<std::vector<double>> inputs, targets;
            inputs.reserve(stop - start);
            targets.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                targets.push_back(vectors[train[i]]);
                std::vector<double> in = vectors[train[i]];
                if (hp.noise_sigma > 0.0)
                    for (double& x : in) x += r_noise.normal(0.0, hp.noise_sigma);
                inputs.push_back(std::move(in));
            }
            std::vector<std::vector<std::vector<double>>> masks;
            const bool use_dropout = hp.dropout_rate > 0.0;
            if (use_dropout) {
                const double keep = 1.0 - hp.dropout_rate;
                masks.resize(inputs.size());
                for (auto& per_ex : masks) {
                    per_ex.resize(model.weights.size() - 1);
                    for (std::size_t l = 0; l + 1 < model.weights.size(); ++l) {
                        per_ex[l].assign(model.layer_sizes[l + 1], 0.0);
                        for (double& mval : per_ex[l])
                            mval = r_drop.bernoulli(keep) ? 1.0 / keep : 0.0;
                    }
                }
            }
            const double loss =
                loss_and_gradients(model, inputs, targets, gw, gb, use_dropout ? &masks : nullptr);
            if (!std::isfinite(loss))
                throw Error("train_autoencoder: loss diverged (NaN) at epoch " + std::to_string(epoch + 1));
            for (std::size_t l = 0; l < model.weights.size(); ++l) {
                for (std::size_t k = 0; k < model.weights[l].a.size(); ++k) {
                    vel_w[l].a[k] = hp.momentum * vel_w[l].a[k] - lr * gw[l].a[k];
                    model.weights[l].a[k] += vel_w[l].a[k];
                }
                for (std::size_t k = 0; k < model.biases[l].size(); ++k) {
                    vel_b[l][k] = hp.momentum * vel_b[l][k] - lr * gb[l][k];
                    model.biases[l][k] += vel_b[l][k];
                }
            }
        }
        const double vloss = detail::validation_loss(model, vectors, val);
        if (!std::isfinite(vloss))
            throw Error("train_autoencoder: validation loss diverged (NaN) at epoch " +
                        std::to_string(epoch + 1));
        model.train_meta.val_loss_history.push_back(vloss);
        if (vloss < best_loss - 1e-12) {
            best_loss = vloss;
            best_w = model.weights;
            best_b = model.biases;
            stall = 0;
        } else {
            ++stall;
            if (hp.lr_halving && stall == std::max(1, hp.patience / 2)) lr *= 0.5;
        }
        if (stall >= hp.patience) break;
    }
    model.train_meta.epochs_run = epochs;
    model.weights = std::move(best_w);
    model.biases = std::move(best_b);
    return model;
}

// Fixes lambda so the median training vector scores exactly 0.05 (lower
// median for even counts).
inline void calibrate(AutoencoderModel& m, std::span<const std::vector<double>> training) {
    if (training.empty()) throw Error("calibrate: no vectors");
    std::vector<double> errs;
    errs.reserve(training.size());
    for (const auto& v : training) errs.push_back(combined_error(replication_error(m, v), m.input_dim()));
    std::sort(errs.begin(), errs.end());
    const double med = std::max(errs[(errs.size() - 1) / 2], 1e-12);
    m.train_meta.calibration_median = med;
    m.train_meta.lambda = -std::log(1.0 - 0.05) / med;
}

// --- persistence ----------------------------------------------------------------

inline nlohmann::ordered_json autoencoder_to_json(const AutoencoderModel& m) {
    nlohmann::ordered_json j;
    j["format"] = "ueba.autoencoder.v1";
    j["layer_sizes"] = m.layer_sizes;
    j["activation"] = std::string(to_string(m.activation));
    nlohmann::ordered_json ws = nlohmann::ordered_json::array();
    for (const auto& w : m.weights) ws.push_back(w.a);
    j["weights"] = std::move(ws);
    j["biases"] = m.biases;
    nlohmann::ordered_json meta;
    meta["dropout_rate"] = m.train_meta.dropout_rate;
    meta["noise_sigma"] = m.train_meta.noise_sigma;
    meta["early_stop_patience"] = m.train_meta.early_stop_patience;
    meta["epochs_run"] = m.train_meta.epochs_run;
    meta["lambda"] = m.train_meta.lambda;
    meta["calibration_median"] = m.train_meta.calibration_median;
    meta["val_loss_history"] = m.train_meta.val_loss_history;
    j["train_meta"] = std::move(meta);
    return j;
}

inline AutoencoderModel autoencoder_from_json(const nlohmann::ordered_json& j) {
    if (j.at("format") != "ueba.autoencoder.v1") throw Error("autoencoder file: unsupported format");
    AutoencoderModel m;
    m.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    m.activation = activation_from(j.at("activation").get<std::string>());
    const auto& ws = j.at("weights");
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        Matrix w(m.layer_sizes[l + 1], m.layer_sizes[l]);
        w.a = ws.at(l).get<std::vector<double>>();
        if (w.a.size() != w.rows * w.cols) throw Error("autoencoder file: weight shape mismatch");
        m.weights.push_back(std::move(w));
    }
    m.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    const auto& meta = j.at("train_meta");
    m.train_meta.dropout_rate = meta.at("dropout_rate").get<double>();
    m.train_meta.noise_sigma = meta.at("noise_sigma").get<double>();
    m.train_meta.early_stop_patience = meta.at("early_stop_patience").get<int>();
    m.train_meta.epochs_run = meta.at("epochs_run").get<int>();
    m.train_meta.lambda = meta.at("lambda").get<double>();
    m.train_meta.calibration_median = meta.at("calibration_median").get<double>();
    m.train_meta.val_loss_history = meta.at("val_loss_history").get<std::vector<double>>();
    return m;
}

}  // namespace ueba
