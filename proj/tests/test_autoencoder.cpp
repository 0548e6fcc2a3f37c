#include <catch2/catch_amalgamated.hpp>

#include "ueba/autoencoder.hpp"
#include "ueba/rng.hpp"

using namespace ueba;

namespace {

std::vector<std::vector<double>> random_vectors(Rng& rng, std::size_t n, std::size_t d) {
    std::vector<std::vector<double>> v(n, std::vector<double>(d));
    for (auto& row : v)
        for (double& x : row) x = rng.normal(0.0, 1.0);
    return v;
}

// model whose output is identically zero: exposes the raw distance definitions
AutoencoderModel zero_model() {
    AutoencoderModel m = init_autoencoder({2, 1, 2}, Activation::Tanh, 1);
    for (auto& w : m.weights)
        for (double& v : w.a) v = 0.0;
    for (auto& b : m.biases)
        for (double& v : b) v = 0.0;
    return m;
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences (3-4-2-4-3)") {
    for (const Activation act : {Activation::Tanh, Activation::Relu}) {
        Rng rng(act == Activation::Tanh ? 101 : 202);
        AutoencoderModel m = init_autoencoder({3, 4, 2, 4, 3}, act, 55);
        const auto batch = random_vectors(rng, 10, 3);

        std::vector<Matrix> gw;
        std::vector<std::vector<double>> gb;
        const double base = loss_and_gradients(m, batch, batch, gw, gb);
        CHECK(std::isfinite(base));

        const double eps = 1e-5;
        std::vector<Matrix> tw;
        std::vector<std::vector<double>> tb;
        auto check_param = [&](double& p, double analytic) {
            const double saved = p;
            p = saved + eps;
            const double up = loss_and_gradients(m, batch, batch, tw, tb);
            p = saved - eps;
            const double down = loss_and_gradients(m, batch, batch, tw, tb);
            p = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            CHECK(rel <= 1e-4);
        };
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            for (std::size_t k = 0; k < m.weights[l].a.size(); ++k)
                check_param(m.weights[l].a[k], gw[l].a[k]);
            for (std::size_t k = 0; k < m.biases[l].size(); ++k)
                check_param(m.biases[l][k], gb[l][k]);
        }
    }
}

TEST_CASE("constant dataset converges to near-perfect replication") {
    std::vector<std::vector<double>> data(150, std::vector<double>{0.4, -0.2, 0.9});
    AeHyperparams hp;
    hp.dropout_rate = 0.0;
    hp.noise_sigma = 0.0;
    hp.max_epochs = 400;
    hp.patience = 50;
    const AutoencoderModel m = train_autoencoder(data, hp, 9, 0.2);
    CHECK(replication_error(m, data[0]).l2 < 1e-3);
}

TEST_CASE("early stopping honors the patience bound") {
    Rng rng(4);
    const auto data = random_vectors(rng, 200, 4);
    AeHyperparams hp;
    hp.patience = 5;
    hp.max_epochs = 300;
    const AutoencoderModel m = train_autoencoder(data, hp, 21, 0.25);
    const auto& hist = m.train_meta.val_loss_history;
    REQUIRE(!hist.empty());
    // E = epoch with the best validation loss; training may run at most
    // patience epochs past it
    std::size_t best = 0;
    for (std::size_t i = 1; i < hist.size(); ++i)
        if (hist[i] < hist[best] - 1e-12) best = i;
    CHECK(m.train_meta.epochs_run <= static_cast<int>(best + 1) + hp.patience);
    CHECK(m.train_meta.epochs_run == static_cast<int>(hist.size()));
}

TEST_CASE("replication distances: hand-computed cases") {
    const AutoencoderModel m = zero_model();

    const auto perfect = replication_error(m, std::vector<double>{0.0, 0.0});
    CHECK(perfect.l2 == 0.0);
    CHECK(perfect.l1 == 0.0);
    CHECK(perfect.max_component == 0.0);

    const auto one = replication_error(m, std::vector<double>{1.0, 0.0});
    CHECK(one.l2 == 1.0);
    CHECK(one.l1 == 1.0);
    CHECK(one.max_component == 1.0);

    // all components slightly wrong: the distances diverge
    const auto both = replication_error(m, std::vector<double>{1.0, 1.0});
    CHECK(both.l2 == Catch::Approx(std::sqrt(2.0)));
    CHECK(both.l1 == 2.0);
    CHECK(both.max_component == 1.0);
    CHECK(both.max_component <= both.l1);
}

TEST_CASE("incongruity score: range, calibration and bands") {
    CHECK(squash_score(0.0, 3.0) == 0.0);

    Rng rng(8);
    const auto data = random_vectors(rng, 300, 4);
    AeHyperparams hp;
    hp.max_epochs = 60;
    AutoencoderModel m = train_autoencoder(data, hp, 3, 0.2);

    CHECK_THROWS_AS(incongruity_score(m, data[0]), Error);  // not calibrated yet
    calibrate(m, data);

    // the median training vector scores 0.05 by construction
    std::vector<std::pair<double, std::size_t>> errs;
    for (std::size_t i = 0; i < data.size(); ++i)
        errs.emplace_back(combined_error(replication_error(m, data[i]), 4), i);
    std::sort(errs.begin(), errs.end());
    const std::size_t med = errs[(errs.size() - 1) / 2].second;
    CHECK(incongruity_score(m, data[med]) == Catch::Approx(0.05).margin(1e-9));

    for (const auto& v : data) {
        const double s = incongruity_score(m, v);
        CHECK(s >= 0.0);
        CHECK(s < 1.0);
    }
}

TEST_CASE("score is monotone in each replication distance") {
    const double lambda = 2.0;
    Rng rng(15);
    for (int i = 0; i < 200; ++i) {
        ReplicationError e;
        e.max_component = rng.uniform(0.0, 1.0);
        e.l1 = e.max_component + rng.uniform(0.0, 2.0);
        e.l2 = rng.uniform(e.max_component, e.l1);
        const double base = squash_score(combined_error(e, 4), lambda);
        ReplicationError worse = e;
        switch (i % 3) {
            case 0: worse.l2 += 0.5; break;
            case 1: worse.l1 += 0.5; break;
            default: worse.max_component += 0.5; break;
        }
        CHECK(squash_score(combined_error(worse, 4), lambda) >= base);
    }
}

TEST_CASE("zero dropout and zero noise reduce exactly to plain training") {
    Rng rng(77);
    const auto data = random_vectors(rng, 120, 3);
    AeHyperparams hp;
    hp.layer_sizes = {3, 3, 1, 3, 3};
    hp.dropout_rate = 0.0;
    hp.noise_sigma = 0.0;
    hp.max_epochs = 5;
    hp.patience = 100;
    hp.lr_halving = false;
    hp.batch_size = 16;
    const std::uint64_t seed = 1234;
    const AutoencoderModel trained = train_autoencoder(data, hp, seed, 0.2);

    // plain reference loop: same init, same documented rng streams, no
    // noise/dropout machinery at all
    AutoencoderModel ref = init_autoencoder(hp.layer_sizes, hp.activation, seed);
    Rng r_split = Rng::derive(seed, "ae:split");
    Rng r_order = Rng::derive(seed, "ae:order");
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    shuffle_indices(r_split, idx);
    const std::size_t n_val = static_cast<std::size_t>(std::llround(0.2 * double(idx.size())));
    std::vector<std::size_t> val(idx.begin(), idx.begin() + std::ptrdiff_t(n_val));
    std::vector<std::size_t> train(idx.begin() + std::ptrdiff_t(n_val), idx.end());

    std::vector<Matrix> vel_w, gw;
    std::vector<std::vector<double>> vel_b, gb;
    for (std::size_t l = 0; l < ref.weights.size(); ++l) {
        vel_w.emplace_back(ref.weights[l].rows, ref.weights[l].cols);
        vel_b.emplace_back(ref.biases[l].size(), 0.0);
    }
    double best_loss = std::numeric_limits<double>::infinity();
    auto best_w = ref.weights;
    auto best_b = ref.biases;
    for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
        shuffle_indices(r_order, train);
        for (std::size_t start = 0; start < train.size(); start += hp.batch_size) {
            const std::size_t stop = std::min(start + hp.batch_size, train.size());
            std::vector<std::vector<double>> batch;
            for (std::size_t i = start; i < stop; ++i) batch.push_back(data[train[i]]);
            loss_and_gradients(ref, batch, batch, gw, gb);
            for (std::size_t l = 0; l < ref.weights.size(); ++l) {
                for (std::size_t k = 0; k < ref.weights[l].a.size(); ++k) {
                    vel_w[l].a[k] = hp.momentum * vel_w[l].a[k] - hp.learning_rate * gw[l].a[k];
                    ref.weights[l].a[k] += vel_w[l].a[k];
                }
                for (std::size_t k = 0; k < ref.biases[l].size(); ++k) {
                    vel_b[l][k] = hp.momentum * vel_b[l][k] - hp.learning_rate * gb[l][k];
                    ref.biases[l][k] += vel_b[l][k];
                }
            }
        }
        double vloss = 0.0;
        for (std::size_t i : val) {
            const auto out = ref.forward(data[i]);
            for (std::size_t k = 0; k < out.size(); ++k) {
                const double dd = out[k] - data[i][k];
                vloss += 0.5 * dd * dd;
            }
        }
        vloss /= double(val.size());
        if (vloss < best_loss - 1e-12) {
            best_loss = vloss;
            best_w = ref.weights;
            best_b = ref.biases;
        }
    }
    ref.weights = best_w;
    ref.biases = best_b;

    for (std::size_t l = 0; l < ref.weights.size(); ++l) {
        CHECK(trained.weights[l].a == ref.weights[l].a);
        CHECK(trained.biases[l] == ref.biases[l]);
    }
}

TEST_CASE("configuration and data errors are rejected") {
    Rng rng(5);
    const auto data = random_vectors(rng, 150, 3);
    AeHyperparams hp;
    hp.layer_sizes = {3, 5, 3};  // bottleneck not smaller than input
    CHECK_THROWS_AS(train_autoencoder(data, hp, 1, 0.2), Error);

    AeHyperparams ok;
    CHECK_THROWS_AS(train_autoencoder(random_vectors(rng, 50, 3), ok, 1, 0.2), Error);
    CHECK_THROWS_AS(train_autoencoder(data, ok, 1, 0.0), Error);
    CHECK_THROWS_AS(train_autoencoder(data, ok, 1, 0.9), Error);
}

TEST_CASE("divergent training reports the epoch") {
    Rng rng(6);
    const auto data = random_vectors(rng, 120, 3);
    AeHyperparams hp;
    hp.learning_rate = 1e8;
    hp.noise_sigma = 0.0;
    hp.dropout_rate = 0.0;
    hp.max_epochs = 50;
    try {
        train_autoencoder(data, hp, 2, 0.2);
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("autoencoder persists through JSON with bit-exact scores") {
    Rng rng(12);
    const auto data = random_vectors(rng, 200, 5);
    AeHyperparams hp;
    hp.max_epochs = 30;
    AutoencoderModel m = train_autoencoder(data, hp, 10, 0.2);
    calibrate(m, data);
    const AutoencoderModel back = autoencoder_from_json(autoencoder_to_json(m));
    for (std::size_t i = 0; i < data.size(); i += 11)
        CHECK(incongruity_score(back, data[i]) == incongruity_score(m, data[i]));
}

TEST_CASE("default architecture follows the 2/3 - 1/3 rule") {
    const auto s = default_layer_sizes(7);
    CHECK(s == std::vector<std::size_t>{7, 5, 2, 5, 7});
}
