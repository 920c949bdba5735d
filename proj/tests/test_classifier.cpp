#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pinlog/classifier.hpp"

using namespace pinlog;
using namespace pinlog::classifier;

namespace {

std::vector<std::string> labels_k(std::size_t k) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back("c" + std::to_string(i));
    return out;
}

Batch random_batch(std::mt19937_64& rng, std::size_t n, std::size_t d, std::size_t k) {
    std::uniform_real_distribution<double> u(-1, 1);
    Batch b;
    b.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < b.x.size(); ++i) b.x.data()[i] = u(rng);
    for (std::size_t i = 0; i < n; ++i) b.y.push_back(static_cast<int>(i % k));
    return b;
}

// Two Gaussian blobs in 114 dimensions, separated along the first two features.
LabeledSet blobs(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> g(0, 1);
    LabeledSet s;
    s.x.resize(static_cast<Eigen::Index>(n), 114);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        for (int j = 0; j < 114; ++j) s.x(static_cast<Eigen::Index>(i), j) = g(rng);
        s.x(static_cast<Eigen::Index>(i), 0) += y ? 6 : -6;
        s.x(static_cast<Eigen::Index>(i), 1) += y ? 6 : -6;
        s.y.push_back(y);
    }
    return s;
}

double accuracy(const MlpModel& m, const LabeledSet& s) {
    std::size_t hit = 0;
    for (Eigen::Index i = 0; i < s.x.rows(); ++i) {
        const Eigen::VectorXd row = s.x.row(i).transpose();
        const auto top = predict_topk(m, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), 1);
        if (top[0] == m.label_space[static_cast<std::size_t>(s.y[static_cast<std::size_t>(i)])]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(s.x.rows());
}

}  // namespace

TEST_CASE("normalization maps the training range to [-1, 1]") {
    auto m = make_model(3, 2, labels_k(2));
    Eigen::MatrixXd x(3, 3);
    x << 0, 5, 7,  //
        10, 5, 7,  //
        4, 5, 7;
    x(1, 2) = 9;
    fit_normalizer(m, x);
    const std::vector<double> lo{0, 5, 7}, mid{5, 123, 8}, hi{10, 5, 9};
    CHECK(normalize(lo, m)(0) == -1.0);
    CHECK(normalize(mid, m)(0) == 0.0);
    CHECK(normalize(hi, m)(0) == 1.0);
    CHECK(normalize(mid, m)(1) == 0.0);  // zero-range feature
    CHECK(normalize(mid, m)(2) == 0.0);
    CHECK_THROWS_AS(normalize(std::vector<double>{1, 2}, m), ValidationError);
}

TEST_CASE("zero weights give uniform probabilities") {
    const auto m = make_model(114, 8, labels_k(5));
    const auto p = forward(m, Eigen::VectorXd::Random(114));
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(p(i) == doctest::Approx(0.2));
}

TEST_CASE("forward on a hand-sized 2-2-2 network") {
    auto m = make_model(2, 2, labels_k(2));
    m.w1 << 0.5, -1.0, 2.0, 0.25;
    m.b1 << 0.1, -0.2;
    m.w2 << 1.0, -1.0, 0.5, 2.0;
    m.b2 << 0.0, 0.3;
    Eigen::VectorXd x(2);
    x << 0.4, -0.6;
    const double h0 = std::tanh(0.5 * 0.4 - 1.0 * -0.6 + 0.1);
    const double h1 = std::tanh(2.0 * 0.4 + 0.25 * -0.6 - 0.2);
    const double z0 = h0 - h1;
    const double z1 = 0.5 * h0 + 2.0 * h1 + 0.3;
    const double p0 = std::exp(z0) / (std::exp(z0) + std::exp(z1));
    const auto p = forward(m, x);
    CHECK(std::abs(p(0) - p0) < 1e-12);
    CHECK(std::abs(p(1) - (1 - p0)) < 1e-12);
}

TEST_CASE("probabilities sum to one for random models") {
    std::mt19937_64 rng(1);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto m = make_model(114, 16, labels_k(10));
        init_weights(m, seed);
        m.w1 *= 20.0;  // saturate some units
        const auto p = forward(m, Eigen::VectorXd::Random(114));
        CHECK(std::abs(p.sum() - 1.0) < 1e-9);
        CHECK((p.array() >= 0).all());
    }
}

TEST_CASE("uniform model loss is ln K") {
    const auto m = make_model(114, 8, labels_k(7));
    std::mt19937_64 rng(2);
    const auto b = random_batch(rng, 1, 114, 7);
    CHECK(loss_only(m, b) == doctest::Approx(std::log(7.0)));
}

TEST_CASE("output bias gradient is mean(p - y)") {
    std::mt19937_64 rng(3);
    auto m = make_model(114, 8, labels_k(5));
    init_weights(m, 3);
    const auto b = random_batch(rng, 13, 114, 5);
    const auto lg = loss_and_gradient(m, b);
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(5);
    for (Eigen::Index i = 0; i < b.x.rows(); ++i) {
        Eigen::VectorXd p = forward(m, b.x.row(i).transpose());
        p(b.y[static_cast<std::size_t>(i)]) -= 1.0;
        expected += p;
    }
    expected /= 13.0;
    const auto n = lg.gradient.size();
    for (Eigen::Index k = 0; k < 5; ++k) CHECK(std::abs(lg.gradient(n - 5 + k) - expected(k)) < 1e-12);
}

TEST_CASE("loss matches the loop oracle and gradient matches finite differences") {
    std::mt19937_64 rng(4);
    auto m = make_model(114, 8, labels_k(5));
    init_weights(m, 4);
    const auto b = random_batch(rng, 10, 114, 5);
    const Eigen::VectorXd theta = pack(m);
    const std::vector<long double> th(theta.data(), theta.data() + theta.size());
    std::vector<std::vector<double>> xs(static_cast<std::size_t>(b.x.rows()));
    for (Eigen::Index i = 0; i < b.x.rows(); ++i)
        for (Eigen::Index j = 0; j < 114; ++j) xs[static_cast<std::size_t>(i)].push_back(b.x(i, j));
    CHECK(std::abs(loss_only(m, b) - static_cast<double>(oracle::mlp_loss(th, 114, 8, 5, xs, b.y))) < 1e-12);

    const auto g = loss_and_gradient(m, b).gradient;
    const auto fd = oracle::fd_gradient(th, 114, 8, 5, xs, b.y);
    double worst = 0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
        const double gi = g(static_cast<Eigen::Index>(i));
        worst = std::max(worst, std::abs(fd[i] - gi) / std::max(1e-12, std::abs(fd[i]) + std::abs(gi)));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("pack and unpack are inverse") {
    auto m = make_model(6, 4, labels_k(3));
    init_weights(m, 9);
    const auto p = pack(m);
    CHECK(static_cast<std::size_t>(p.size()) == m.parameter_count());
    CHECK(p(1) == m.w1(0, 1));  // row-major W1
    CHECK(p(6) == m.w1(1, 0));
    auto m2 = make_model(6, 4, labels_k(3));
    unpack(p, m2);
    CHECK(m2.w1 == m.w1);
    CHECK(m2.b2 == m.b2);
    CHECK_THROWS_AS(unpack(Eigen::VectorXd::Zero(3), m2), ValidationError);
}

TEST_CASE("init_weights is seeded and bounded by 1/sqrt(fan-in)") {
    auto a = make_model(114, 8, labels_k(5));
    auto b = make_model(114, 8, labels_k(5));
    init_weights(a, 42);
    init_weights(b, 42);
    CHECK(pack(a) == pack(b));
    CHECK(a.w1.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(114.0));
    CHECK(a.w2.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
    init_weights(b, 43);
    CHECK(pack(a) != pack(b));
}

TEST_CASE("SCG separates two Gaussian blobs") {
    std::mt19937_64 rng(5);
    const auto train = blobs(rng, 200);
    const auto val = blobs(rng, 60);
    TrainConfig cfg;
    cfg.hidden_dim = 8;
    cfg.max_epochs = 200;
    const auto r = train_scg(train, val, labels_k(2), cfg);
    CHECK(accuracy(r.model, train) == 1.0);
    CHECK(r.history.train_loss.size() <= 201);
    CHECK(r.history.val_loss[r.history.best_iteration] <= r.history.val_loss[0]);
}

TEST_CASE("shuffled blob labels stay near chance") {
    std::mt19937_64 rng(6);
    auto train = blobs(rng, 200);
    auto val = blobs(rng, 200);
    std::shuffle(train.y.begin(), train.y.end(), rng);
    std::shuffle(val.y.begin(), val.y.end(), rng);
    TrainConfig cfg;
    cfg.hidden_dim = 8;
    const auto r = train_scg(train, val, labels_k(2), cfg);
    const double acc = accuracy(r.model, val);
    CHECK(acc >= 0.35);
    CHECK(acc <= 0.65);
    CHECK(r.history.val_loss[r.history.best_iteration] <= r.history.val_loss[0]);
}

TEST_CASE("training is deterministic and rejects bad configs") {
    std::mt19937_64 rng(7);
    const auto train = blobs(rng, 60);
    const auto val = blobs(rng, 20);
    TrainConfig cfg;
    cfg.hidden_dim = 4;
    const auto a = train_scg(train, val, labels_k(2), cfg);
    const auto b = train_scg(train, val, labels_k(2), cfg);
    CHECK(model_to_json(a.model) == model_to_json(b.model));
    CHECK(history_to_json(a.history) == history_to_json(b.history));

    cfg.hidden_dim = 0;
    CHECK_THROWS_AS(train_scg(train, val, labels_k(2), cfg), ValidationError);
    cfg.hidden_dim = 4;
    CHECK_THROWS_AS(train_scg(train, LabeledSet{}, labels_k(2), cfg), ValidationError);
}

TEST_CASE("top-k selection") {
    Eigen::VectorXd p(3);
    p << 0.1, 0.7, 0.2;
    CHECK(topk_indices(p, 1) == std::vector<std::size_t>{1});
    CHECK(topk_indices(p, 3) == std::vector<std::size_t>{1, 2, 0});
    Eigen::VectorXd tie(2);
    tie << 0.5, 0.5;
    CHECK(topk_indices(tie, 1) == std::vector<std::size_t>{0});
    CHECK_THROWS_AS(topk_indices(p, 4), ValidationError);
    CHECK_THROWS_AS(topk_indices(p, 0), ValidationError);
}

TEST_CASE("predict_topk with k = output_dim is a permutation of the labels") {
    auto m = make_model(114, 8, labels_k(6));
    init_weights(m, 1);
    m.norm_min.assign(114, 0.0);
    m.norm_max.assign(114, 1.0);
    auto out = predict_topk(m, std::vector<double>(114, 0.3), 6);
    std::sort(out.begin(), out.end());
    CHECK(out == labels_k(6));
}

TEST_CASE("model JSON round trip is exact") {
    auto m = make_model(114, 5, labels_k(4));
    init_weights(m, 11);
    m.norm_min.assign(114, -0.1);
    m.norm_max.assign(114, 2.0 / 3.0);
    const auto text = model_to_json(m);
    const auto back = model_from_json(text);
    CHECK(pack(back) == pack(m));
    CHECK(back.norm_max == m.norm_max);
    CHECK(back.label_space == m.label_space);
    CHECK(model_to_json(back) == text);
    CHECK_THROWS_AS(model_from_json("{}"), ValidationError);
}

TEST_CASE("to_labeled_set maps labels to indices") {
    features::FeatureVector a, b;
    a.label = "c1";
    b.label = "zz";
    const auto s = to_labeled_set({a}, labels_k(2));
    CHECK(s.y == std::vector<int>{1});
    CHECK_THROWS_AS(to_labeled_set({b}, labels_k(2)), ValidationError);
}
