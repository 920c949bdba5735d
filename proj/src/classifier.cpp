#include "pinlog/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <random>

namespace pinlog::classifier {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void validate_config(const TrainConfig& cfg) {
    if (cfg.max_epochs <= 0) throw ValidationError("max_epochs must be positive");
    if (cfg.val_patience <= 0) throw ValidationError("val_patience must be positive");
    if (!(cfg.scg_sigma > 0.0) || !(cfg.scg_lambda0 > 0.0)) {
        throw ValidationError("SCG sigma and lambda0 must be positive");
    }
    if (cfg.hidden_dim <= 0) throw ValidationError("hidden_dim must be positive");
    if (!(cfg.min_grad >= 0.0)) throw ValidationError("min_grad must be >= 0");
}

MlpModel make_model(std::size_t input_dim, std::size_t hidden_dim, std::vector<std::string> label_space) {
    if (input_dim == 0 || hidden_dim == 0 || label_space.empty()) {
        throw ValidationError("model dimensions must be positive");
    }
    MlpModel m;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.output_dim = label_space.size();
    m.w1 = MatrixXd::Zero(static_cast<Eigen::Index>(hidden_dim), static_cast<Eigen::Index>(input_dim));
    m.b1 = VectorXd::Zero(static_cast<Eigen::Index>(hidden_dim));
    m.w2 = MatrixXd::Zero(static_cast<Eigen::Index>(m.output_dim), static_cast<Eigen::Index>(hidden_dim));
    m.b2 = VectorXd::Zero(static_cast<Eigen::Index>(m.output_dim));
    m.norm_min.assign(input_dim, 0.0);
    m.norm_max.assign(input_dim, 0.0);
    m.label_space = std::move(label_space);
    m.config.hidden_dim = static_cast<int>(hidden_dim);
    return m;
}

void init_weights(MlpModel& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto fill = [&rng](auto& target, double fan_in) {
        std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
        for (Eigen::Index r = 0; r < target.rows(); ++r) {
            for (Eigen::Index c = 0; c < target.cols(); ++c) target(r, c) = dist(rng);
        }
    };
    fill(model.w1, static_cast<double>(model.input_dim));
    fill(model.b1, static_cast<double>(model.input_dim));
    fill(model.w2, static_cast<double>(model.hidden_dim));
    fill(model.b2, static_cast<double>(model.hidden_dim));
}

Eigen::VectorXd pack(const MlpModel& m) {
    VectorXd p(static_cast<Eigen::Index>(m.parameter_count()));
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < m.w1.rows(); ++r)
        for (Eigen::Index c = 0; c < m.w1.cols(); ++c) p[k++] = m.w1(r, c);
    for (Eigen::Index r = 0; r < m.b1.size(); ++r) p[k++] = m.b1[r];
    for (Eigen::Index r = 0; r < m.w2.rows(); ++r)
        for (Eigen::Index c = 0; c < m.w2.cols(); ++c) p[k++] = m.w2(r, c);
    for (Eigen::Index r = 0; r < m.b2.size(); ++r) p[k++] = m.b2[r];
    return p;
}

void unpack(const Eigen::VectorXd& p, MlpModel& m) {
    if (p.size() != static_cast<Eigen::Index>(m.parameter_count())) {
        throw ValidationError("parameter vector size mismatch");
    }
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < m.w1.rows(); ++r)
        for (Eigen::Index c = 0; c < m.w1.cols(); ++c) m.w1(r, c) = p[k++];
    for (Eigen::Index r = 0; r < m.b1.size(); ++r) m.b1[r] = p[k++];
    for (Eigen::Index r = 0; r < m.w2.rows(); ++r)
        for (Eigen::Index c = 0; c < m.w2.cols(); ++c) m.w2(r, c) = p[k++];
    for (Eigen::Index r = 0; r < m.b2.size(); ++r) m.b2[r] = p[k++];
}

void fit_normalizer(MlpModel& model, const Eigen::MatrixXd& x) {
    if (x.rows() == 0 || x.cols() != static_cast<Eigen::Index>(model.input_dim)) {
        throw ValidationError("fit_normalizer: empty or mis-shaped input");
    }
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        model.norm_min[static_cast<std::size_t>(c)] = x.col(c).minCoeff();
        model.norm_max[static_cast<std::size_t>(c)] = x.col(c).maxCoeff();
    }
}

namespace {

double normalize_one(double v, double lo, double hi) {
    const double range = hi - lo;
    if (range <= 0.0) return 0.0;
    return 2.0 * (v - lo) / range - 1.0;
}

}  // namespace

Eigen::VectorXd normalize(std::span<const double> x, const MlpModel& model) {
    if (x.size() != model.input_dim) throw ValidationError("normalize: dimension mismatch");
    VectorXd out(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = normalize_one(x[i], model.norm_min[i], model.norm_max[i]);
    }
    return out;
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& x, const MlpModel& model) {
    if (x.cols() != static_cast<Eigen::Index>(model.input_dim)) {
        throw ValidationError("normalize: dimension mismatch");
    }
    MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const auto i = static_cast<std::size_t>(c);
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            out(r, c) = normalize_one(x(r, c), model.norm_min[i], model.norm_max[i]);
        }
    }
    return out;
}

namespace {

// Row-wise softmax of logits in place; returns log-sum-exp per row.
VectorXd softmax_rows(MatrixXd& z) {
    VectorXd lse(z.rows());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double mx = z.row(r).maxCoeff();
        double s = 0.0;
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            z(r, c) = std::exp(z(r, c) - mx);
            s += z(r, c);
        }
        z.row(r) /= s;
        lse[r] = mx + std::log(s);
    }
    return lse;
}

void check_batch(const MlpModel& model, const Batch& batch) {
    if (batch.x.rows() == 0) throw ValidationError("empty batch");
    if (batch.x.cols() != static_cast<Eigen::Index>(model.input_dim) ||
        batch.y.size() != static_cast<std::size_t>(batch.x.rows())) {
        throw ValidationError("batch shape mismatch");
    }
    for (int y : batch.y) {
        if (y < 0 || static_cast<std::size_t>(y) >= model.output_dim) {
            throw ValidationError("batch label outside label space");
        }
    }
}

}  // namespace

Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& x) {
    if (x.size() != static_cast<Eigen::Index>(model.input_dim)) {
        throw ValidationError("forward: expected " + std::to_string(model.input_dim) + " inputs, got " +
                              std::to_string(x.size()));
    }
    const VectorXd h = (model.w1 * x + model.b1).array().tanh().matrix();
    MatrixXd z = (model.w2 * h + model.b2).transpose();
    softmax_rows(z);
    return z.row(0).transpose();
}

double loss_only(const MlpModel& model, const Batch& batch) {
    check_batch(model, batch);
    MatrixXd h = batch.x * model.w1.transpose();
    h.rowwise() += model.b1.transpose();
    h = h.array().tanh().matrix();
    MatrixXd z = h * model.w2.transpose();
    z.rowwise() += model.b2.transpose();
    double loss = 0.0;
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double mx = z.row(r).maxCoeff();
        const double lse = mx + std::log((z.row(r).array() - mx).exp().sum());
        loss += lse - z(r, batch.y[static_cast<std::size_t>(r)]);
    }
    return loss / static_cast<double>(z.rows());
}

LossGradient loss_and_gradient(const MlpModel& model, const Batch& batch) {
    check_batch(model, batch);
    const auto n = static_cast<double>(batch.x.rows());

    MatrixXd h = batch.x * model.w1.transpose();
    h.rowwise() += model.b1.transpose();
    h = h.array().tanh().matrix();
    MatrixXd p = h * model.w2.transpose();
    p.rowwise() += model.b2.transpose();
    const MatrixXd logits = p;
    const VectorXd lse = softmax_rows(p);

    double loss = 0.0;
    MatrixXd dz = p;
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const int y = batch.y[static_cast<std::size_t>(r)];
        loss += lse[r] - logits(r, y);
        dz(r, y) -= 1.0;
    }
    loss /= n;
    dz /= n;

    const MatrixXd g_w2 = dz.transpose() * h;
    const VectorXd g_b2 = dz.colwise().sum().transpose();
    const MatrixXd dh = ((dz * model.w2).array() * (1.0 - h.array().square())).matrix();
    const MatrixXd g_w1 = dh.transpose() * batch.x;
    const VectorXd g_b1 = dh.colwise().sum().transpose();

    MlpModel shape = model;
    shape.w1 = g_w1;
    shape.b1 = g_b1;
    shape.w2 = g_w2;
    shape.b2 = g_b2;
    return {loss, pack(shape)};
}

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::max_epochs: return "max_epochs";
        case StopReason::val_patience: return "val_patience";
        case StopReason::gradient_converged: return "gradient_converged";
    }
    return "?";
}

LabeledSet to_labeled_set(const std::vector<features::FeatureVector>& rows,
                          const std::vector<std::string>& label_space) {
    LabeledSet set;
    set.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(features::kFeatureCount));
    set.y.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto it = std::find(label_space.begin(), label_space.end(), rows[r].label);
        if (it == label_space.end()) {
            throw ValidationError("label '" + rows[r].label + "' not in label space");
        }
        set.y.push_back(static_cast<int>(it - label_space.begin()));
        for (std::size_t c = 0; c < features::kFeatureCount; ++c) {
            set.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r].values[c];
        }
    }
    return set;
}

namespace {

// Loss/gradient evaluation bound to one batch, working on flat parameters.
class Objective {
public:
    Objective(MlpModel model, const Batch& batch) : model_(std::move(model)), batch_(batch) {}

    double loss(const VectorXd& params) {
        unpack(params, model_);
        return loss_only(model_, batch_);
    }
    LossGradient loss_grad(const VectorXd& params) {
        unpack(params, model_);
        return loss_and_gradient(model_, batch_);
    }

private:
    MlpModel model_;
    const Batch& batch_;
};

}  // namespace

TrainResult train_scg(const LabeledSet& train, const LabeledSet& val,
                      const std::vector<std::string>& label_space, const TrainConfig& cfg) {
    validate_config(cfg);
    if (train.x.rows() == 0 || val.x.rows() == 0) throw ValidationError("train_scg: empty train or validation set");
    if (train.x.cols() != val.x.cols()) throw ValidationError("train_scg: train/validation width mismatch");

    MlpModel model = make_model(static_cast<std::size_t>(train.x.cols()),
                                static_cast<std::size_t>(cfg.hidden_dim), label_space);
    model.config = cfg;
    fit_normalizer(model, train.x);
    init_weights(model, cfg.seed);

    const Batch train_batch{normalize_rows(train.x, model), train.y};
    const Batch val_batch{normalize_rows(val.x, model), val.y};
    Objective train_obj(model, train_batch);
    Objective val_obj(model, val_batch);

    TrainHistory history;
    VectorXd w = pack(model);
    auto lg = train_obj.loss_grad(w);
    double perf = lg.loss;
    VectorXd grad = lg.gradient;
    double vperf = val_obj.loss(w);
    history.train_loss.push_back(perf);
    history.val_loss.push_back(vperf);
    if (!std::isfinite(perf) || !std::isfinite(vperf)) {
        throw TrainingDiverged("initial loss is not finite", history);
    }

    VectorXd best_w = w;
    double best_vperf = vperf;
    int val_fail = 0;

    // Moller's scaled conjugate gradient; direction d starts at -grad.
    const auto n_params = static_cast<int>(w.size());
    VectorXd d = -grad;
    double norm_sqr_d = d.squaredNorm();
    double lambda = cfg.scg_lambda0;
    double lambda_bar = 0.0;
    bool success = true;
    double delta = 0.0;
    history.stop_reason = StopReason::max_epochs;

    if (grad.norm() < cfg.min_grad) {
        history.stop_reason = StopReason::gradient_converged;
    } else {
        for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
            if (success) {
                if (d.dot(grad) >= 0.0) {  // not a descent direction: restart
                    d = -grad;
                    norm_sqr_d = d.squaredNorm();
                }
                const double sigma = cfg.scg_sigma / std::sqrt(norm_sqr_d);
                const VectorXd grad_probe = train_obj.loss_grad(w + sigma * d).gradient;
                delta = d.dot(grad_probe - grad) / sigma;
            }
            // Scale the curvature estimate and force it positive.
            delta += (lambda - lambda_bar) * norm_sqr_d;
            if (delta <= 0.0) {
                lambda_bar = 2.0 * (lambda - delta / norm_sqr_d);
                delta = -delta + lambda * norm_sqr_d;
                lambda = lambda_bar;
            }
            const double mu = -d.dot(grad);
            const double alpha = mu / delta;
            const VectorXd w_trial = w + alpha * d;
            const double perf_trial = train_obj.loss(w_trial);
            const double comparison = 2.0 * delta * (perf - perf_trial) / (mu * mu);

            if (comparison >= 0.0) {
                const VectorXd grad_old = grad;
                w = w_trial;
                lg = train_obj.loss_grad(w);
                perf = lg.loss;
                grad = lg.gradient;
                lambda_bar = 0.0;
                success = true;
                if (epoch % n_params == 0) {
                    d = -grad;
                } else {
                    const double beta = (grad.squaredNorm() - grad.dot(grad_old)) / mu;
                    d = -grad + beta * d;
                }
                norm_sqr_d = d.squaredNorm();
                if (comparison >= 0.75) lambda *= 0.25;
            } else {
                lambda_bar = lambda;
                success = false;
            }
            if (comparison < 0.25) lambda += delta * (1.0 - comparison) / norm_sqr_d;

            vperf = success ? val_obj.loss(w) : history.val_loss.back();
            history.train_loss.push_back(perf);
            history.val_loss.push_back(vperf);
            if (!std::isfinite(perf) || !std::isfinite(vperf) || !std::isfinite(lambda)) {
                throw TrainingDiverged("loss became non-finite at iteration " + std::to_string(epoch), history);
            }

            if (vperf < best_vperf) {
                best_vperf = vperf;
                best_w = w;
                history.best_iteration = static_cast<std::size_t>(epoch);
                val_fail = 0;
            } else if (vperf > best_vperf) {
                ++val_fail;
            }
            if (val_fail >= cfg.val_patience) {
                history.stop_reason = StopReason::val_patience;
                break;
            }
            if (grad.norm() < cfg.min_grad || norm_sqr_d == 0.0) {
                history.stop_reason = StopReason::gradient_converged;
                break;
            }
        }
    }

    unpack(best_w, model);
    return {std::move(model), std::move(history)};
}

std::vector<std::size_t> topk_indices(const Eigen::VectorXd& probs, std::size_t k) {
    const auto n = static_cast<std::size_t>(probs.size());
    if (k < 1 || k > n) {
        throw ValidationError("k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&probs](std::size_t a, std::size_t b) {
                          const double pa = probs[static_cast<Eigen::Index>(a)];
                          const double pb = probs[static_cast<Eigen::Index>(b)];
                          return pa > pb || (pa == pb && a < b);
                      });
    idx.resize(k);
    return idx;
}

std::vector<std::string> predict_topk(const MlpModel& model, std::span<const double> x, std::size_t k) {
    const auto probs = forward(model, normalize(x, model));
    std::vector<std::string> out;
    for (std::size_t i : topk_indices(probs, k)) out.push_back(model.label_space[i]);
    return out;
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json matrix_rows(const MatrixXd& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    return flat;
}

ordered_json vector_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

MatrixXd matrix_from(const nlohmann::json& j, std::size_t rows, std::size_t cols) {
    const auto flat = j.get<std::vector<double>>();
    if (flat.size() != rows * cols) throw ValidationError("model file: weight array has wrong size");
    MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r * cols + c];
    return m;
}

VectorXd vector_from(const nlohmann::json& j, std::size_t n) {
    const auto flat = j.get<std::vector<double>>();
    if (flat.size() != n) throw ValidationError("model file: bias array has wrong size");
    return Eigen::Map<const VectorXd>(flat.data(), static_cast<Eigen::Index>(n));
}

}  // namespace

std::string model_to_json(const MlpModel& m) {
    ordered_json j;
    j["dims"] = {{"input", m.input_dim}, {"hidden", m.hidden_dim}, {"output", m.output_dim}};
    j["w1"] = matrix_rows(m.w1);
    j["b1"] = vector_json(m.b1);
    j["w2"] = matrix_rows(m.w2);
    j["b2"] = vector_json(m.b2);
    j["norm_min"] = m.norm_min;
    j["norm_max"] = m.norm_max;
    j["label_space"] = m.label_space;
    j["config"] = {{"seed", m.config.seed},
                   {"max_epochs", m.config.max_epochs},
                   {"val_patience", m.config.val_patience},
                   {"scg_sigma", m.config.scg_sigma},
                   {"scg_lambda0", m.config.scg_lambda0},
                   {"hidden_dim", m.config.hidden_dim},
                   {"min_grad", m.config.min_grad}};
    return j.dump();
}

MlpModel model_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ValidationError("model file is not a JSON object");
    try {
        const auto& dims = j.at("dims");
        MlpModel m = make_model(dims.at("input").get<std::size_t>(), dims.at("hidden").get<std::size_t>(),
                                j.at("label_space").get<std::vector<std::string>>());
        if (dims.at("output").get<std::size_t>() != m.output_dim) {
            throw ValidationError("model file: output dim disagrees with label space");
        }
        m.w1 = matrix_from(j.at("w1"), m.hidden_dim, m.input_dim);
        m.b1 = vector_from(j.at("b1"), m.hidden_dim);
        m.w2 = matrix_from(j.at("w2"), m.output_dim, m.hidden_dim);
        m.b2 = vector_from(j.at("b2"), m.output_dim);
        m.norm_min = j.at("norm_min").get<std::vector<double>>();
        m.norm_max = j.at("norm_max").get<std::vector<double>>();
        if (m.norm_min.size() != m.input_dim || m.norm_max.size() != m.input_dim) {
            throw ValidationError("model file: norm stats have wrong size");
        }
        for (std::size_t i = 0; i < m.input_dim; ++i) {
            if (m.norm_max[i] < m.norm_min[i]) throw ValidationError("model file: norm_max < norm_min");
        }
        if (!pack(m).allFinite()) throw ValidationError("model file: non-finite weight");
        const auto& c = j.at("config");
        m.config.seed = c.at("seed").get<std::uint64_t>();
        m.config.max_epochs = c.at("max_epochs").get<int>();
        m.config.val_patience = c.at("val_patience").get<int>();
        m.config.scg_sigma = c.at("scg_sigma").get<double>();
        m.config.scg_lambda0 = c.at("scg_lambda0").get<double>();
        m.config.hidden_dim = c.at("hidden_dim").get<int>();
        m.config.min_grad = c.value("min_grad", 1e-7);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("model file: ") + e.what());
    }
}

std::string history_to_json(const TrainHistory& h) {
    ordered_json j;
    j["train_loss"] = h.train_loss;
    j["val_loss"] = h.val_loss;
    j["stop_reason"] = std::string(to_string(h.stop_reason));
    j["best_iteration"] = h.best_iteration;
    return j.dump();
}

}  // namespace pinlog::classifier
