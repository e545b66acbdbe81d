#include "psar/neural.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace psar {

double read_double(std::istream& in) {
    std::string tok;
    in >> tok;
    if (tok.empty()) throw std::runtime_error("expected a number, got end of stream");
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size())
        throw std::runtime_error("expected a number, got '" + tok + "'");
    return v;
}

std::string to_string(OutputActivation a) {
    switch (a) {
        case OutputActivation::identity: return "identity";
        case OutputActivation::sigmoid: return "sigmoid";
        case OutputActivation::softplus: return "softplus";
    }
    return "identity";
}

OutputActivation output_activation_from_string(const std::string& s) {
    if (s == "identity") return OutputActivation::identity;
    if (s == "sigmoid") return OutputActivation::sigmoid;
    if (s == "softplus") return OutputActivation::softplus;
    throw std::invalid_argument("unknown output activation: " + s);
}

namespace {

double softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void apply_output_activation(OutputActivation act, Eigen::MatrixXd& m) {
    switch (act) {
        case OutputActivation::identity: return;
        case OutputActivation::sigmoid:
            m = m.unaryExpr([](double x) { return sigmoid(x); });
            return;
        case OutputActivation::softplus:
            m = m.unaryExpr([](double x) { return softplus(x); });
            return;
    }
}

// d(activation)/d(pre) evaluated from the pre-activation values.
Eigen::MatrixXd output_activation_grad(OutputActivation act, const Eigen::MatrixXd& pre) {
    switch (act) {
        case OutputActivation::identity: return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
        case OutputActivation::sigmoid:
            return pre.unaryExpr([](double x) {
                double s = sigmoid(x);
                return s * (1.0 - s);
            });
        case OutputActivation::softplus:
            return pre.unaryExpr([](double x) { return sigmoid(x); });
    }
    return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
}

}  // namespace

void MlpGradients::set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
}

void MlpGradients::add(const MlpGradients& other) {
    if (weights.size() != other.weights.size())
        throw std::invalid_argument("MlpGradients: layer count mismatch");
    for (size_t i = 0; i < weights.size(); ++i) {
        weights[i] += other.weights[i];
        biases[i] += other.biases[i];
    }
}

Mlp::Mlp(std::vector<int> widths, OutputActivation out_act, Rng& rng)
    : widths_(std::move(widths)), out_act_(out_act) {
    if (widths_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
    for (int w : widths_)
        if (w <= 0) throw std::invalid_argument("Mlp: widths must be positive");
    for (size_t l = 0; l + 1 < widths_.size(); ++l) {
        int fan_in = widths_[l], fan_out = widths_[l + 1];
        double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-bound, bound);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int i = 0; i < w.rows(); ++i)
            for (int j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
        weights_.push_back(std::move(w));
        biases_.push_back(Eigen::VectorXd::Zero(fan_out));
    }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input) const {
    Cache cache;
    return forward(input, cache);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Cache& cache) const {
    if (input.cols() != input_dim())
        throw std::invalid_argument("Mlp::forward: input dimension mismatch");
    cache.input = input;
    cache.pre.clear();
    cache.post.clear();
    Eigen::MatrixXd x = input;
    for (int l = 0; l < num_layers(); ++l) {
        Eigen::MatrixXd pre = x * weights_[l].transpose();
        pre.rowwise() += biases_[l].transpose();
        cache.pre.push_back(pre);
        if (l + 1 < num_layers()) {
            x = pre.cwiseMax(0.0);  // ReLU
        } else {
            x = pre;
            apply_output_activation(out_act_, x);
        }
        cache.post.push_back(x);
    }
    cache.valid = true;
    return x;
}

Eigen::VectorXd Mlp::forward_one(const Eigen::VectorXd& input) const {
    return forward(Eigen::MatrixXd(input.transpose())).row(0);
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& upstream, MlpGradients& grads) const {
    if (!cache.valid) throw std::logic_error("Mlp::backward: stale cache; run forward first");
    if (upstream.rows() != cache.input.rows() || upstream.cols() != output_dim())
        throw std::invalid_argument("Mlp::backward: upstream shape mismatch");
    if (static_cast<int>(grads.weights.size()) != num_layers())
        throw std::invalid_argument("Mlp::backward: gradient shape mismatch");

    Eigen::MatrixXd delta =
        upstream.cwiseProduct(output_activation_grad(out_act_, cache.pre.back()));
    for (int l = num_layers() - 1; l >= 0; --l) {
        const Eigen::MatrixXd& layer_in = (l == 0) ? cache.input : cache.post[l - 1];
        grads.weights[l].noalias() += delta.transpose() * layer_in;
        grads.biases[l] += delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd relu_grad =
                cache.pre[l - 1].unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
            delta = (delta * weights_[l]).cwiseProduct(relu_grad);
        }
    }
}

MlpGradients Mlp::zero_gradients() const {
    MlpGradients g;
    for (int l = 0; l < num_layers(); ++l) {
        g.weights.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
        g.biases.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
    }
    return g;
}

void Mlp::save(std::ostream& out, const std::string& name) const {
    out << "mlp " << name << ' ' << to_string(out_act_) << '\n';
    out << "widths";
    for (int w : widths_) out << ' ' << w;
    out << '\n';
    out << std::hexfloat;
    for (int l = 0; l < num_layers(); ++l) {
        out << "layer " << l << '\n';
        for (int i = 0; i < weights_[l].rows(); ++i) {
            for (int j = 0; j < weights_[l].cols(); ++j) out << weights_[l](i, j) << ' ';
            out << '\n';
        }
        for (int i = 0; i < biases_[l].size(); ++i) out << biases_[l](i) << ' ';
        out << '\n';
    }
    out << std::defaultfloat;
}

Mlp Mlp::load(std::istream& in, std::string* name) {
    std::string tag, nm, act;
    in >> tag >> nm >> act;
    if (tag != "mlp") throw std::runtime_error("checkpoint: expected 'mlp' record, got '" + tag + "'");
    if (name) *name = nm;
    Mlp m;
    m.out_act_ = output_activation_from_string(act);
    in >> tag;
    if (tag != "widths") throw std::runtime_error("checkpoint: expected 'widths'");
    std::string line;
    std::getline(in, line);
    std::istringstream ws(line);
    int w;
    while (ws >> w) m.widths_.push_back(w);
    if (m.widths_.size() < 2) throw std::runtime_error("checkpoint: bad widths");
    for (size_t l = 0; l + 1 < m.widths_.size(); ++l) {
        int idx;
        in >> tag >> idx;
        if (tag != "layer" || idx != static_cast<int>(l))
            throw std::runtime_error("checkpoint: expected layer " + std::to_string(l));
        Eigen::MatrixXd wm(m.widths_[l + 1], m.widths_[l]);
        for (int i = 0; i < wm.rows(); ++i)
            for (int j = 0; j < wm.cols(); ++j) wm(i, j) = read_double(in);
        Eigen::VectorXd b(m.widths_[l + 1]);
        for (int i = 0; i < b.size(); ++i) b(i) = read_double(in);
        if (!in) throw std::runtime_error("checkpoint: truncated mlp parameters");
        m.weights_.push_back(std::move(wm));
        m.biases_.push_back(std::move(b));
    }
    return m;
}

AdamW::AdamW(const Mlp& model, Options opt) : opt_(opt) {
    for (int l = 0; l < model.num_layers(); ++l) {
        mw_.push_back(Eigen::MatrixXd::Zero(model.weights()[l].rows(), model.weights()[l].cols()));
        vw_.push_back(Eigen::MatrixXd::Zero(model.weights()[l].rows(), model.weights()[l].cols()));
        mb_.push_back(Eigen::VectorXd::Zero(model.biases()[l].size()));
        vb_.push_back(Eigen::VectorXd::Zero(model.biases()[l].size()));
    }
}

void AdamW::step(Mlp& model, const MlpGradients& grads) {
    if (static_cast<size_t>(model.num_layers()) != mw_.size())
        throw std::invalid_argument("AdamW: model/state shape mismatch");
    step_ += 1;
    double bc1 = 1.0 - std::pow(opt_.beta1, step_);
    double bc2 = 1.0 - std::pow(opt_.beta2, step_);
    for (int l = 0; l < model.num_layers(); ++l) {
        if (grads.weights[l].rows() != model.weights()[l].rows() ||
            grads.weights[l].cols() != model.weights()[l].cols())
            throw std::invalid_argument("AdamW: gradient shape mismatch");
        mw_[l] = opt_.beta1 * mw_[l] + (1.0 - opt_.beta1) * grads.weights[l];
        vw_[l] = opt_.beta2 * vw_[l] + (1.0 - opt_.beta2) * grads.weights[l].cwiseProduct(grads.weights[l]);
        Eigen::MatrixXd mhat = mw_[l] / bc1;
        Eigen::MatrixXd vhat = vw_[l] / bc2;
        Eigen::MatrixXd denom =
            vhat.cwiseSqrt() + Eigen::MatrixXd::Constant(vhat.rows(), vhat.cols(), opt_.epsilon);
        model.weights()[l] -= opt_.learning_rate *
                              (mhat.cwiseQuotient(denom) + opt_.weight_decay * model.weights()[l]);

        mb_[l] = opt_.beta1 * mb_[l] + (1.0 - opt_.beta1) * grads.biases[l];
        vb_[l] = opt_.beta2 * vb_[l] + (1.0 - opt_.beta2) * grads.biases[l].cwiseProduct(grads.biases[l]);
        Eigen::VectorXd mbh = mb_[l] / bc1;
        Eigen::VectorXd vbh = vb_[l] / bc2;
        model.biases()[l] -=
            opt_.learning_rate *
            (mbh.cwiseQuotient(vbh.cwiseSqrt() + Eigen::VectorXd::Constant(vbh.size(), opt_.epsilon)) +
             opt_.weight_decay * model.biases()[l]);
    }
}

}  // namespace psar
