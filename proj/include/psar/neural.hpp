#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "psar/util.hpp"

namespace psar {

enum class OutputActivation { identity, sigmoid, softplus };

std::string to_string(OutputActivation a);
OutputActivation output_activation_from_string(const std::string& s);

// Parameter gradients, same shapes as the owning Mlp.
struct MlpGradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    void set_zero();
    void add(const MlpGradients& other);
};

// Multilayer perceptron with ReLU hidden units and a configurable output
// activation. Batches are row-major: one input per row.
class Mlp {
  public:
    Mlp() = default;
    // widths = {in, h1, ..., out}
    Mlp(std::vector<int> widths, OutputActivation out_act, Rng& rng);

    int input_dim() const { return widths_.front(); }
    int output_dim() const { return widths_.back(); }
    const std::vector<int>& widths() const { return widths_; }
    OutputActivation output_activation() const { return out_act_; }
    int num_layers() const { return static_cast<int>(weights_.size()); }

    struct Cache {
        Eigen::MatrixXd input;
        std::vector<Eigen::MatrixXd> pre;   // pre-activation per layer
        std::vector<Eigen::MatrixXd> post;  // post-activation per layer
        bool valid = false;
    };

    Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;
    Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache& cache) const;
    Eigen::VectorXd forward_one(const Eigen::VectorXd& input) const;

    // Reverse-mode gradients of sum(loss) where `upstream` is dLoss/dOutput.
    // Requires a cache filled by forward() for the same input; accumulates
    // into `grads`.
    void backward(const Cache& cache, const Eigen::MatrixXd& upstream, MlpGradients& grads) const;

    MlpGradients zero_gradients() const;

    std::vector<Eigen::MatrixXd>& weights() { return weights_; }
    std::vector<Eigen::VectorXd>& biases() { return biases_; }
    const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
    const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

    void save(std::ostream& out, const std::string& name) const;
    static Mlp load(std::istream& in, std::string* name = nullptr);

  private:
    std::vector<int> widths_;
    OutputActivation out_act_ = OutputActivation::identity;
    std::vector<Eigen::MatrixXd> weights_;  // [out x in]
    std::vector<Eigen::VectorXd> biases_;
};

// AdamW: bias-corrected adaptive moments with decoupled weight decay.
class AdamW {
  public:
    struct Options {
        double learning_rate = 1e-3;
        double weight_decay = 0.01;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
    };

    AdamW() = default;
    AdamW(const Mlp& model, Options opt);

    void step(Mlp& model, const MlpGradients& grads);
    int step_count() const { return step_; }
    const Options& options() const { return opt_; }

  private:
    Options opt_;
    int step_ = 0;
    std::vector<Eigen::MatrixXd> mw_, vw_;
    std::vector<Eigen::VectorXd> mb_, vb_;
};

}  // namespace psar
