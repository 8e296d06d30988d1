#pragma once

// Multi-hop quality estimator: learnable per-node meta representations Z and,
// for every hop l = 0..L, a pair of two-layer perceptrons mapping z_i to the
// mean (d outputs) and the scalar standard deviation of that hop's propagated
// feature vector. Training minimizes the Gaussian negative log-likelihood of
// the propagated features; Z is the learned embedding.
//
// The model is templated on the parameter precision. Training uses float;
// gradient checks instantiate double.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "mqe/matrix.hpp"
#include "mqe/propagation.hpp"

namespace mqe {

struct ModelShape {
    std::size_t nodes = 0;   // n
    std::size_t dim = 0;     // d, feature dimension
    std::size_t latent = 32; // f, meta-representation width
    std::size_t hidden = 64; // h, estimator hidden width
    std::size_t hops = 8;    // L
    double sigma_floor = 1e-3;

    void validate() const;
    bool operator==(const ModelShape&) const = default;
};

// Parameters of E_mu^(l) and E_sigma^(l). Biases are 1-row matrices so every
// tensor has the same type; sigma_w2 is h x 1 and sigma_b2 is 1 x 1.
template <class T>
struct HopEstimator {
    Matrix<T> mu_w1;     // f x h
    Matrix<T> mu_b1;     // 1 x h
    Matrix<T> mu_w2;     // h x d
    Matrix<T> mu_b2;     // 1 x d
    Matrix<T> sigma_w1;  // f x h
    Matrix<T> sigma_b1;  // 1 x h
    Matrix<T> sigma_w2;  // h x 1
    Matrix<T> sigma_b2;  // 1 x 1

    bool operator==(const HopEstimator&) const = default;
};

template <class T>
struct BasicMqeModel {
    ModelShape shape;
    Matrix<T> z;  // n x f
    std::vector<HopEstimator<T>> hops;  // L + 1 entries

    bool operator==(const BasicMqeModel&) const = default;
};

using MqeModel = BasicMqeModel<float>;

// Every parameter tensor in a fixed order: Z, then per hop mu_w1, mu_b1, mu_w2,
// mu_b2, sigma_w1, sigma_b1, sigma_w2, sigma_b2.
template <class T>
std::vector<std::span<T>> parameter_tensors(BasicMqeModel<T>& model);
template <class T>
std::vector<std::span<const T>> parameter_tensors(const BasicMqeModel<T>& model);

// Same shape, all zeros. Used for gradients and optimizer moments.
template <class T>
BasicMqeModel<T> zeros_like(const ModelShape& shape);

// Z and weight matrices i.i.d. uniform on +-1/sqrt(fan_in) (fan_in = f for Z and
// first layers, h for second layers); biases zero. Float and double models
// built from the same seed agree up to float rounding.
template <class T>
BasicMqeModel<T> init_model(const ModelShape& shape, std::uint64_t seed);

template <class T>
BasicMqeModel<T> cast_model(const BasicMqeModel<double>& model);

template <class T>
struct HopEstimate {
    Matrix<T> mu;          // n x d
    std::vector<T> sigma;  // n, >= sigma_floor

    // Retained for the backward pass.
    Matrix<T> mu_hidden_pre;     // n x h
    Matrix<T> sigma_hidden_pre;  // n x h
    std::vector<T> sigma_pre;    // n, pre-softplus
};

// Throws NumericalError if any output is non-finite.
template <class T>
HopEstimate<T> forward(const BasicMqeModel<T>& model, std::size_t hop);

enum class LogSigmaTerm {
    per_dimension,  // d * ln(sigma): exact NLL with one sigma shared across d dims
    single,         // ln(sigma), written once per node
    none,           // residual term only
};

struct LossOptions {
    LogSigmaTerm log_sigma = LogSigmaTerm::per_dimension;
    // Hops included in the loss; empty means all of 0..L.
    std::vector<std::size_t> hops;

    bool includes(std::size_t hop) const;
    std::vector<std::size_t> resolve(std::size_t max_hop) const;
};

double log_sigma_weight(LogSigmaTerm term, std::size_t dim) noexcept;

// sum_i ||x_i - mu_i||^2 / (2 sigma_i^2) + c * ln(sigma_i) for one hop.
template <class T>
double hop_loss(const HopEstimate<T>& est, const Matrix<T>& target, LogSigmaTerm term);

// Sum of hop_loss over the selected hops. `estimates[l]` pairs with layer l.
template <class T>
double nll_loss(std::span<const HopEstimate<T>> estimates, std::span<const Matrix<T>> targets,
                const LossOptions& opts);

// Accumulates d(hop_loss)/d(params) for `hop` into `grad` (the Z gradient
// receives every hop's contribution).
template <class T>
void backward_hop(const BasicMqeModel<T>& model, std::size_t hop, const HopEstimate<T>& est,
                  const Matrix<T>& target, LogSigmaTerm term, BasicMqeModel<T>& grad);

// Gradient of nll_loss with respect to every parameter and Z.
template <class T>
BasicMqeModel<T> backward(const BasicMqeModel<T>& model, std::span<const HopEstimate<T>> estimates,
                          std::span<const Matrix<T>> targets, const LossOptions& opts);

// Forward + loss + backward, one hop at a time. Overwrites `grad`.
template <class T>
double loss_and_gradient(const BasicMqeModel<T>& model, std::span<const Matrix<T>> targets,
                         const LossOptions& opts, BasicMqeModel<T>& grad);

template <class T>
std::vector<Matrix<T>> stack_targets(const PropagatedStack& stack);

struct TrainConfig {
    std::size_t epochs = 1000;
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    LossOptions loss;

    void validate() const;
};

template <class T>
struct TrainResult {
    BasicMqeModel<T> model;
    std::vector<double> loss_trace;  // loss before each update, one per epoch
    double final_loss = 0.0;         // loss of the returned model
};

// Full-batch Adam on all estimator parameters and Z jointly. Throws
// NumericalError naming the epoch if the loss becomes non-finite.
template <class T>
TrainResult<T> train(BasicMqeModel<T> model, const PropagatedStack& targets, const TrainConfig& cfg);

template <class T>
const Matrix<T>& embeddings(const BasicMqeModel<T>& model) noexcept {
    return model.z;
}

// Embedding export: u64 n, u64 f, then float32 values row-major, little-endian.
template <class T>
void write_embeddings(const std::filesystem::path& path, const Matrix<T>& z);
Matrix<float> read_embeddings(const std::filesystem::path& path);

// Float model checkpoint (shape header then every tensor as float32).
void write_model(const std::filesystem::path& path, const MqeModel& model);
MqeModel read_model(const std::filesystem::path& path);

void write_loss_trace(const std::filesystem::path& path, std::span<const double> trace);

}  // namespace mqe
