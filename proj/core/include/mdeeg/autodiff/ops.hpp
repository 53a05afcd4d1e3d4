#pragma once

#include <cstdint>
#include <span>

#include "mdeeg/autodiff/graph.hpp"
#include "mdeeg/autodiff/tensor.hpp"

// Differentiable tensor operations. Every op takes the Graph to record into;
// an op records nothing when the graph is not recording or no input requires a
// gradient. Shapes must agree exactly (bias-add is the only broadcast); a
// mismatch throws std::invalid_argument.
namespace mdeeg::ad {
inline namespace MDEEG_AD_ABI {

enum class Mode { Train, Eval };

/// y = x W + b for x [N, in], W [in, out], b [out].
Tensor fc(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b);

/// Valid cross-correlation, stride 1: x [N, Cin, L], k [Cout, Cin, K] -> [N, Cout, L - K + 1].
/// Throws std::domain_error when L < K.
Tensor conv1d(Graph& g, const Tensor& x, const Tensor& k);

/// Zero-padded "same" cross-correlation, stride 1, odd square kernel:
/// x [N, Cin, H, W], k [Cout, Cin, K, K] -> [N, Cout, H, W].
Tensor conv2d_same(Graph& g, const Tensor& x, const Tensor& k);

/// Running statistics owned by a batch-norm layer (not trainable).
struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
  explicit BatchNormStats(std::size_t channels = 0)
      : running_mean({channels}, real_t(0)), running_var({channels}, real_t(1)) {}
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Per-channel normalization over batch and spatial axes of x [N, C, ...].
/// Train mode uses batch statistics (biased variance) and updates the running
/// stats (unbiased variance) with momentum 0.1; eval mode uses running stats.
/// Throws std::domain_error for a batch of 1 in train mode.
Tensor batchnorm(Graph& g, const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                 Mode mode);

/// Window 2, stride 2 over the last axis of [N, C, L]; floor(L/2) outputs.
/// Gradient goes to the first maximal element of each window.
Tensor maxpool1d(Graph& g, const Tensor& x);
/// 2x2, stride 2 over [N, C, H, W].
Tensor maxpool2d(Graph& g, const Tensor& x);

/// Mean over every axis after the first two: [N, C, ...] -> [N, C].
Tensor global_avg_pool(Graph& g, const Tensor& x);

Tensor relu(Graph& g, const Tensor& x);  // relu'(0) = 0
Tensor tanh(Graph& g, const Tensor& x);
Tensor sigmoid(Graph& g, const Tensor& x);

/// Inverted dropout. Identity in eval mode or when p == 0; otherwise the mask
/// is drawn from a generator seeded with `seed`.
Tensor dropout(Graph& g, const Tensor& x, double p, Mode mode, std::uint64_t seed);

/// Mean over the batch of -log softmax(logits)[label], logits [N, C].
Tensor softmax_cross_entropy(Graph& g, const Tensor& logits, std::span<const int> labels);

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor sub(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
Tensor scale(Graph& g, const Tensor& x, double s);
Tensor one_minus(Graph& g, const Tensor& x);
/// Sum of all elements -> scalar.
Tensor sum(Graph& g, const Tensor& x);
/// Sum of w[i] * x[i] with constant weights -> scalar.
Tensor weighted_sum(Graph& g, const Tensor& x, std::span<const real_t> weights);
/// Constant offset of a scalar: x + c.
Tensor add_constant(Graph& g, const Tensor& x, double c);

/// [N, A] ++ [N, B] -> [N, A + B].
Tensor concat_columns(Graph& g, const Tensor& a, const Tensor& b);

/// Divides each row of [N, M] by its Euclidean norm. Rows with norm <= eps are
/// passed through as zeros (and receive no gradient).
Tensor l2_normalize_rows(Graph& g, const Tensor& x, double eps = 1e-12);

/// x x^T for x [N, M] -> [N, N].
Tensor gram(Graph& g, const Tensor& x);

}  // namespace MDEEG_AD_ABI
}  // namespace mdeeg::ad
