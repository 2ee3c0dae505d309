#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emodub/tensor.h"

namespace emodub {

// x W + b; W is d_in x d_out, b is 1 x d_out.
Var linear(Var x, Var weight, Var bias);

struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(const std::string& name, std::size_t d_in, std::size_t d_out, std::uint64_t seed);

  std::size_t in_dim() const { return weight.value.rows(); }
  std::size_t out_dim() const { return weight.value.cols(); }
  Var forward(Tape& tape, Var x);
  void collect(ParameterList& out) { out.push_back(&weight); out.push_back(&bias); }
};

/// Scaled dot-product cross-attention with learned projections:
///   out = concat_h softmax(Q_h K_h^T / sqrt(d_head)) V_h  W_o + b_o
/// where Q = query W_q, K = keys W_k, V = values W_v are split into `heads`
/// column blocks. Q/K/V projections carry no bias (a key bias is invisible
/// to softmax and would never receive gradient).
struct CrossAttention {
  Parameter wq, wk, wv, wo, bo;
  std::size_t heads = 1;

  CrossAttention() = default;
  CrossAttention(const std::string& name, std::size_t d_query, std::size_t d_key, std::size_t d_model,
                 std::size_t heads, std::uint64_t seed);

  std::size_t model_dim() const { return wq.value.cols(); }
  void collect(ParameterList& out);
};

struct AttentionOutput {
  Var out;
  Var values_projected;       // V W_v, before mixing
  std::vector<Var> weights;   // one L x M row-stochastic matrix per head
};

/// With zero key rows the block contributes an all-zero L x d_model output.
AttentionOutput cross_attention(Tape& tape, Var query, Var keys, Var values, CrossAttention& params);

/// Width-preserving 1-D convolution over the row (time) axis: symmetric zero
/// padding, odd kernel width. The kernel is stored unfolded as
/// (width * d_in) x d_out, block w applying to offset w - width/2, so width 1
/// is exactly linear().
struct Conv1d {
  Parameter kernel;
  Parameter bias;
  std::size_t width = 1;

  Conv1d() = default;
  Conv1d(const std::string& name, std::size_t d_in, std::size_t d_out, std::size_t width, std::uint64_t seed);

  Var forward(Tape& tape, Var x);
  void collect(ParameterList& out) { out.push_back(&kernel); out.push_back(&bias); }
};

Var conv1d(Var x, Var kernel, Var bias, std::size_t width);

}  // namespace emodub
