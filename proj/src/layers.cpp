#include "emodub/layers.h"

#include <cmath>

#include "emodub/errors.h"

namespace emodub {

Var linear(Var x, Var weight, Var bias) {
  if (x.cols() != weight.rows() || bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw ShapeError("linear: x " + x.value().shape_str() + ", W " + weight.value().shape_str() + ", b " +
                     bias.value().shape_str());
  }
  return add_row(matmul(x, weight), bias);
}

Linear::Linear(const std::string& name, std::size_t d_in, std::size_t d_out, std::uint64_t seed)
    : weight(name + ".weight", d_in, d_out), bias(name + ".bias", 1, d_out) {
  weight.init_uniform(seed, d_in);
  bias.init_uniform(seed, d_in);
}

Var Linear::forward(Tape& tape, Var x) { return linear(x, tape.param(weight), tape.param(bias)); }

CrossAttention::CrossAttention(const std::string& name, std::size_t d_query, std::size_t d_key,
                               std::size_t d_model, std::size_t heads_, std::uint64_t seed)
    : wq(name + ".wq", d_query, d_model),
      wk(name + ".wk", d_key, d_model),
      wv(name + ".wv", d_key, d_model),
      wo(name + ".wo", d_model, d_model),
      bo(name + ".bo", 1, d_model),
      heads(heads_) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("cross-attention: d_model " + std::to_string(d_model) + " not divisible into " +
                      std::to_string(heads) + " heads");
  }
  wq.init_uniform(seed, d_query);
  wk.init_uniform(seed, d_key);
  wv.init_uniform(seed, d_key);
  wo.init_uniform(seed, d_model);
  bo.init_uniform(seed, d_model);
}

void CrossAttention::collect(ParameterList& out) {
  for (Parameter* p : {&wq, &wk, &wv, &wo, &bo}) out.push_back(p);
}

AttentionOutput cross_attention(Tape& tape, Var query, Var keys, Var values, CrossAttention& p) {
  if (query.cols() != p.wq.value.rows() || keys.cols() != p.wk.value.rows() ||
      values.cols() != p.wv.value.rows() || keys.rows() != values.rows()) {
    throw ShapeError("cross_attention: query " + query.value().shape_str() + ", keys " +
                     keys.value().shape_str() + ", values " + values.value().shape_str());
  }
  const std::size_t d_model = p.model_dim();
  AttentionOutput res;
  if (keys.rows() == 0) {
    res.out = tape.constant(Matrix(query.rows(), d_model));
    return res;
  }
  Var q = matmul(query, tape.param(p.wq));
  Var k = matmul(keys, tape.param(p.wk));
  Var v = matmul(values, tape.param(p.wv));
  res.values_projected = v;

  const std::size_t d_head = d_model / p.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));
  Var mixed;
  for (std::size_t h = 0; h < p.heads; ++h) {
    Var qh = p.heads == 1 ? q : slice_cols(q, h * d_head, d_head);
    Var kh = p.heads == 1 ? k : slice_cols(k, h * d_head, d_head);
    Var vh = p.heads == 1 ? v : slice_cols(v, h * d_head, d_head);
    Var weights = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt));
    res.weights.push_back(weights);
    Var head_out = matmul(weights, vh);
    mixed = h == 0 ? head_out : concat_cols(mixed, head_out);
  }
  res.out = linear(mixed, tape.param(p.wo), tape.param(p.bo));
  return res;
}

Conv1d::Conv1d(const std::string& name, std::size_t d_in, std::size_t d_out, std::size_t width_,
               std::uint64_t seed)
    : kernel(name + ".kernel", width_ * d_in, d_out), bias(name + ".bias", 1, d_out), width(width_) {
  if (width % 2 == 0) throw ConfigError("conv1d kernel width must be odd, got " + std::to_string(width));
  kernel.init_uniform(seed, width * d_in);
  bias.init_uniform(seed, width * d_in);
}

Var conv1d(Var x, Var kernel, Var bias, std::size_t width) {
  if (width % 2 == 0) throw ConfigError("conv1d kernel width must be odd, got " + std::to_string(width));
  if (kernel.rows() != width * x.cols()) {
    throw ShapeError("conv1d: input " + x.value().shape_str() + " with kernel " + kernel.value().shape_str() +
                     " at width " + std::to_string(width));
  }
  Var cols = width == 1 ? x : unfold_rows(x, width);
  return linear(cols, kernel, bias);
}

Var Conv1d::forward(Tape& tape, Var x) { return conv1d(x, tape.param(kernel), tape.param(bias), width); }

}  // namespace emodub
