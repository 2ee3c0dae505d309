#include "emodub/aggregation_head.h"

#include <cmath>

#include "emodub/errors.h"
#include "emodub/rng.h"

namespace emodub {

AggregationHead::AggregationHead(HeadConfig cfg, std::size_t graph_dim, std::uint64_t seed)
    : config(cfg),
      ca_beg("head.ca_beg", cfg.model_dim, graph_dim, cfg.model_dim, cfg.attention_heads, seed),
      ca_ieg("head.ca_ieg", cfg.model_dim, graph_dim, cfg.model_dim, cfg.attention_heads, seed),
      ca_deg("head.ca_deg", cfg.model_dim, graph_dim, cfg.model_dim, cfg.attention_heads, seed),
      conv_beg("head.conv_beg", 2 * cfg.model_dim, cfg.model_dim, cfg.conv_width, seed),
      conv_ieg("head.conv_ieg", 2 * cfg.model_dim, cfg.model_dim, cfg.conv_width, seed),
      conv_deg("head.conv_deg", 2 * cfg.model_dim, cfg.model_dim, cfg.conv_width, seed),
      conv_out("head.conv_out", 2 * cfg.model_dim, cfg.model_dim, cfg.conv_width, seed),
      mel("head.mel", cfg.model_dim, cfg.n_mel, seed) {}

void AggregationHead::collect(ParameterList& out) {
  ca_beg.collect(out);
  ca_ieg.collect(out);
  ca_deg.collect(out);
  conv_beg.collect(out);
  conv_ieg.collect(out);
  conv_deg.collect(out);
  conv_out.collect(out);
  mel.collect(out);
}

AggregationResult aggregate(Tape& tape, Var aligned, Var h_beg, Var h_ieg, Var h_deg, AggregationHead& head) {
  const std::size_t d = head.config.model_dim;
  if (aligned.cols() != d || aligned.rows() == 0) {
    throw ShapeError("aggregate: aligned sequence " + aligned.value().shape_str() + ", model dim " +
                     std::to_string(d));
  }
  AggregationResult r;
  r.att_beg = cross_attention(tape, aligned, h_beg, h_beg, head.ca_beg);
  r.e_beg = head.conv_beg.forward(tape, concat_cols(aligned, r.att_beg.out));
  r.att_ieg = cross_attention(tape, r.e_beg, h_ieg, h_ieg, head.ca_ieg);
  r.e_ieg = head.conv_ieg.forward(tape, concat_cols(r.e_beg, r.att_ieg.out));
  r.att_deg = cross_attention(tape, r.e_ieg, h_deg, h_deg, head.ca_deg);
  r.e_deg = head.conv_deg.forward(tape, concat_cols(r.e_ieg, r.att_deg.out));
  r.e_out = head.conv_out.forward(tape, concat_cols(aligned, r.e_deg));
  return r;
}

Var toy_mel_head(Tape& tape, Var e_out, AggregationHead& head) {
  if (e_out.cols() != head.mel.in_dim()) {
    throw ShapeError("mel head expects " + std::to_string(head.mel.in_dim()) + " features, got " +
                     e_out.value().shape_str());
  }
  return head.mel.forward(tape, e_out);
}

Matrix stub_aligned_sequence(std::uint64_t seed, std::size_t length, std::size_t dim) {
  if (length == 0) throw ArgumentError("aligned sequence length must be >= 1");
  auto rng = SplitMix64::keyed(seed, "aligned-sequence", length);
  Matrix m(length, dim);
  for (double& x : m.data()) x = rng.uniform_pm1();
  return m;
}

DubberModel::DubberModel(const LibrarySchema& schema, GraphConfig graph_cfg, HeadConfig head_cfg,
                         std::uint64_t seed)
    : graph(schema, graph_cfg, seed), head(head_cfg, graph_cfg.hidden_dim, seed) {}

ParameterList DubberModel::parameters() {
  ParameterList out;
  graph.collect(out);
  head.collect(out);
  return out;
}

PipelineForward forward_pipeline(Tape& tape, const ToyBatch& batch, DubberModel& model) {
  PipelineForward f;
  f.graphs = progressive_encode(tape, batch.scene, batch.face, batch.text_concat, batch.retrieved, model.graph);
  Var aligned = tape.constant(batch.aligned);
  f.agg = aggregate(tape, aligned, f.graphs.h_beg(), f.graphs.h_ieg(), f.graphs.h_deg(), model.head);
  f.mel = toy_mel_head(tape, f.agg.e_out, model.head);
  f.loss = mean_squared_error(f.mel, batch.target_mel);
  return f;
}

double toy_train_step(const ToyBatch& batch, DubberModel& model, AdamState& adam) {
  ParameterList params = model.parameters();
  zero_grads(params);
  Tape tape;
  PipelineForward f = forward_pipeline(tape, batch, model);
  const double loss = f.loss.value()(0, 0);
  if (!std::isfinite(loss)) throw NumericError("toy training loss is not finite");
  tape.backward(f.loss);
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) {
      zero_grads(params);
      throw NumericError("non-finite gradient in " + p->name);
    }
  }
  adam_step(params, adam);
  return loss;
}

}  // namespace emodub
