#pragma once

#include <cstdint>
#include <vector>

#include "emodub/layers.h"
#include "emodub/optim.h"
#include "emodub/progressive_graph.h"
#include "emodub/retrieval.h"
#include "emodub/tensor.h"

namespace emodub {

struct HeadConfig {
  std::size_t model_dim = 256;
  std::size_t n_mel = 80;
  std::size_t conv_width = 1;
  std::size_t attention_heads = 1;
};

/// Hierarchical aggregation of the three encoded graphs into the aligned
/// sequence:
///   E_beg = Conv([H; CA(H, H_beg, H_beg)])
///   E_ieg = Conv([E_beg; CA(E_beg, H_ieg, H_ieg)])
///   E_deg = Conv([E_ieg; CA(E_ieg, H_deg, H_deg)])
///   E_out = Conv([H; E_deg])
/// with [;] concatenation along features and H the aligned sequence. Each
/// CA and each Conv has its own parameters.
struct AggregationHead {
  HeadConfig config;
  CrossAttention ca_beg, ca_ieg, ca_deg;
  Conv1d conv_beg, conv_ieg, conv_deg, conv_out;
  Linear mel;

  AggregationHead() = default;
  AggregationHead(HeadConfig cfg, std::size_t graph_dim, std::uint64_t seed);
  void collect(ParameterList& out);
};

struct AggregationResult {
  Var e_beg, e_ieg, e_deg, e_out;
  AttentionOutput att_beg, att_ieg, att_deg;
};

AggregationResult aggregate(Tape& tape, Var aligned, Var h_beg, Var h_ieg, Var h_deg, AggregationHead& head);

// Per-frame linear projection to n_mel bins.
Var toy_mel_head(Tape& tape, Var e_out, AggregationHead& head);

/// Stand-in for the cross-modal aligner output: L x dim values drawn with
/// uniform_pm1() from SplitMix64::keyed(seed, "aligned-sequence", L).
/// ArgumentError for L == 0.
Matrix stub_aligned_sequence(std::uint64_t seed, std::size_t length, std::size_t dim = 256);

/// Graph encoder plus aggregation head: every trainable parameter of the
/// pipeline. Parameters are referenced by address from tapes and optimizer
/// state, so a model is not moved once training starts.
struct DubberModel {
  GraphEncoder graph;
  AggregationHead head;

  DubberModel(const LibrarySchema& schema, GraphConfig graph_cfg, HeadConfig head_cfg, std::uint64_t seed);
  DubberModel(const DubberModel&) = delete;
  DubberModel& operator=(const DubberModel&) = delete;

  ParameterList parameters();
};

struct ToyBatch {
  std::vector<double> scene, face, text_concat;  // target utterance's basic emotion
  RetrievalResult retrieved;
  Matrix aligned;     // L x model_dim
  Matrix target_mel;  // L x n_mel
};

struct PipelineForward {
  ProgressiveOutput graphs;
  AggregationResult agg;
  Var mel;
  Var loss;
};

/// projection -> progressive encode -> aggregation -> mel head -> MSE.
PipelineForward forward_pipeline(Tape& tape, const ToyBatch& batch, DubberModel& model);

/// One optimization step; returns the loss before the update. NumericError
/// (and no parameter change) when the loss or a gradient is not finite.
double toy_train_step(const ToyBatch& batch, DubberModel& model, AdamState& adam);

}  // namespace emodub
