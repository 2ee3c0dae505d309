#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emodub/footage_library.h"
#include "emodub/layers.h"
#include "emodub/retrieval.h"
#include "emodub/tensor.h"

namespace emodub {

enum class NodeKind : std::uint8_t {
  BasicScene,
  BasicFace,
  BasicText,
  IndirectScene,
  IndirectFace,
  IndirectText,
  DirectAudioScene,
  DirectAudioFace,
  DirectAudioText,
};

enum class EdgeKind : std::uint8_t { Basic, Indirect, Direct };
enum class GraphStage : std::uint8_t { Beg, Ieg, Deg };

const char* to_string(NodeKind k);
const char* to_string(EdgeKind k);
const char* to_string(GraphStage s);

NodeKind basic_kind(Channel c);
NodeKind indirect_kind(Channel c);
NodeKind direct_kind(Channel c);
bool is_basic(NodeKind k);
bool is_indirect(NodeKind k);
bool is_direct(NodeKind k);
Channel channel_of(NodeKind k);

struct GraphNode {
  NodeKind kind = NodeKind::BasicScene;
  std::optional<std::uint64_t> source_record_id;
  std::uint32_t rank = 0;  // 1-based retrieval rank; 0 for basic nodes
  bool operator==(const GraphNode&) const = default;
};

// Undirected; attention treats it as the two directed pairs.
struct GraphEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  EdgeKind kind = EdgeKind::Basic;
  bool operator==(const GraphEdge&) const = default;
};

/// Topology plus per-node features (one row per node, on a tape).
/// Node order: basic S, F, T; indirect scene ranks 1..K, face 1..K,
/// text 1..K; then direct audio in the same channel-rank order.
struct EmotionGraph {
  GraphStage stage = GraphStage::Beg;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  Var features;
  bool encoded = false;
  // Attention matrices of the encoder layers (n x n, zero off-neighborhood),
  // filled by gae_encode.
  std::vector<Var> attention;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t basic_index(Channel c) const { return static_cast<std::size_t>(c); }
  std::vector<std::size_t> degrees() const;
  // Self-loops plus both directions of every edge, row-major n x n.
  std::vector<std::uint8_t> neighborhood_mask() const;
};

/// Throws StateError naming the first violation of the edge-kind rules:
/// Basic joins two basic nodes; Indirect joins an indirect node to the
/// basic node of its channel; Direct joins an audio node to the basic node
/// that issued its query. Also checks stage node/edge counts.
void check_topology(const EmotionGraph& g);
bool is_connected(const EmotionGraph& g);

enum class Activation { Identity, LeakyRelu };

struct GraphConfig {
  std::size_t hidden_dim = 256;
  std::size_t gae_layers = 1;
  bool per_stage_params = false;
  Activation activation = Activation::Identity;
  double leaky_slope = 0.2;
};

struct GatLayer {
  Parameter weight;     // d_h x d_h
  Parameter attention;  // 1 x 2 d_h, [a_src ‖ a_dst]
};

struct GaeParams {
  std::vector<GatLayer> layers;

  GaeParams() = default;
  GaeParams(const std::string& name, const GraphConfig& cfg, std::uint64_t seed);
  void collect(ParameterList& out);
};

/// Per-modality input projections into the hidden space. Basic and retrieved
/// vectors of the same modality share a projection; text takes self ‖ react.
struct InputProjections {
  Linear scene, face, text, audio;

  InputProjections() = default;
  InputProjections(const LibrarySchema& schema, std::size_t hidden_dim, std::uint64_t seed);
  Linear& for_channel(Channel c);
  void collect(ParameterList& out);
};

/// Projects one raw vector to a 1 x d_h feature row; SchemaError on a dim
/// mismatch with the projection input.
Var project_input(Tape& tape, std::span<const double> raw, Linear& projection);

EmotionGraph build_basic_graph(Tape& tape, std::span<const double> scene, std::span<const double> face,
                               std::span<const double> text_concat, InputProjections& proj);

/// One attention pass per configured layer over neighborhoods N(i) ∪ {i}:
///   z = h W,  e_ij = leakyReLU(a_src·z_i + a_dst·z_j),
///   alpha_i = softmax_j(e_ij),  h'_i = act(sum_j alpha_ij z_j).
/// Topology and node metadata are carried over unchanged.
EmotionGraph gae_encode(Tape& tape, const EmotionGraph& g, GaeParams& params, const GraphConfig& cfg);

/// Basic rows are the encoded Beg features verbatim; each retrieved
/// indirect vector becomes a node linked to its channel's basic node.
EmotionGraph extend_indirect(Tape& tape, const EmotionGraph& encoded_beg, const RetrievalResult& retrieved,
                             InputProjections& proj);

/// All Ieg rows carried over; each matched audio vector becomes a node linked
/// to the basic node of the channel that retrieved it.
EmotionGraph extend_direct(Tape& tape, const EmotionGraph& encoded_ieg, const RetrievalResult& retrieved,
                           InputProjections& proj);

/// Trainable state of the graph side: projections plus one shared GAE (or
/// one per stage when cfg.per_stage_params).
struct GraphEncoder {
  GraphConfig config;
  InputProjections proj;
  std::vector<GaeParams> gae;

  GraphEncoder() = default;
  GraphEncoder(const LibrarySchema& schema, GraphConfig cfg, std::uint64_t seed);
  GaeParams& gae_for(GraphStage s);
  void collect(ParameterList& out);
};

struct ProgressiveOutput {
  EmotionGraph beg, ieg, deg;  // encoded graphs

  Var h_beg() const { return beg.features; }
  Var h_ieg() const { return ieg.features; }
  Var h_deg() const { return deg.features; }
};

/// build -> encode -> extend -> encode -> extend -> encode.
ProgressiveOutput progressive_encode(Tape& tape, std::span<const double> scene, std::span<const double> face,
                                     std::span<const double> text_concat, const RetrievalResult& retrieved,
                                     GraphEncoder& encoder);

}  // namespace emodub
