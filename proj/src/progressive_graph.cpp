#include "emodub/progressive_graph.h"

#include <algorithm>

#include "emodub/errors.h"

namespace emodub {

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::BasicScene: return "BasicScene";
    case NodeKind::BasicFace: return "BasicFace";
    case NodeKind::BasicText: return "BasicText";
    case NodeKind::IndirectScene: return "IndirectScene";
    case NodeKind::IndirectFace: return "IndirectFace";
    case NodeKind::IndirectText: return "IndirectText";
    case NodeKind::DirectAudioScene: return "DirectAudioScene";
    case NodeKind::DirectAudioFace: return "DirectAudioFace";
    case NodeKind::DirectAudioText: return "DirectAudioText";
  }
  return "?";
}

const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::Basic: return "Basic";
    case EdgeKind::Indirect: return "Indirect";
    case EdgeKind::Direct: return "Direct";
  }
  return "?";
}

const char* to_string(GraphStage s) {
  switch (s) {
    case GraphStage::Beg: return "beg";
    case GraphStage::Ieg: return "ieg";
    case GraphStage::Deg: return "deg";
  }
  return "?";
}

NodeKind basic_kind(Channel c) { return static_cast<NodeKind>(static_cast<int>(c)); }
NodeKind indirect_kind(Channel c) { return static_cast<NodeKind>(3 + static_cast<int>(c)); }
NodeKind direct_kind(Channel c) { return static_cast<NodeKind>(6 + static_cast<int>(c)); }
bool is_basic(NodeKind k) { return static_cast<int>(k) < 3; }
bool is_indirect(NodeKind k) { return static_cast<int>(k) >= 3 && static_cast<int>(k) < 6; }
bool is_direct(NodeKind k) { return static_cast<int>(k) >= 6; }
Channel channel_of(NodeKind k) { return static_cast<Channel>(static_cast<int>(k) % 3); }

std::vector<std::size_t> EmotionGraph::degrees() const {
  std::vector<std::size_t> deg(nodes.size(), 0);
  for (const GraphEdge& e : edges) {
    ++deg[e.a];
    ++deg[e.b];
  }
  return deg;
}

std::vector<std::uint8_t> EmotionGraph::neighborhood_mask() const {
  const std::size_t n = nodes.size();
  std::vector<std::uint8_t> mask(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) mask[i * n + i] = 1;
  for (const GraphEdge& e : edges) {
    mask[e.a * n + e.b] = 1;
    mask[e.b * n + e.a] = 1;
  }
  return mask;
}

void check_topology(const EmotionGraph& g) {
  const std::size_t n = g.nodes.size();
  auto fail = [](const std::string& what) { throw StateError("topology: " + what); };

  if (n < 3) fail("fewer than three nodes");
  for (Channel c : kAllChannels) {
    if (g.nodes[static_cast<std::size_t>(c)].kind != basic_kind(c)) fail("basic nodes out of order");
  }
  std::size_t indirect = 0, direct = 0;
  std::array<std::size_t, 3> indirect_per{}, direct_per{};
  for (std::size_t i = 3; i < n; ++i) {
    const NodeKind k = g.nodes[i].kind;
    if (is_basic(k)) fail("extra basic node at " + std::to_string(i));
    if (is_indirect(k)) {
      if (direct > 0) fail("indirect node after direct nodes");
      ++indirect;
      ++indirect_per[static_cast<std::size_t>(channel_of(k))];
    } else {
      ++direct;
      ++direct_per[static_cast<std::size_t>(channel_of(k))];
    }
  }

  std::size_t basic_edges = 0, indirect_edges = 0, direct_edges = 0;
  for (const GraphEdge& e : g.edges) {
    if (e.a >= n || e.b >= n || e.a == e.b) fail("edge endpoint out of range or self edge");
    const NodeKind ka = g.nodes[e.a].kind, kb = g.nodes[e.b].kind;
    switch (e.kind) {
      case EdgeKind::Basic:
        if (!is_basic(ka) || !is_basic(kb)) fail("Basic edge touches a non-basic node");
        ++basic_edges;
        break;
      case EdgeKind::Indirect: {
        const bool ok = (is_indirect(ka) && kb == basic_kind(channel_of(ka))) ||
                        (is_indirect(kb) && ka == basic_kind(channel_of(kb)));
        if (!ok) fail("Indirect edge must join an indirect node to its channel's basic node");
        ++indirect_edges;
        break;
      }
      case EdgeKind::Direct: {
        const bool ok = (is_direct(ka) && kb == basic_kind(channel_of(ka))) ||
                        (is_direct(kb) && ka == basic_kind(channel_of(kb)));
        if (!ok) fail("Direct edge must join an audio node to its issuing basic node");
        ++direct_edges;
        break;
      }
    }
  }

  if (basic_edges != 3) fail("expected 3 Basic edges, found " + std::to_string(basic_edges));
  if (indirect_edges != indirect) fail("each indirect node needs exactly one Indirect edge");
  if (direct_edges != direct) fail("each direct node needs exactly one Direct edge");
  // Every non-basic node must be a leaf; its single edge is the one counted above.
  const auto deg = g.degrees();
  for (std::size_t i = 3; i < n; ++i) {
    if (deg[i] != 1) fail("retrieved node " + std::to_string(i) + " has degree " + std::to_string(deg[i]));
  }
  switch (g.stage) {
    case GraphStage::Beg:
      if (n != 3) fail("Beg graph must have exactly 3 nodes");
      break;
    case GraphStage::Ieg:
      if (direct != 0) fail("Ieg graph holds direct nodes");
      break;
    case GraphStage::Deg:
      if (direct_per != indirect_per) fail("direct audio nodes do not mirror indirect nodes per channel");
      break;
  }
}

bool is_connected(const EmotionGraph& g) {
  const std::size_t n = g.nodes.size();
  if (n == 0) return true;
  std::vector<std::vector<std::size_t>> adj(n);
  for (const GraphEdge& e : g.edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == n;
}

// --- parameters --------------------------------------------------------------

GaeParams::GaeParams(const std::string& name, const GraphConfig& cfg, std::uint64_t seed) {
  if (cfg.gae_layers == 0) throw ConfigError("graph attention encoder needs at least one layer");
  const std::size_t d = cfg.hidden_dim;
  for (std::size_t l = 0; l < cfg.gae_layers; ++l) {
    const std::string prefix = name + "." + std::to_string(l);
    GatLayer layer{Parameter(prefix + ".weight", d, d), Parameter(prefix + ".attention", 1, 2 * d)};
    layer.weight.init_uniform(seed, d);
    layer.attention.init_uniform(seed, 2 * d);
    layers.push_back(std::move(layer));
  }
}

void GaeParams::collect(ParameterList& out) {
  for (GatLayer& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.attention);
  }
}

InputProjections::InputProjections(const LibrarySchema& schema, std::size_t hidden_dim, std::uint64_t seed)
    : scene("proj.scene", schema.dim(Modality::Scene), hidden_dim, seed),
      face("proj.face", schema.dim(Modality::Face), hidden_dim, seed),
      text("proj.text", schema.dim(Modality::TextSelf) + schema.dim(Modality::TextReact), hidden_dim, seed),
      audio("proj.audio", schema.dim(Modality::Audio), hidden_dim, seed) {}

Linear& InputProjections::for_channel(Channel c) {
  switch (c) {
    case Channel::Scene: return scene;
    case Channel::Face: return face;
    case Channel::Text: return text;
  }
  return scene;
}

void InputProjections::collect(ParameterList& out) {
  scene.collect(out);
  face.collect(out);
  text.collect(out);
  audio.collect(out);
}

GraphEncoder::GraphEncoder(const LibrarySchema& schema, GraphConfig cfg, std::uint64_t seed)
    : config(cfg), proj(schema, cfg.hidden_dim, seed) {
  if (cfg.per_stage_params) {
    for (GraphStage s : {GraphStage::Beg, GraphStage::Ieg, GraphStage::Deg}) {
      gae.emplace_back(std::string("gae.") + to_string(s), cfg, seed);
    }
  } else {
    gae.emplace_back("gae", cfg, seed);
  }
}

GaeParams& GraphEncoder::gae_for(GraphStage s) {
  return gae.size() == 1 ? gae.front() : gae.at(static_cast<std::size_t>(s));
}

void GraphEncoder::collect(ParameterList& out) {
  proj.collect(out);
  for (GaeParams& g : gae) g.collect(out);
}

// --- construction and encoding ----------------------------------------------

Var project_input(Tape& tape, std::span<const double> raw, Linear& projection) {
  if (raw.size() != projection.in_dim()) {
    throw SchemaError("projection " + projection.weight.name + " expects dim " +
                      std::to_string(projection.in_dim()) + ", got " + std::to_string(raw.size()));
  }
  return projection.forward(tape, tape.constant(Matrix::row_vector(raw)));
}

EmotionGraph build_basic_graph(Tape& tape, std::span<const double> scene, std::span<const double> face,
                               std::span<const double> text_concat, InputProjections& proj) {
  EmotionGraph g;
  g.stage = GraphStage::Beg;
  const std::array<Var, 3> rows = {project_input(tape, scene, proj.scene), project_input(tape, face, proj.face),
                                   project_input(tape, text_concat, proj.text)};
  for (Channel c : kAllChannels) g.nodes.push_back({basic_kind(c), std::nullopt, 0});
  g.edges = {{0, 1, EdgeKind::Basic}, {0, 2, EdgeKind::Basic}, {1, 2, EdgeKind::Basic}};
  g.features = concat_rows(rows);
  return g;
}

EmotionGraph gae_encode(Tape& tape, const EmotionGraph& g, GaeParams& params, const GraphConfig& cfg) {
  if (g.nodes.empty()) throw ArgumentError("gae_encode on an empty graph");
  const std::size_t d = cfg.hidden_dim;
  if (g.features.cols() != d || g.features.rows() != g.nodes.size()) {
    throw ShapeError("gae_encode: features " + g.features.value().shape_str() + " for " +
                     std::to_string(g.nodes.size()) + " nodes at hidden dim " + std::to_string(d));
  }
  const std::vector<std::uint8_t> mask = g.neighborhood_mask();

  EmotionGraph out;
  out.stage = g.stage;
  out.nodes = g.nodes;
  out.edges = g.edges;
  Var h = g.features;
  for (GatLayer& layer : params.layers) {
    Var z = matmul(h, tape.param(layer.weight));
    Var a = tape.param(layer.attention);
    Var src = matmul_nt(z, slice_cols(a, 0, d));
    Var dst = matmul_nt(z, slice_cols(a, d, d));
    Var scores = leaky_relu(pairwise_sum(src, dst), cfg.leaky_slope);
    Var alpha = masked_softmax_rows(scores, mask);
    out.attention.push_back(alpha);
    h = matmul(alpha, z);
    if (cfg.activation == Activation::LeakyRelu) h = leaky_relu(h, cfg.leaky_slope);
  }
  out.features = h;
  out.encoded = true;
  return out;
}

namespace {

void require_encoded(const EmotionGraph& g, GraphStage stage, const char* op) {
  if (g.stage != stage || !g.encoded) {
    throw StateError(std::string(op) + " needs an encoded " + to_string(stage) + " graph, got " +
                     (g.encoded ? "encoded " : "unencoded ") + to_string(g.stage));
  }
}

}  // namespace

EmotionGraph extend_indirect(Tape& tape, const EmotionGraph& encoded_beg, const RetrievalResult& retrieved,
                             InputProjections& proj) {
  require_encoded(encoded_beg, GraphStage::Beg, "extend_indirect");
  EmotionGraph g;
  g.stage = GraphStage::Ieg;
  g.nodes = encoded_beg.nodes;
  g.edges = encoded_beg.edges;
  std::vector<Var> rows{encoded_beg.features};
  for (Channel c : kAllChannels) {
    const ChannelResult& res = retrieved[c];
    for (std::size_t r = 0; r < res.hits.size(); ++r) {
      const std::size_t idx = g.nodes.size();
      g.nodes.push_back({indirect_kind(c), res.hits[r].record_id, static_cast<std::uint32_t>(r + 1)});
      g.edges.push_back({g.basic_index(c), idx, EdgeKind::Indirect});
      rows.push_back(project_input(tape, res.indirect.at(r), proj.for_channel(c)));
    }
  }
  g.features = rows.size() == 1 ? encoded_beg.features : concat_rows(rows);
  return g;
}

EmotionGraph extend_direct(Tape& tape, const EmotionGraph& encoded_ieg, const RetrievalResult& retrieved,
                           InputProjections& proj) {
  require_encoded(encoded_ieg, GraphStage::Ieg, "extend_direct");
  EmotionGraph g;
  g.stage = GraphStage::Deg;
  g.nodes = encoded_ieg.nodes;
  g.edges = encoded_ieg.edges;
  std::vector<Var> rows{encoded_ieg.features};
  for (Channel c : kAllChannels) {
    const ChannelResult& res = retrieved[c];
    for (std::size_t r = 0; r < res.hits.size(); ++r) {
      const std::size_t idx = g.nodes.size();
      g.nodes.push_back({direct_kind(c), res.hits[r].record_id, static_cast<std::uint32_t>(r + 1)});
      g.edges.push_back({g.basic_index(c), idx, EdgeKind::Direct});
      rows.push_back(project_input(tape, res.matched_audio.at(r), proj.audio));
    }
  }
  g.features = rows.size() == 1 ? encoded_ieg.features : concat_rows(rows);
  return g;
}

ProgressiveOutput progressive_encode(Tape& tape, std::span<const double> scene, std::span<const double> face,
                                     std::span<const double> text_concat, const RetrievalResult& retrieved,
                                     GraphEncoder& encoder) {
  ProgressiveOutput out;
  const GraphConfig& cfg = encoder.config;
  EmotionGraph beg = build_basic_graph(tape, scene, face, text_concat, encoder.proj);
  out.beg = gae_encode(tape, beg, encoder.gae_for(GraphStage::Beg), cfg);
  EmotionGraph ieg = extend_indirect(tape, out.beg, retrieved, encoder.proj);
  out.ieg = gae_encode(tape, ieg, encoder.gae_for(GraphStage::Ieg), cfg);
  EmotionGraph deg = extend_direct(tape, out.ieg, retrieved, encoder.proj);
  out.deg = gae_encode(tape, deg, encoder.gae_for(GraphStage::Deg), cfg);
  return out;
}

}  // namespace emodub
