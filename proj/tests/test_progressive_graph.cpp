#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "emodub/errors.h"
#include "emodub/grad_check.h"
#include "emodub/progressive_graph.h"
#include "test_support.h"

using namespace emodub;
namespace et = emodub::testing;

namespace {

const LibrarySchema kSchema{{4, 5, 3, 3, 6}};

// K hits per channel with distinct ids and random vectors.
RetrievalResult fake_retrieval(std::size_t k, std::uint64_t seed) {
  SplitMix64 rng(seed);
  RetrievalResult res;
  for (Channel c : kAllChannels) {
    const std::size_t dim = c == Channel::Scene ? 4 : c == Channel::Face ? 5 : 6;
    for (std::size_t r = 0; r < k; ++r) {
      res[c].hits.push_back({100 * (static_cast<std::uint64_t>(c) + 1) + r, 1.0 - 0.1 * static_cast<double>(r)});
      res[c].indirect.push_back(et::random_vector(rng, dim));
      res[c].matched_audio.push_back(et::random_vector(rng, 6));
    }
  }
  return res;
}

struct Inputs {
  std::vector<double> scene, face, text;
};

Inputs basic_inputs(std::uint64_t seed) {
  SplitMix64 rng(seed);
  return {et::random_vector(rng, 4), et::random_vector(rng, 5), et::random_vector(rng, 6)};
}

GraphConfig small_config() {
  GraphConfig cfg;
  cfg.hidden_dim = 6;
  return cfg;
}

ProgressiveOutput encode(Tape& tape, GraphEncoder& enc, const RetrievalResult& res, const Inputs& in) {
  return progressive_encode(tape, in.scene, in.face, in.text, res, enc);
}

double row_sum(const Matrix& m, std::size_t i) {
  double s = 0;
  for (double x : m.row(i)) s += x;
  return s;
}

}  // namespace

TEST(Topology, CountsAndLegalityForEveryK) {
  GraphEncoder enc(kSchema, small_config(), 3);
  const Inputs in = basic_inputs(1);
  for (std::size_t k = 0; k <= 8; ++k) {
    Tape tape;
    const auto out = encode(tape, enc, fake_retrieval(k, k), in);
    EXPECT_EQ(out.beg.node_count(), 3u);
    EXPECT_EQ(out.beg.edges.size(), 3u);
    EXPECT_EQ(out.ieg.node_count(), 3 + 3 * k);
    EXPECT_EQ(out.ieg.edges.size(), 3 + 3 * k);
    EXPECT_EQ(out.deg.node_count(), 3 + 6 * k);
    EXPECT_EQ(out.deg.edges.size(), 3 + 6 * k);
    for (const EmotionGraph* g : {&out.beg, &out.ieg, &out.deg}) {
      EXPECT_NO_THROW(check_topology(*g)) << k;
      EXPECT_TRUE(is_connected(*g));
      EXPECT_EQ(g->features.rows(), g->node_count());
      EXPECT_EQ(g->features.cols(), 6u);
    }
    const auto deg = out.deg.degrees();
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(deg[c], 2 + 2 * k);
    for (std::size_t i = 3; i < deg.size(); ++i) EXPECT_EQ(deg[i], 1u);
  }
}

TEST(Topology, NodeOrderAndMetadata) {
  GraphEncoder enc(kSchema, small_config(), 3);
  Tape tape;
  const auto res = fake_retrieval(2, 5);
  const auto out = encode(tape, enc, res, basic_inputs(1));
  const auto& n = out.deg.nodes;
  EXPECT_EQ(n[0].kind, NodeKind::BasicScene);
  EXPECT_FALSE(n[0].source_record_id);
  EXPECT_EQ(n[3].kind, NodeKind::IndirectScene);
  EXPECT_EQ(n[4].rank, 2u);
  EXPECT_EQ(n[5].kind, NodeKind::IndirectFace);
  EXPECT_EQ(n[7].kind, NodeKind::IndirectText);
  EXPECT_EQ(n[9].kind, NodeKind::DirectAudioScene);
  EXPECT_EQ(n[14].kind, NodeKind::DirectAudioText);
  EXPECT_EQ(n[14].source_record_id, res[Channel::Text].hits[1].record_id);
  // The direct node of a channel hangs off the basic node of that channel.
  EXPECT_EQ(out.deg.edges.back(), (GraphEdge{2, 14, EdgeKind::Direct}));
}

TEST(Topology, RejectsIllegalEdges) {
  GraphEncoder enc(kSchema, small_config(), 3);
  Tape tape;
  const auto out = encode(tape, enc, fake_retrieval(2, 5), basic_inputs(1));

  EmotionGraph wrong_channel = out.deg;
  wrong_channel.edges[3].a = 1;  // scene indirect node wired to the face basic node
  EXPECT_THROW(check_topology(wrong_channel), StateError);

  EmotionGraph retrieved_pair = out.ieg;
  retrieved_pair.edges.push_back({3, 4, EdgeKind::Indirect});
  EXPECT_THROW(check_topology(retrieved_pair), StateError);

  EmotionGraph audio_as_indirect = out.deg;
  audio_as_indirect.edges.back().kind = EdgeKind::Indirect;
  EXPECT_THROW(check_topology(audio_as_indirect), StateError);

  EmotionGraph missing_basic = out.beg;
  missing_basic.edges.pop_back();
  EXPECT_THROW(check_topology(missing_basic), StateError);

  EmotionGraph direct_in_ieg = out.deg;
  direct_in_ieg.stage = GraphStage::Ieg;
  EXPECT_THROW(check_topology(direct_in_ieg), StateError);

  EmotionGraph lopsided = out.deg;
  lopsided.nodes.pop_back();
  lopsided.edges.pop_back();
  EXPECT_THROW(check_topology(lopsided), StateError);
}

TEST(GatLayerOracle, HandSetTwoDimParameters) {
  GraphConfig cfg;
  cfg.hidden_dim = 2;
  GaeParams params("gae", cfg, 0);
  params.layers[0].weight.value = Matrix::from_rows({{1, 0.5}, {-0.5, 1}});
  params.layers[0].attention.value = Matrix::from_rows({{0.3, -0.2, 0.1, 0.4}});

  Tape tape;
  EmotionGraph g;
  g.stage = GraphStage::Ieg;
  for (Channel c : kAllChannels) g.nodes.push_back({basic_kind(c), std::nullopt, 0});
  g.nodes.push_back({NodeKind::IndirectScene, 9, 1});
  g.edges = {{0, 1, EdgeKind::Basic}, {0, 2, EdgeKind::Basic}, {1, 2, EdgeKind::Basic}, {0, 3, EdgeKind::Indirect}};
  g.features = tape.constant(Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}, {-1, 2}}));
  check_topology(g);

  const EmotionGraph out = gae_encode(tape, g, params, cfg);
  // From tests/oracles/gat_reference.py.
  const Matrix alpha = Matrix::from_rows({{0.218554892350507, 0.22976044129966147, 0.3101441553208973, 0.24154051102893423},
                                          {0.29643021413793735, 0.29940938731881933, 0.4041603985432432, 0.0},
                                          {0.28815631622857135, 0.3029304064892865, 0.4089132772821422, 0.0},
                                          {0.49500016666000024, 0.0, 0.0, 0.5049998333399998}});
  const Matrix h = Matrix::from_rows({{-0.22433427269674355, 1.1665648869996623},
                                      {0.3488057197501493, 1.053865092202653},
                                      {0.3411477516249992, 1.0603784805267855},
                                      {-0.5149995000199993, 1.0049998333399996}});
  EXPECT_LT(et::max_abs_diff(out.attention[0].value(), alpha), 1e-14);
  EXPECT_LT(et::max_abs_diff(out.features.value(), h), 1e-14);
  EXPECT_EQ(out.attention[0].value()(1, 3), 0.0);
  EXPECT_EQ(out.nodes, g.nodes);
  EXPECT_EQ(out.edges, g.edges);
  EXPECT_TRUE(out.encoded);
}

TEST(GatLayerOracle, LeakyActivationAppliesOnTop) {
  GraphConfig cfg;
  cfg.hidden_dim = 2;
  GaeParams params("gae", cfg, 0);
  params.layers[0].weight.value = Matrix::from_rows({{1, 0.5}, {-0.5, 1}});
  params.layers[0].attention.value = Matrix::from_rows({{0.3, -0.2, 0.1, 0.4}});
  Tape tape;
  EmotionGraph g;
  for (Channel c : kAllChannels) g.nodes.push_back({basic_kind(c), std::nullopt, 0});
  g.edges = {{0, 1, EdgeKind::Basic}, {0, 2, EdgeKind::Basic}, {1, 2, EdgeKind::Basic}};
  g.features = tape.constant(Matrix::from_rows({{1, 0}, {0, 1}, {-3, -1}}));
  const Matrix ident = gae_encode(tape, g, params, cfg).features.value();
  cfg.activation = Activation::LeakyRelu;
  const Matrix leaky = gae_encode(tape, g, params, cfg).features.value();
  for (std::size_t i = 0; i < ident.size(); ++i) {
    const double x = ident.data()[i];
    EXPECT_EQ(leaky.data()[i], x > 0 ? x : 0.2 * x);
  }
}

TEST(GatLayerOracle, SingleNodeIsProjectionOnly) {
  GraphConfig cfg = small_config();
  GaeParams params("gae", cfg, 4);
  Tape tape;
  EmotionGraph g;
  g.nodes.push_back({NodeKind::BasicScene, std::nullopt, 0});
  SplitMix64 rng(3);
  const Matrix x = et::random_matrix(rng, 1, 6);
  g.features = tape.constant(x);
  const EmotionGraph out = gae_encode(tape, g, params, cfg);
  EXPECT_EQ(out.attention[0].value()(0, 0), 1.0);
  EXPECT_LT(et::max_abs_diff(out.features.value(), et::naive_matmul(x, params.layers[0].weight.value)), 1e-15);
}

TEST(Attention, RowsSumToOneAndRespectNeighborhoods) {
  GraphConfig cfg = small_config();
  cfg.gae_layers = 2;
  GraphEncoder enc(kSchema, cfg, 8);
  for (std::size_t k : {0u, 1u, 3u, 8u}) {
    Tape tape;
    const auto out = encode(tape, enc, fake_retrieval(k, 2), basic_inputs(2));
    for (const EmotionGraph* g : {&out.beg, &out.ieg, &out.deg}) {
      ASSERT_EQ(g->attention.size(), 2u);
      const auto mask = g->neighborhood_mask();
      const std::size_t n = g->node_count();
      for (const Var& a : g->attention) {
        for (std::size_t i = 0; i < n; ++i) {
          EXPECT_NEAR(row_sum(a.value(), i), 1.0, 1e-12);
          for (std::size_t j = 0; j < n; ++j) {
            if (mask[i * n + j] == 0) EXPECT_EQ(a.value()(i, j), 0.0);
          }
        }
      }
    }
  }
}

TEST(Equivariance, PermutingRetrievedNodesPermutesOutputs) {
  GraphEncoder enc(kSchema, small_config(), 6);
  const Inputs in = basic_inputs(4);
  const RetrievalResult res = fake_retrieval(4, 9);
  RetrievalResult swapped = res;
  // Reverse the face hits; ranks change but vectors only move.
  for (auto* v : {&swapped[Channel::Face].indirect, &swapped[Channel::Face].matched_audio}) {
    std::reverse(v->begin(), v->end());
  }
  std::reverse(swapped[Channel::Face].hits.begin(), swapped[Channel::Face].hits.end());
  Tape t1, t2;
  const auto a = encode(t1, enc, res, in);
  const auto b = encode(t2, enc, swapped, in);
  const Matrix& ha = a.deg.features.value();
  const Matrix& hb = b.deg.features.value();
  const std::size_t k = 4;
  auto perm = [&](std::size_t i) -> std::size_t {
    const std::size_t face_ind = 3 + k, face_dir = 3 + 3 * k + k;
    if (i >= face_ind && i < face_ind + k) return face_ind + (k - 1 - (i - face_ind));
    if (i >= face_dir && i < face_dir + k) return face_dir + (k - 1 - (i - face_dir));
    return i;
  };
  for (std::size_t i = 0; i < ha.rows(); ++i) {
    for (std::size_t c = 0; c < ha.cols(); ++c) EXPECT_NEAR(ha(i, c), hb(perm(i), c), 1e-12) << i;
  }
}

TEST(StageIsolation, EarlierStagesIgnoreLaterInputs) {
  GraphEncoder enc(kSchema, small_config(), 6);
  const Inputs in = basic_inputs(4);
  const RetrievalResult res = fake_retrieval(3, 1);
  RetrievalResult other_audio = res;
  for (Channel c : kAllChannels) {
    for (auto& v : other_audio[c].matched_audio) std::fill(v.begin(), v.end(), 7.0);
  }
  Tape t1, t2, t3;
  const auto base = encode(t1, enc, res, in);
  const auto audio_changed = encode(t2, enc, other_audio, in);
  const auto different = encode(t3, enc, fake_retrieval(5, 77), in);
  EXPECT_EQ(base.h_beg().value(), different.h_beg().value());
  EXPECT_EQ(base.h_ieg().value(), audio_changed.h_ieg().value());
  EXPECT_NE(base.h_deg().value(), audio_changed.h_deg().value());
  // Encoded Beg rows enter Ieg unchanged, Ieg rows enter Deg unchanged.
  Tape t4;
  const auto beg = gae_encode(t4, build_basic_graph(t4, in.scene, in.face, in.text, enc.proj), enc.gae_for(GraphStage::Beg),
                              enc.config);
  const auto ieg = extend_indirect(t4, beg, res, enc.proj);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(ieg.features.value()(i, c), beg.features.value()(i, c));
  }
}

TEST(StageIsolation, ZeroKLeavesLaterStagesOnBasicNodes) {
  GraphEncoder enc(kSchema, small_config(), 6);
  Tape tape;
  const auto out = encode(tape, enc, fake_retrieval(0, 1), basic_inputs(1));
  EXPECT_EQ(out.ieg.node_count(), 3u);
  EXPECT_EQ(out.deg.node_count(), 3u);
  for (const EmotionGraph* g : {&out.ieg, &out.deg}) {
    EXPECT_TRUE(g->features.value().all_finite());
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(row_sum(g->attention[0].value(), i), 1.0, 1e-12);
  }
}

TEST(StageErrors, ExtendNeedsEncodedPriorStage) {
  GraphEncoder enc(kSchema, small_config(), 6);
  const Inputs in = basic_inputs(1);
  const auto res = fake_retrieval(2, 1);
  Tape tape;
  const EmotionGraph raw = build_basic_graph(tape, in.scene, in.face, in.text, enc.proj);
  EXPECT_THROW(extend_indirect(tape, raw, res, enc.proj), StateError);
  EXPECT_THROW(extend_direct(tape, raw, res, enc.proj), StateError);
  const EmotionGraph beg = gae_encode(tape, raw, enc.gae_for(GraphStage::Beg), enc.config);
  EXPECT_THROW(extend_direct(tape, beg, res, enc.proj), StateError);
  const EmotionGraph ieg = extend_indirect(tape, beg, res, enc.proj);
  EXPECT_THROW(extend_direct(tape, ieg, res, enc.proj), StateError);
}

TEST(Projections, SharedPerModalityAndChecked) {
  GraphEncoder enc(kSchema, small_config(), 6);
  Tape tape;
  const Inputs in = basic_inputs(2);
  const Var a = project_input(tape, in.scene, enc.proj.scene);
  Matrix expected = et::naive_matmul(Matrix::row_vector(in.scene), enc.proj.scene.weight.value);
  for (std::size_t j = 0; j < 6; ++j) expected(0, j) += enc.proj.scene.bias.value(0, j);
  EXPECT_LT(et::max_abs_diff(a.value(), expected), 1e-15);
  EXPECT_EQ(enc.proj.text.in_dim(), 6u);
  EXPECT_EQ(enc.proj.audio.in_dim(), 6u);
  EXPECT_THROW(project_input(tape, in.face, enc.proj.scene), SchemaError);

  // A retrieved scene vector equal to the query scene projects to the same row.
  RetrievalResult res = fake_retrieval(1, 3);
  res[Channel::Scene].indirect[0] = in.scene;
  const auto out = encode(tape, enc, res, in);
  const EmotionGraph ieg = extend_indirect(tape, out.beg, res, enc.proj);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(ieg.features.value()(3, j), a.value()(0, j));
}

TEST(Parameters, SharedByDefaultPerStageOnRequest) {
  GraphConfig cfg = small_config();
  GraphEncoder shared(kSchema, cfg, 1);
  ParameterList ps;
  shared.collect(ps);
  EXPECT_EQ(ps.size(), 8u + 2u);
  EXPECT_EQ(&shared.gae_for(GraphStage::Beg), &shared.gae_for(GraphStage::Deg));
  cfg.per_stage_params = true;
  cfg.gae_layers = 2;
  GraphEncoder split(kSchema, cfg, 1);
  ParameterList ps2;
  split.collect(ps2);
  EXPECT_EQ(ps2.size(), 8u + 12u);
  EXPECT_NE(&split.gae_for(GraphStage::Beg), &split.gae_for(GraphStage::Ieg));
  EXPECT_EQ(split.gae_for(GraphStage::Ieg).layers[1].weight.name, "gae.ieg.1.weight");
  cfg.gae_layers = 0;
  EXPECT_THROW(GraphEncoder(kSchema, cfg, 1), ConfigError);
}

TEST(Parameters, GradientReachesEveryGraphParameter) {
  GraphConfig cfg = small_config();
  cfg.gae_layers = 2;
  GraphEncoder enc(kSchema, cfg, 2);
  ParameterList params;
  enc.collect(params);
  const Inputs in = basic_inputs(5);
  const auto res = fake_retrieval(2, 4);
  SplitMix64 rng(1);
  const Matrix target = et::random_matrix(rng, 15, 6);
  const auto report = grad_check(
      [&](Tape& t) { return mean_squared_error(encode(t, enc, res, in).h_deg(), target); }, params);
  EXPECT_LT(report.max_rel_error, 1e-5);
  for (const auto& p : report.per_param) EXPECT_GT(p.max_abs_analytic, 0.0) << p.name;
}
