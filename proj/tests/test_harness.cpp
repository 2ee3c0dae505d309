#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "emodub/errors.h"
#include "emodub/harness.h"
#include "test_support.h"

using namespace emodub;

namespace {

FootageLibrary rescaled(const FootageLibrary& lib, double factor, const std::string& only_label = "") {
  FootageLibrary out(lib.schema());
  for (FootageRecord r : lib.records()) {
    if (only_label.empty() || r.emotion_label == only_label) {
      for (Modality m : kAllModalities) {
        for (double& x : r.vector(m).values) x *= factor;
      }
    }
    out.add(std::move(r));
  }
  return out;
}

FootageLibrary normalized(const FootageLibrary& lib) {
  FootageLibrary out(lib.schema());
  for (FootageRecord r : lib.records()) {
    for (Modality m : kAllModalities) {
      double ss = 0;
      for (double x : r.vector(m).values) ss += x * x;
      for (double& x : r.vector(m).values) x /= std::sqrt(ss);
    }
    out.add(std::move(r));
  }
  return out;
}

std::vector<double> purities(const std::vector<MetricRow>& rows) {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.stats.purity);
  return out;
}

}  // namespace

TEST(GenSynthetic, LabelsIdsAndDeterminism) {
  SyntheticConfig cfg;
  const FootageLibrary lib = generate_synthetic_library(cfg);
  EXPECT_EQ(lib.size(), 200u);
  std::set<std::string> labels;
  for (std::size_t i = 0; i < lib.size(); ++i) {
    labels.insert(lib.records()[i].emotion_label);
    EXPECT_EQ(lib.records()[i].record_id, i + 1);
  }
  EXPECT_EQ(labels, (std::set<std::string>{"emotion_0", "emotion_1", "emotion_2", "emotion_3"}));
  EXPECT_EQ(encode_library(lib), encode_library(generate_synthetic_library(cfg)));
  cfg.seed = 2;
  EXPECT_NE(encode_library(lib), encode_library(generate_synthetic_library(cfg)));
}

TEST(GenSynthetic, ManyClustersKeepMinimumSeparation) {
  SyntheticConfig cfg;
  cfg.clusters = 12;
  cfg.records = 240;
  cfg.separation = 8.0;
  const FootageLibrary lib = generate_synthetic_library(cfg);
  EXPECT_GE(evaluate_purity(lib, lib.records(), 3, SimilarityMetric::NegEuclidean, RetrievalMode::SpeakerAgnostic).purity,
            0.95);
}

TEST(GenSynthetic, RejectsBadConfig) {
  SyntheticConfig cfg;
  cfg.clusters = 0;
  EXPECT_THROW(generate_synthetic_library(cfg), ArgumentError);
  cfg = SyntheticConfig{};
  cfg.separation = -1;
  EXPECT_THROW(generate_synthetic_library(cfg), ArgumentError);
}

TEST(Purity, ZeroSeparationIsChance) {
  SyntheticConfig cfg;
  cfg.records = 400;
  cfg.separation = 0.0;
  const FootageLibrary lib = generate_synthetic_library(cfg);
  const auto s = evaluate_purity(lib, lib.records(), 3, SimilarityMetric::Cosine, RetrievalMode::SpeakerAgnostic);
  EXPECT_NEAR(s.purity, 0.25, 0.04);
}

TEST(Purity, WellSeparatedClustersArePure) {
  const FootageLibrary lib = generate_synthetic_library(SyntheticConfig{});
  for (std::size_t k : {1u, 3u}) {
    const auto s = evaluate_purity(lib, lib.records(), k, SimilarityMetric::Cosine, RetrievalMode::SpeakerAgnostic);
    EXPECT_GE(s.purity, 0.99) << k;
    EXPECT_EQ(s.hits, 200u * 3u * k);
    EXPECT_EQ(s.mean_list_len, static_cast<double>(k));
  }
}

TEST(SweepTopK, SpecificBeatsAgnosticWhenSpeakersOwnClusters) {
  SyntheticConfig cfg;
  cfg.separation = 1.0;
  cfg.speaker_per_cluster = true;
  const FootageLibrary lib = generate_synthetic_library(cfg);
  SweepConfig sweep;
  sweep.ks = {1, 3, 8};
  const auto rows = sweep_topk(lib, sweep);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    EXPECT_EQ(rows[i].mode, RetrievalMode::SpeakerAgnostic);
    EXPECT_EQ(rows[i + 1].mode, RetrievalMode::SpeakerSpecific);
    EXPECT_GE(rows[i + 1].stats.purity, rows[i].stats.purity);
    EXPECT_EQ(rows[i + 1].stats.purity, 1.0);
  }
  EXPECT_LT(rows[0].stats.purity, 1.0);
}

TEST(SweepTopK, SaturatesWhenKExceedsLibrary) {
  SyntheticConfig cfg;
  cfg.records = 5;
  const FootageLibrary lib = generate_synthetic_library(cfg);
  SweepConfig sweep;
  sweep.ks = {8};
  sweep.modes = {RetrievalMode::SpeakerAgnostic};
  const auto rows = sweep_topk(lib, sweep);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].stats.mean_list_len, 4.0);
  std::ostringstream csv;
  write_topk_csv(csv, rows);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "k,mode,purity,mean_score,mean_list_len");
  EXPECT_NE(csv.str().find("\n8,agnostic,"), std::string::npos);
}

TEST(SweepMetric, CosineInvariantToRescaling) {
  SyntheticConfig cfg;
  cfg.separation = 2.0;
  const FootageLibrary lib = generate_synthetic_library(cfg);
  SweepConfig sweep;
  sweep.metrics = {SimilarityMetric::Cosine};
  const auto base = purities(sweep_metric(lib, sweep));
  EXPECT_EQ(purities(sweep_metric(rescaled(lib, 3.0), sweep)), base);
  EXPECT_EQ(purities(sweep_metric(rescaled(lib, 3.0, "emotion_1"), sweep)), base);
}

TEST(SweepMetric, DotProductMovesUnderPerClusterRescaling) {
  // A uniform rescale multiplies every dot score by the same factor and
  // cannot move a ranking; scaling one cluster does.
  SyntheticConfig cfg;
  cfg.separation = 2.0;
  const FootageLibrary lib = generate_synthetic_library(cfg);
  SweepConfig sweep;
  sweep.metrics = {SimilarityMetric::DotProduct};
  const auto base = purities(sweep_metric(lib, sweep));
  EXPECT_EQ(purities(sweep_metric(rescaled(lib, 3.0), sweep)), base);
  EXPECT_NE(purities(sweep_metric(rescaled(lib, 3.0, "emotion_1"), sweep)), base);
}

TEST(SweepMetric, MetricsAgreeOnUnitSphere) {
  SyntheticConfig cfg;
  cfg.separation = 1.5;
  cfg.records = 120;
  const FootageLibrary lib = normalized(generate_synthetic_library(cfg));
  for (const FootageRecord& r : lib.records()) {
    const Query q = Query::from_record(r);
    for (Channel c : kAllChannels) {
      auto ids = [&](SimilarityMetric m) {
        std::vector<std::uint64_t> out;
        for (const auto& h : retrieve_channel(lib, q, c, 8, m, RetrievalMode::SpeakerAgnostic)) out.push_back(h.record_id);
        return out;
      };
      const auto cosine = ids(SimilarityMetric::Cosine);
      EXPECT_EQ(ids(SimilarityMetric::DotProduct), cosine);
      // The averaged text score is not a monotone function of the
      // averaged distance, so Euclidean agreement holds per vector only.
      if (c != Channel::Text) EXPECT_EQ(ids(SimilarityMetric::NegEuclidean), cosine);
    }
  }
}

TEST(SweepScale, FullFractionMatchesTopK) {
  const FootageLibrary lib = generate_synthetic_library(SyntheticConfig{});
  SweepConfig sweep;
  sweep.ks = {3};
  sweep.fractions = {1.0};
  sweep.modes = {RetrievalMode::SpeakerAgnostic};
  const auto scale = sweep_scale(lib, sweep);
  ASSERT_EQ(scale.size(), 1u);
  const auto topk = sweep_topk(lib, sweep);
  EXPECT_EQ(scale[0].stats.purity, topk[0].stats.purity);
  EXPECT_EQ(scale[0].stats.mean_score, topk[0].stats.mean_score);
}

TEST(SweepScale, SortedDeterministicAndTrending) {
  SyntheticConfig cfg;
  cfg.separation = 2.0;
  const FootageLibrary lib = generate_synthetic_library(cfg);
  SweepConfig sweep;
  sweep.ks = {3};
  sweep.fractions = {1.0, 0.1, 0.5};
  const auto a = sweep_scale(lib, sweep);
  const auto b = sweep_scale(lib, sweep);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[0].fraction, 0.1);
  EXPECT_EQ(a[2].fraction, 1.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a[i].stats.purity, b[i].stats.purity);
  EXPECT_GE(a[2].stats.purity, a[0].stats.purity);
  std::ostringstream csv;
  write_scale_csv(csv, a);
  EXPECT_EQ(csv.str(), "fraction,k,purity\n0.10000000000000001,3," + format_g17(a[0].stats.purity) + "\n0.5,3," +
                           format_g17(a[1].stats.purity) + "\n1,3," + format_g17(a[2].stats.purity) + "\n");
}

TEST(SweepConfigValidation, RejectsEmptyAndOutOfRange) {
  const FootageLibrary lib = generate_synthetic_library(SyntheticConfig{});
  SweepConfig s;
  s.ks = {};
  EXPECT_THROW(sweep_topk(lib, s), ArgumentError);
  s = SweepConfig{};
  s.fractions = {0.0};
  EXPECT_THROW(sweep_scale(lib, s), ArgumentError);
  s = SweepConfig{};
  s.ks = {0};
  EXPECT_THROW(sweep_metric(lib, s), ArgumentError);
}

TEST(RetrievalCsv, RowsPerModalityAndRank) {
  const FootageLibrary lib = generate_synthetic_library(SyntheticConfig{});
  const FootageRecord& q = lib.records()[0];
  const auto res = retrieve_all(lib, Query::from_record(q), 2, SimilarityMetric::Cosine, RetrievalMode::SpeakerAgnostic);
  std::ostringstream out;
  write_retrieval_csv_header(out);
  write_retrieval_csv(out, q.record_id, res, lib);
  std::istringstream in(out.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[0], "query_id,modality,rank,record_id,score,speaker_id");
  const auto& hit = res[Channel::Face].hits[1];
  EXPECT_EQ(lines[4], "1,face,2," + std::to_string(hit.record_id) + "," + format_g17(hit.score) + "," +
                          lib.at(hit.record_id).speaker_id);
  EXPECT_EQ(std::stod(format_g17(hit.score)), hit.score);
}

TEST(EncodeJson, StagesNodesAndEdges) {
  ToyFixtureConfig cfg;
  cfg.library_size = 20;
  cfg.k = 2;
  cfg.graph.hidden_dim = 4;
  cfg.head.model_dim = 4;
  cfg.head.n_mel = 2;
  ToyFixture fx = make_toy_fixture(cfg);
  GraphEncoder enc(fx.library.schema(), cfg.graph, 1);
  Tape tape;
  const auto out = progressive_encode(tape, fx.batch.scene, fx.batch.face, fx.batch.text_concat, fx.batch.retrieved, enc);
  const auto j = progressive_to_json(out, true);
  ASSERT_EQ(j["stages"].size(), 3u);
  EXPECT_EQ(j["stages"][2]["stage"], "deg");
  EXPECT_EQ(j["stages"][1]["nodes"].size(), 9u);
  EXPECT_EQ(j["stages"][2]["edges"].size(), 15u);
  EXPECT_TRUE(j["stages"][0]["nodes"][0]["source_record_id"].is_null());
  EXPECT_EQ(j["stages"][2]["nodes"][9]["kind"], "DirectAudioScene");
  EXPECT_EQ(j["stages"][2]["features"].size(), 15u);
  EXPECT_FALSE(progressive_to_json(out, false)["stages"][0].contains("features"));
}
