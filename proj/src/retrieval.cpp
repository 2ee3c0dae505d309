#include "emodub/retrieval.h"

#include <algorithm>
#include <cmath>

#include "emodub/errors.h"

namespace emodub {

const char* to_string(SimilarityMetric m) {
  switch (m) {
    case SimilarityMetric::Cosine: return "cosine";
    case SimilarityMetric::DotProduct: return "dot";
    case SimilarityMetric::NegEuclidean: return "euclid";
  }
  return "?";
}

std::optional<SimilarityMetric> parse_metric(std::string_view name) {
  if (name == "cosine") return SimilarityMetric::Cosine;
  if (name == "dot") return SimilarityMetric::DotProduct;
  if (name == "euclid") return SimilarityMetric::NegEuclidean;
  return std::nullopt;
}

const char* to_string(RetrievalMode m) {
  return m == RetrievalMode::SpeakerAgnostic ? "agnostic" : "specific";
}

std::optional<RetrievalMode> parse_mode(std::string_view name) {
  if (name == "agnostic") return RetrievalMode::SpeakerAgnostic;
  if (name == "specific") return RetrievalMode::SpeakerSpecific;
  return std::nullopt;
}

const char* to_string(Channel c) {
  switch (c) {
    case Channel::Scene: return "scene";
    case Channel::Face: return "face";
    case Channel::Text: return "text";
  }
  return "?";
}

double similarity(SimilarityMetric metric, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw SchemaError("similarity of vectors with dims " + std::to_string(a.size()) + " and " +
                      std::to_string(b.size()));
  }
  switch (metric) {
    case SimilarityMetric::DotProduct: {
      double dot = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
      return dot;
    }
    case SimilarityMetric::Cosine: {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
      }
      if (na == 0.0 || nb == 0.0) throw ArgumentError("cosine similarity of a zero vector");
      return dot / (std::sqrt(na) * std::sqrt(nb));
    }
    case SimilarityMetric::NegEuclidean: {
      double ss = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        ss += d * d;
      }
      return -std::sqrt(ss);
    }
  }
  return 0.0;
}

double text_criterion(std::span<const double> query_self, std::span<const double> query_react,
                      std::span<const double> record_self, std::span<const double> record_react,
                      SimilarityMetric metric) {
  return (similarity(metric, query_self, record_self) + similarity(metric, query_react, record_react)) / 2.0;
}

Query Query::from_record(const FootageRecord& r, bool keep_speaker) {
  Query q;
  q.scene = r.scene.values;
  q.face = r.face.values;
  q.text_self = r.text_self.values;
  q.text_react = r.text_react.values;
  if (keep_speaker) q.speaker_id = r.speaker_id;
  q.exclude_ids.insert(r.record_id);
  return q;
}

namespace {

void check_query_dims(const LibrarySchema& schema, const Query& q) {
  auto check = [&](const std::vector<double>& v, Modality m) {
    if (v.size() != schema.dim(m)) {
      throw SchemaError(std::string("query ") + to_string(m) + " has dim " + std::to_string(v.size()) +
                        ", library expects " + std::to_string(schema.dim(m)));
    }
  };
  check(q.scene, Modality::Scene);
  check(q.face, Modality::Face);
  check(q.text_self, Modality::TextSelf);
  check(q.text_react, Modality::TextReact);
}

double channel_score(const FootageRecord& r, const Query& q, Channel channel, SimilarityMetric metric) {
  switch (channel) {
    case Channel::Scene: return similarity(metric, q.scene, r.scene.values);
    case Channel::Face: return similarity(metric, q.face, r.face.values);
    case Channel::Text:
      return text_criterion(q.text_self, q.text_react, r.text_self.values, r.text_react.values, metric);
  }
  return 0.0;
}

}  // namespace

std::vector<RankedHit> retrieve_channel(const FootageLibrary& lib, const Query& query, Channel channel,
                                        std::size_t k, SimilarityMetric metric, RetrievalMode mode) {
  if (k == 0) throw ArgumentError("top-K requires K >= 1");
  if (mode == RetrievalMode::SpeakerSpecific && !query.speaker_id) {
    throw ArgumentError("speaker-specific retrieval needs a query speaker_id");
  }
  check_query_dims(lib.schema(), query);

  std::vector<RankedHit> scored;
  scored.reserve(lib.size());
  for (const FootageRecord& r : lib.records()) {
    if (query.exclude_ids.contains(r.record_id)) continue;
    if (mode == RetrievalMode::SpeakerSpecific && r.speaker_id != *query.speaker_id) continue;
    scored.push_back({r.record_id, channel_score(r, query, channel, metric)});
  }
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    ranks_before);
  scored.resize(keep);
  return scored;
}

RetrievalResult retrieve_all(const FootageLibrary& lib, const Query& query, std::size_t k,
                             SimilarityMetric metric, RetrievalMode mode) {
  RetrievalResult out;
  for (Channel c : kAllChannels) {
    ChannelResult& res = out[c];
    res.hits = retrieve_channel(lib, query, c, k, metric, mode);
    for (const RankedHit& hit : res.hits) {
      const FootageRecord& r = lib.at(hit.record_id);
      switch (c) {
        case Channel::Scene: res.indirect.push_back(r.scene.values); break;
        case Channel::Face: res.indirect.push_back(r.face.values); break;
        case Channel::Text: res.indirect.push_back(r.text_concat()); break;
      }
      res.matched_audio.push_back(r.audio.values);
    }
  }
  return out;
}

}  // namespace emodub
