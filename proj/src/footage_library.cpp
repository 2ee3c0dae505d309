#include "emodub/footage_library.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "emodub/binary_io.h"
#include "emodub/errors.h"
#include "emodub/rng.h"

namespace emodub {

const char* to_string(Modality m) {
  switch (m) {
    case Modality::Scene: return "scene";
    case Modality::Face: return "face";
    case Modality::TextSelf: return "text_self";
    case Modality::TextReact: return "text_react";
    case Modality::Audio: return "audio";
  }
  return "?";
}

std::optional<Modality> parse_modality(std::string_view name) {
  for (Modality m : kAllModalities) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

void LibrarySchema::check(const EmotionVector& v, Modality expected) const {
  if (v.modality != expected) {
    throw SchemaError(std::string("expected a ") + to_string(expected) + " vector, got " +
                      to_string(v.modality));
  }
  if (v.dim() != dim(expected)) {
    throw SchemaError(std::string(to_string(expected)) + " vector has dim " + std::to_string(v.dim()) +
                      ", schema registers " + std::to_string(dim(expected)));
  }
  for (double x : v.values) {
    if (!std::isfinite(x)) throw SchemaError(std::string(to_string(expected)) + " vector is not finite");
  }
}

const EmotionVector& FootageRecord::vector(Modality m) const {
  switch (m) {
    case Modality::Scene: return scene;
    case Modality::Face: return face;
    case Modality::TextSelf: return text_self;
    case Modality::TextReact: return text_react;
    case Modality::Audio: return audio;
  }
  return scene;
}

EmotionVector& FootageRecord::vector(Modality m) {
  return const_cast<EmotionVector&>(std::as_const(*this).vector(m));
}

std::vector<double> FootageRecord::text_concat() const {
  std::vector<double> out = text_self.values;
  out.insert(out.end(), text_react.values.begin(), text_react.values.end());
  return out;
}

FootageLibrary::FootageLibrary(LibrarySchema schema) : schema_(schema) {
  for (std::uint32_t d : schema_.dims) {
    if (d == 0) throw SchemaError("schema dims must be positive");
  }
}

void FootageLibrary::add(FootageRecord record) {
  for (Modality m : kAllModalities) schema_.check(record.vector(m), m);
  if (id_index_.contains(record.record_id)) {
    throw ArgumentError("duplicate record_id " + std::to_string(record.record_id));
  }
  id_index_.emplace(record.record_id, records_.size());
  records_.push_back(std::move(record));
}

const FootageRecord* FootageLibrary::find(std::uint64_t record_id) const {
  auto it = id_index_.find(record_id);
  return it == id_index_.end() ? nullptr : &records_[it->second];
}

const FootageRecord& FootageLibrary::at(std::uint64_t record_id) const {
  const FootageRecord* r = find(record_id);
  if (r == nullptr) throw ArgumentError("no record with id " + std::to_string(record_id));
  return *r;
}

// --- extraction -----------------------------------------------------------

EmotionVector synthetic_extract(std::uint64_t seed, std::string_view content_key, Modality modality,
                                std::uint32_t dim) {
  if (dim < 2) throw SchemaError("synthetic extractor needs dim >= 2, got " + std::to_string(dim));
  auto rng = SplitMix64::keyed(seed, content_key, static_cast<std::uint64_t>(modality));
  EmotionVector v{modality, std::vector<double>(dim)};
  for (double& x : v.values) x = rng.uniform_pm1();
  return v;
}

EmotionVector SyntheticExtractorSuite::scene(std::string_view raw) const {
  return synthetic_extract(seed_, raw, Modality::Scene, schema_.dim(Modality::Scene));
}

EmotionVector SyntheticExtractorSuite::face(std::string_view raw) const {
  return synthetic_extract(seed_, raw, Modality::Face, schema_.dim(Modality::Face));
}

std::pair<EmotionVector, EmotionVector> SyntheticExtractorSuite::text(std::string_view raw) const {
  return {synthetic_extract(seed_, raw, Modality::TextSelf, schema_.dim(Modality::TextSelf)),
          synthetic_extract(seed_, raw, Modality::TextReact, schema_.dim(Modality::TextReact))};
}

EmotionVector SyntheticExtractorSuite::audio(std::string_view raw) const {
  return synthetic_extract(seed_, raw, Modality::Audio, schema_.dim(Modality::Audio));
}

FootageRecord build_record(std::uint64_t record_id, std::string movie_id, std::string speaker_id,
                           std::string emotion_label, const RawInputs& raw,
                           const ExtractorSuite& extractors, const LibrarySchema& schema) {
  FootageRecord r;
  r.record_id = record_id;
  r.movie_id = std::move(movie_id);
  r.speaker_id = std::move(speaker_id);
  r.emotion_label = std::move(emotion_label);
  r.scene = extractors.scene(raw.scene);
  r.face = extractors.face(raw.face);
  std::tie(r.text_self, r.text_react) = extractors.text(raw.text);
  r.audio = extractors.audio(raw.audio);
  for (Modality m : kAllModalities) schema.check(r.vector(m), m);
  return r;
}

// --- persistence ----------------------------------------------------------

namespace {

constexpr std::string_view kMrflMagic = "MRFL";

}  // namespace

std::vector<char> encode_library(const FootageLibrary& lib) {
  ByteWriter w;
  w.put_bytes(kMrflMagic);
  w.put_u32(kMrflVersion);
  for (std::uint32_t d : lib.schema().dims) w.put_u32(d);
  w.put_u64(lib.size());
  for (const FootageRecord& r : lib.records()) {
    w.put_u64(r.record_id);
    w.put_string(r.movie_id);
    w.put_string(r.speaker_id);
    w.put_string(r.emotion_label);
    for (Modality m : kAllModalities) {
      for (double x : r.vector(m).values) w.put_f64(x);
    }
  }
  return w.take();
}

FootageLibrary decode_library(std::span<const char> bytes, const std::optional<LibrarySchema>& expected) {
  ByteReader in(bytes);
  if (in.remaining() < kMrflMagic.size() || in.get_bytes(kMrflMagic.size()) != kMrflMagic) {
    throw FormatError(FormatReason::BadMagic, "not an MRFL file");
  }
  const std::uint32_t version = in.get_u32();
  if (version != kMrflVersion) {
    throw FormatError(FormatReason::VersionMismatch,
                      "file version " + std::to_string(version) + ", reader supports " +
                          std::to_string(kMrflVersion));
  }
  LibrarySchema schema;
  for (std::uint32_t& d : schema.dims) d = in.get_u32();
  for (std::size_t i = 0; i < schema.dims.size(); ++i) {
    if (schema.dims[i] == 0) {
      throw FormatError(FormatReason::DimMismatch,
                        std::string(to_string(kAllModalities[i])) + " dim is zero");
    }
    if (expected && expected->dims[i] != schema.dims[i]) {
      throw FormatError(FormatReason::DimMismatch,
                        std::string(to_string(kAllModalities[i])) + " dim " + std::to_string(schema.dims[i]) +
                            " in file, expected " + std::to_string(expected->dims[i]));
    }
  }
  const std::uint64_t count = in.get_u64();

  FootageLibrary lib(schema);
  for (std::uint64_t i = 0; i < count; ++i) {
    FootageRecord r;
    r.record_id = in.get_u64();
    r.movie_id = in.get_string();
    r.speaker_id = in.get_string();
    r.emotion_label = in.get_string();
    std::uint64_t payload = 0;
    for (std::uint32_t d : schema.dims) payload += std::uint64_t{d} * 8;
    if (payload > in.remaining()) {
      throw FormatError(FormatReason::Truncated, "record " + std::to_string(i) + " vectors cut short");
    }
    for (Modality m : kAllModalities) {
      EmotionVector& v = r.vector(m);
      v.values.resize(schema.dim(m));
      for (double& x : v.values) x = in.get_f64();
    }
    try {
      lib.add(std::move(r));
    } catch (const Error& e) {
      throw FormatError(FormatReason::BadValue, "record " + std::to_string(i) + ": " + e.what());
    }
  }
  if (in.remaining() != 0) {
    throw FormatError(FormatReason::TrailingBytes, std::to_string(in.remaining()) + " bytes after last record");
  }
  return lib;
}

void save_library(const FootageLibrary& lib, const std::filesystem::path& path) {
  write_file(path, encode_library(lib));
}

FootageLibrary load_library(const std::filesystem::path& path, const std::optional<LibrarySchema>& expected) {
  return decode_library(read_file(path), expected);
}

void write_interchange(const FootageLibrary& lib, std::ostream& out) {
  for (const FootageRecord& r : lib.records()) {
    nlohmann::json j;
    j["record_id"] = r.record_id;
    j["movie_id"] = r.movie_id;
    j["speaker_id"] = r.speaker_id;
    j["emotion_label"] = r.emotion_label;
    for (Modality m : kAllModalities) j[to_string(m)] = r.vector(m).values;
    out << j.dump() << '\n';
  }
}

FootageLibrary read_interchange(std::istream& in, const std::optional<LibrarySchema>& schema) {
  std::optional<FootageLibrary> lib;
  if (schema) lib.emplace(*schema);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    FootageRecord r;
    try {
      const auto j = nlohmann::json::parse(line);
      r.record_id = j.at("record_id").get<std::uint64_t>();
      r.movie_id = j.value("movie_id", std::string{});
      r.speaker_id = j.value("speaker_id", std::string{});
      if (auto it = j.find("emotion_label"); it != j.end() && !it->is_null()) {
        r.emotion_label = it->get<std::string>();
      }
      for (Modality m : kAllModalities) {
        r.vector(m).values = j.at(to_string(m)).get<std::vector<double>>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("interchange line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!lib) {
      LibrarySchema inferred;
      for (Modality m : kAllModalities) {
        inferred.dims[static_cast<std::size_t>(m)] = static_cast<std::uint32_t>(r.vector(m).dim());
      }
      lib.emplace(inferred);
    }
    try {
      lib->add(std::move(r));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Argument) throw;
      throw SchemaError("interchange line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!lib) throw SchemaError("interchange stream is empty and no schema was given");
  return std::move(*lib);
}

FootageLibrary subsample(const FootageLibrary& lib, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ArgumentError("subsample fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  const std::size_t n = lib.size();
  // ceil(fraction * n), snapping products within 1e-9 of an integer so that
  // decimal fractions behave as written (0.1 * 200 -> 20, 0.3 * 10 -> 3).
  const double product = fraction * static_cast<double>(n);
  const double nearest = std::round(product);
  std::size_t take = static_cast<std::size_t>(std::abs(product - nearest) <= 1e-9 * std::max(1.0, product)
                                                  ? nearest
                                                  : std::ceil(product));
  take = std::min(take, n);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto rng = SplitMix64::keyed(seed, "subsample", 0);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
  }
  order.resize(take);
  std::sort(order.begin(), order.end());

  FootageLibrary out(lib.schema());
  for (std::size_t pos : order) out.add(lib.records()[pos]);
  return out;
}

}  // namespace emodub
