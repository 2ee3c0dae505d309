#include "emodub/checkpoint.h"

#include <unordered_map>

#include "emodub/binary_io.h"
#include "emodub/errors.h"

namespace emodub {

namespace {
constexpr std::string_view kMagic = "ADPK";
}

std::vector<char> encode_checkpoint(const ParameterList& params) {
  ByteWriter w;
  w.put_bytes(kMagic);
  w.put_u32(kCheckpointVersion);
  w.put_u64(params.size());
  for (const Parameter* p : params) {
    w.put_string(p->name);
    w.put_u32(static_cast<std::uint32_t>(p->value.rows()));
    w.put_u32(static_cast<std::uint32_t>(p->value.cols()));
    for (double x : p->value.data()) w.put_f64(x);
  }
  return w.take();
}

std::vector<NamedMatrix> decode_checkpoint(std::span<const char> bytes) {
  ByteReader in(bytes);
  if (in.remaining() < kMagic.size() || in.get_bytes(kMagic.size()) != kMagic) {
    throw FormatError(FormatReason::BadMagic, "not an ADPK checkpoint");
  }
  const std::uint32_t version = in.get_u32();
  if (version != kCheckpointVersion) {
    throw FormatError(FormatReason::VersionMismatch, "checkpoint version " + std::to_string(version));
  }
  const std::uint64_t count = in.get_u64();
  std::vector<NamedMatrix> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedMatrix e;
    e.name = in.get_string();
    const std::uint32_t rows = in.get_u32();
    const std::uint32_t cols = in.get_u32();
    if (static_cast<std::uint64_t>(rows) * cols * 8 > in.remaining()) {
      throw FormatError(FormatReason::Truncated, e.name + " declares " + std::to_string(rows) + "x" +
                                                     std::to_string(cols));
    }
    e.value = Matrix(rows, cols);
    for (double& x : e.value.data()) x = in.get_f64();
    out.push_back(std::move(e));
  }
  if (in.remaining() != 0) {
    throw FormatError(FormatReason::TrailingBytes, std::to_string(in.remaining()) + " bytes after last entry");
  }
  return out;
}

void save_checkpoint(const ParameterList& params, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(params));
}

std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

void restore_parameters(const ParameterList& params, const std::vector<NamedMatrix>& entries) {
  std::unordered_map<std::string, const NamedMatrix*> by_name;
  for (const NamedMatrix& e : entries) by_name[e.name] = &e;
  for (Parameter* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw FormatError(FormatReason::BadValue, "checkpoint lacks " + p->name);
    const Matrix& v = it->second->value;
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw FormatError(FormatReason::DimMismatch,
                        p->name + " is " + v.shape_str() + " in checkpoint, model has " + p->value.shape_str());
    }
    p->value = v;
    p->zero_grad();
  }
}

}  // namespace emodub
