#include "mcdbn/checkpoint.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <vector>

#include "mcdbn/errors.hpp"

namespace mcdbn {
namespace {

constexpr char kMagic[4] = {'M', 'C', 'D', 'B'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

// Bounds-checked little-endian cursor over the whole file image.
struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) {
      throw CheckpointError("truncated checkpoint: need " + std::to_string(n) +
                            " bytes at offset " + std::to_string(pos) + ", file has " +
                            std::to_string(buf.size()));
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

int decoder_kind_index(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::kLstm: return 0;
    case DecoderKind::kTransformer: return 1;
    case DecoderKind::kLinear: return 2;
  }
  throw DomainError("unknown decoder kind");
}

DecoderKind decoder_kind_at(long long v) {
  switch (v) {
    case 0: return DecoderKind::kLstm;
    case 1: return DecoderKind::kTransformer;
    case 2: return DecoderKind::kLinear;
  }
  throw CheckpointError("invalid decoder kind code " + std::to_string(v));
}

Mat scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return m;
}

double meta_scalar(const std::map<std::string, Mat>& tensors, const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw CheckpointError("missing tensor '" + name + "'");
  if (it->second.rows() != 1 || it->second.cols() != 1)
    throw CheckpointError("tensor '" + name + "' must be 1x1");
  return it->second(0, 0);
}

long long meta_int(const std::map<std::string, Mat>& tensors, const std::string& name) {
  double v = meta_scalar(tensors, name);
  long long i = std::llround(v);
  if (static_cast<double>(i) != v)
    throw CheckpointError("tensor '" + name + "' holds non-integer value");
  return i;
}

}  // namespace

void save_tensors(const std::string& path, const std::map<std::string, Mat>& tensors) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, mat] : tensors) {  // std::map iterates in sorted order
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put_u32(out, 2);
    put_u64(out, static_cast<std::uint64_t>(mat.rows()));
    put_u64(out, static_cast<std::uint64_t>(mat.cols()));
    for (Eigen::Index r = 0; r < mat.rows(); ++r)
      for (Eigen::Index c = 0; c < mat.cols(); ++c) put_f64(out, mat(r, c));
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw CheckpointError("cannot open '" + path + "' for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw CheckpointError("failed writing '" + path + "'");
}

std::map<std::string, Mat> load_tensors(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw CheckpointError("cannot open '" + path + "' for reading");
  std::string buf((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  Reader in{buf};
  if (in.bytes(4) != std::string(kMagic, 4))
    throw CheckpointError("bad magic in '" + path + "'");
  std::uint32_t version = in.u32();
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  std::uint32_t count = in.u32();

  std::map<std::string, Mat> tensors;
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = in.bytes(in.u32());
    std::uint32_t ndims = in.u32();
    if (ndims != 2)
      throw CheckpointError("tensor '" + name + "' has " + std::to_string(ndims) +
                            " dims, expected 2");
    std::uint64_t rows = in.u64();
    std::uint64_t cols = in.u64();
    if (rows > (1u << 30) || cols > (1u << 30))
      throw CheckpointError("tensor '" + name + "' has implausible dims");
    Mat mat(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < mat.rows(); ++r)
      for (Eigen::Index c = 0; c < mat.cols(); ++c) mat(r, c) = in.f64();
    if (!tensors.emplace(name, std::move(mat)).second)
      throw CheckpointError("duplicate tensor '" + name + "'");
  }
  if (in.pos != buf.size())
    throw CheckpointError("trailing bytes after tensor " + std::to_string(count) +
                          " at offset " + std::to_string(in.pos));
  return tensors;
}

void save_checkpoint(const std::string& path, const McdbnModel& model) {
  std::map<std::string, Mat> tensors;
  McdbnModel copy = model;
  visit_params(copy, [&](const std::string& name, Mat& m) { tensors[name] = m; });

  const ModelShape& s = model.shape;
  tensors["meta.d_x"] = scalar(static_cast<double>(s.d_x));
  tensors["meta.d_y"] = scalar(static_cast<double>(s.d_y));
  Mat hidden(1, static_cast<Eigen::Index>(s.encoder_hidden.size()));
  for (std::size_t i = 0; i < s.encoder_hidden.size(); ++i)
    hidden(0, static_cast<Eigen::Index>(i)) = static_cast<double>(s.encoder_hidden[i]);
  tensors["meta.encoder_hidden"] = hidden;
  tensors["meta.decoder_x"] = scalar(decoder_kind_index(s.decoder_x));
  tensors["meta.decoder_y"] = scalar(decoder_kind_index(s.decoder_y));
  tensors["meta.decoder_dim"] = scalar(static_cast<double>(s.decoder_dim));
  tensors["meta.decoder_heads"] = scalar(static_cast<double>(s.decoder_heads));
  tensors["meta.heads"] = scalar(static_cast<double>(s.heads));
  tensors["meta.d_k"] = scalar(static_cast<double>(s.d_k));
  tensors["meta.d_fusion"] = scalar(static_cast<double>(s.d_fusion));
  tensors["meta.task"] = scalar(s.task == TaskKind::kClassification ? 1.0 : 0.0);
  tensors["meta.classes"] = scalar(static_cast<double>(s.classes));
  tensors["meta.visible_kind"] =
      scalar(s.visible_kind == VisibleKind::kGaussianStandardized ? 1.0 : 0.0);

  save_tensors(path, tensors);
}

McdbnModel load_checkpoint(const std::string& path) {
  std::map<std::string, Mat> tensors = load_tensors(path);
  std::set<std::string> used;
  auto take_int = [&](const std::string& name) {
    used.insert(name);
    return meta_int(tensors, name);
  };

  ModelShape shape;
  shape.d_x = take_int("meta.d_x");
  shape.d_y = take_int("meta.d_y");
  {
    used.insert("meta.encoder_hidden");
    auto it = tensors.find("meta.encoder_hidden");
    if (it == tensors.end()) throw CheckpointError("missing tensor 'meta.encoder_hidden'");
    if (it->second.rows() != 1)
      throw CheckpointError("tensor 'meta.encoder_hidden' must have one row");
    shape.encoder_hidden.clear();
    for (Eigen::Index c = 0; c < it->second.cols(); ++c) {
      double v = it->second(0, c);
      long long i = std::llround(v);
      if (static_cast<double>(i) != v || i <= 0)
        throw CheckpointError("tensor 'meta.encoder_hidden' holds invalid layer size");
      shape.encoder_hidden.push_back(static_cast<Eigen::Index>(i));
    }
  }
  shape.decoder_x = decoder_kind_at(take_int("meta.decoder_x"));
  shape.decoder_y = decoder_kind_at(take_int("meta.decoder_y"));
  shape.decoder_dim = take_int("meta.decoder_dim");
  shape.decoder_heads = take_int("meta.decoder_heads");
  shape.heads = take_int("meta.heads");
  shape.d_k = take_int("meta.d_k");
  shape.d_fusion = take_int("meta.d_fusion");
  long long task = take_int("meta.task");
  if (task != 0 && task != 1)
    throw CheckpointError("invalid task code " + std::to_string(task));
  shape.task = task == 1 ? TaskKind::kClassification : TaskKind::kRegression;
  shape.classes = take_int("meta.classes");
  long long visible = take_int("meta.visible_kind");
  if (visible != 0 && visible != 1)
    throw CheckpointError("invalid visible kind code " + std::to_string(visible));
  shape.visible_kind =
      visible == 1 ? VisibleKind::kGaussianStandardized : VisibleKind::kBernoulliProb;

  Rng rng(0);
  McdbnModel model = build_model(shape, rng);
  visit_params(model, [&](const std::string& name, Mat& m) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw CheckpointError("missing tensor '" + name + "'");
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw CheckpointError("tensor '" + name + "' is " + std::to_string(it->second.rows()) +
                            "x" + std::to_string(it->second.cols()) + ", model expects " +
                            std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    m = it->second;
    used.insert(name);
  });
  for (const auto& [name, mat] : tensors) {
    if (!used.count(name)) throw CheckpointError("unexpected tensor '" + name + "'");
  }
  return model;
}

}  // namespace mcdbn
