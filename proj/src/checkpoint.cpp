#include "cyclehash/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "cyclehash/errors.hpp"

namespace cyclehash {

static_assert(std::endian::native == std::endian::little,
              "checkpoints are written as native little-endian");

namespace {

constexpr std::array<char, 8> kMagic{'C', 'Y', 'C', 'H', 'A', 'S', 'H', '\0'};

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <class T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <class T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw FormatError(path_ + ": truncated checkpoint");
    return v;
  }
  std::string str() {
    const auto len = pod<std::uint32_t>();
    if (len > (1u << 20)) throw FormatError(path_ + ": implausible string length");
    std::string s(len, '\0');
    in_.read(s.data(), len);
    if (!in_) throw FormatError(path_ + ": truncated checkpoint");
    return s;
  }
  void doubles(std::vector<double>& out) {
    in_.read(reinterpret_cast<char*>(out.data()),
             static_cast<std::streamsize>(out.size() * sizeof(double)));
    if (!in_) throw FormatError(path_ + ": truncated checkpoint");
  }

 private:
  std::ifstream& in_;
  std::string path_;
};

}  // namespace

const Blob* Checkpoint::find(const std::string& name) const {
  auto it = std::find_if(blobs.begin(), blobs.end(),
                         [&](const Blob& b) { return b.name == name; });
  return it == blobs.end() ? nullptr : &*it;
}

const Blob& Checkpoint::require(const std::string& name) const {
  const Blob* b = find(name);
  if (!b) throw FormatError("checkpoint has no blob named '" + name + "'");
  return *b;
}

void Checkpoint::add(std::string name, const Tensor& t) {
  blobs.push_back({std::move(name), t.shape(),
                   std::vector<double>(t.values().begin(), t.values().end())});
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  w.pod(ckpt.version);
  w.pod(ckpt.bits);
  w.pod(ckpt.dim_u);
  w.pod(ckpt.dim_v);
  w.pod(ckpt.seed);
  w.pod(static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint32_t>(ckpt.blobs.size()));
  for (const auto& b : ckpt.blobs) {
    if (b.data.size() != shape_numel(b.shape)) {
      throw ShapeError("checkpoint blob '" + b.name + "' has inconsistent shape");
    }
    w.str(b.name);
    w.pod(static_cast<std::uint32_t>(b.shape.size()));
    for (auto d : b.shape) w.pod(static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(b.data.data()),
              static_cast<std::streamsize>(b.data.size() * sizeof(double)));
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw FormatError(path.string() + ": not a checkpoint file");
  Reader r(in, path.string());
  Checkpoint ckpt;
  ckpt.version = r.pod<std::uint32_t>();
  if (ckpt.version != Checkpoint::kVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(ckpt.version));
  }
  ckpt.bits = r.pod<std::uint32_t>();
  ckpt.dim_u = r.pod<std::uint32_t>();
  ckpt.dim_v = r.pod<std::uint32_t>();
  ckpt.seed = r.pod<std::uint64_t>();
  const auto n_meta = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    ckpt.meta[k] = r.str();
  }
  const auto n_blobs = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_blobs; ++i) {
    Blob b;
    b.name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    if (rank == 0 || rank > 8) throw FormatError(path.string() + ": bad blob rank");
    for (std::uint32_t k = 0; k < rank; ++k) {
      b.shape.push_back(static_cast<std::size_t>(r.pod<std::uint64_t>()));
    }
    const std::size_t count = shape_numel(b.shape);
    if (count > (std::size_t{1} << 32)) throw FormatError(path.string() + ": blob too large");
    b.data.resize(count);
    r.doubles(b.data);
    ckpt.blobs.push_back(std::move(b));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes in checkpoint");
  }
  return ckpt;
}

void store_model(Checkpoint& ckpt, const CrossModalModel& model) {
  ckpt.bits = static_cast<std::uint32_t>(model.bits);
  ckpt.dim_u = static_cast<std::uint32_t>(model.u.dim);
  ckpt.dim_v = static_cast<std::uint32_t>(model.v.dim);
  for (const auto& [name, t] : model.named_parameters()) ckpt.add(name, t);
}

void load_model(const Checkpoint& ckpt, CrossModalModel& model) {
  if (ckpt.bits != model.bits || ckpt.dim_u != model.u.dim || ckpt.dim_v != model.v.dim) {
    throw FormatError("checkpoint dimensions do not match the model");
  }
  for (auto& [name, t] : model.named_parameters()) {
    const Blob& b = ckpt.require(name);
    if (b.shape != t.shape()) {
      throw FormatError("checkpoint blob '" + name + "' has shape " + shape_string(b.shape) +
                        ", model expects " + shape_string(t.shape()));
    }
    Tensor handle = t;
    std::copy(b.data.begin(), b.data.end(), handle.mutable_values().begin());
  }
}

}  // namespace cyclehash
