#include "hfe/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hfe/config_file.hpp"
#include "hfe/error.hpp"

namespace hfe {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_floats(std::span<const float> v) {
    const auto* p = reinterpret_cast<const char*>(v.data());
    bytes_.insert(bytes_.end(), p, p + v.size_bytes());
  }
  void put_bytes(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get(const std::string& field) {
    need(sizeof(T), field);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_bytes(std::size_t n, const std::string& field) {
    need(n, field);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<float> get_floats(std::uint64_t n, const std::string& field) {
    if (n > remaining() / sizeof(float)) {
      throw CheckpointError(field, "truncated (needs " + std::to_string(n) +
                                       " floats, " + std::to_string(remaining()) +
                                       " bytes left)");
    }
    std::vector<float> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const std::string& field) const {
    if (n > remaining()) {
      throw CheckpointError(field, "truncated at byte " + std::to_string(pos_));
    }
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

void copy_into(const std::vector<Tensor>& src, std::vector<Tensor>& dst) {
  if (src.size() != dst.size()) {
    throw CheckpointError("tensors", "expected " + std::to_string(dst.size()) +
                                         " tensors, found " + std::to_string(src.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (src[i].shape() != dst[i].shape()) {
      throw CheckpointError("tensors", "tensor " + std::to_string(i) + " has shape " +
                                           src[i].shape().str() + ", expected " +
                                           dst[i].shape().str());
    }
    auto in = src[i].data();
    auto out = dst[i].mutable_data();
    std::copy(in.begin(), in.end(), out.begin());
  }
}

}  // namespace

void write_container(const std::filesystem::path& path,
                     const CheckpointContainer& c) {
  if (c.magic.size() != 4) throw ContractViolation("checkpoint magic must be 4 bytes");
  Writer w;
  w.put_bytes(c.magic);
  w.put<std::uint32_t>(c.version);
  w.put<std::uint64_t>(c.header.size());
  w.put_bytes(c.header);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.tensors.size()));
  for (const Tensor& t : c.tensors) {
    const Shape& s = t.shape();
    w.put<std::uint64_t>(s.n);
    w.put<std::uint64_t>(s.c);
    w.put<std::uint64_t>(s.h);
    w.put<std::uint64_t>(s.w);
    w.put_floats(t.data());
  }
  w.put<std::uint8_t>(c.adam ? 1 : 0);
  if (c.adam) {
    const AdamState& a = *c.adam;
    w.put<float>(a.hyper.lr);
    w.put<float>(a.hyper.beta1);
    w.put<float>(a.hyper.beta2);
    w.put<float>(a.hyper.eps);
    w.put<std::uint64_t>(a.t);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(a.m.size()));
    for (std::size_t i = 0; i < a.m.size(); ++i) {
      w.put<std::uint64_t>(a.m[i].size());
      w.put_floats(a.m[i]);
      w.put_floats(a.v[i]);
    }
  }
  w.put<std::uint64_t>(c.step);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path.string(), "cannot open for writing");
  f.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!f) throw IoError(path.string(), "write failed");
}

CheckpointContainer read_container(const std::filesystem::path& path,
                                   const std::string& expected_magic) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path.string(), "cannot open checkpoint");
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(f), {}));

  CheckpointContainer c;
  c.magic = r.get_bytes(4, "magic");
  if (c.magic != expected_magic) {
    throw CheckpointError("magic", "expected '" + expected_magic + "', found '" +
                                       c.magic + "'");
  }
  c.version = r.get<std::uint32_t>("version");
  if (c.version != kCheckpointVersion) {
    throw CheckpointError("version", "unsupported version " + std::to_string(c.version) +
                                         " (expected " +
                                         std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = r.get<std::uint64_t>("header");
  if (header_len > r.remaining()) throw CheckpointError("header", "truncated");
  c.header = r.get_bytes(header_len, "header");
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string field = "tensor " + std::to_string(i);
    Shape s;
    s.n = r.get<std::uint64_t>(field);
    s.c = r.get<std::uint64_t>(field);
    s.h = r.get<std::uint64_t>(field);
    s.w = r.get<std::uint64_t>(field);
    // Guard the product against overflow before trusting it.
    std::uint64_t n = 1;
    for (std::uint64_t e : {s.n, s.c, s.h, s.w}) {
      if (e != 0 && n > r.remaining() / e) throw CheckpointError(field, "truncated");
      n *= e;
    }
    c.tensors.push_back(Tensor::from_data(s, r.get_floats(n, field)));
  }
  const auto has_adam = r.get<std::uint8_t>("adam flag");
  if (has_adam > 1) throw CheckpointError("adam flag", "invalid value");
  if (has_adam) {
    AdamState a;
    a.hyper.lr = r.get<float>("adam");
    a.hyper.beta1 = r.get<float>("adam");
    a.hyper.beta2 = r.get<float>("adam");
    a.hyper.eps = r.get<float>("adam");
    a.t = r.get<std::uint64_t>("adam");
    const auto m = r.get<std::uint32_t>("adam");
    for (std::uint32_t i = 0; i < m; ++i) {
      const auto len = r.get<std::uint64_t>("adam moments");
      a.m.push_back(r.get_floats(len, "adam moments"));
      a.v.push_back(r.get_floats(len, "adam moments"));
    }
    c.adam = std::move(a);
  }
  c.step = r.get<std::uint64_t>("step");
  if (r.remaining() != 0) {
    throw CheckpointError("trailer", std::to_string(r.remaining()) + " unexpected bytes");
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const AdamState* adam, std::uint64_t step) {
  CheckpointContainer c;
  c.magic = "HFAE";
  c.header = network_config_to_ini(params.config);
  c.tensors = params.tensors();
  if (adam) c.adam = *adam;
  c.step = step;
  write_container(path, c);
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  CheckpointContainer c = read_container(path, "HFAE");
  NetworkConfig config;
  try {
    config = network_config_from_ini(c.header);
    config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError("header", e.what());
  }
  LoadedModel out;
  out.params = build(config);
  std::vector<Tensor> dst = out.params.tensors();
  copy_into(c.tensors, dst);
  if (c.adam) {
    const std::vector<Tensor> trainable = out.params.trainable();
    if (c.adam->m.size() != trainable.size()) {
      throw CheckpointError("adam", "tracks " + std::to_string(c.adam->m.size()) +
                                        " tensors, model trains " +
                                        std::to_string(trainable.size()));
    }
    for (std::size_t i = 0; i < trainable.size(); ++i) {
      if (c.adam->m[i].size() != trainable[i].numel()) {
        throw CheckpointError("adam", "moment " + std::to_string(i) + " has length " +
                                          std::to_string(c.adam->m[i].size()));
      }
    }
  }
  out.adam = std::move(c.adam);
  out.step = c.step;
  return out;
}

LoadedModel load_checkpoint_for(const std::filesystem::path& path,
                                const NetworkConfig& expected) {
  LoadedModel m = load_checkpoint(path);
  NetworkConfig topology = expected;
  topology.seed = m.params.config.seed;  // initialisation seed is not topology
  if (!(m.params.config == topology)) {
    throw CheckpointError("config", "checkpoint topology\n" +
                                        network_config_to_ini(m.params.config) +
                                        "does not match\n" +
                                        network_config_to_ini(expected));
  }
  return m;
}

}  // namespace hfe
