#include "h3trans/numeric/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "h3trans/errors.hpp"

namespace h3t::nc {

namespace {

constexpr char kMagic[8] = {'H', '3', 'T', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void u64(std::uint64_t x) { out_.write(reinterpret_cast<const char*>(&x), sizeof x); }
  void f64(double x) { out_.write(reinterpret_cast<const char*>(&x), sizeof x); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void tensors(const std::map<std::string, Tensor2>& ts) {
    u64(ts.size());
    for (const auto& [name, t] : ts) {
      str(name);
      u64(static_cast<std::uint64_t>(t.rows()));
      u64(static_cast<std::uint64_t>(t.cols()));
      out_.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}
  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw DataError(source_ + ": truncated checkpoint");
  }
  std::uint64_t u64() {
    std::uint64_t x;
    bytes(reinterpret_cast<char*>(&x), sizeof x);
    return x;
  }
  double f64() {
    double x;
    bytes(reinterpret_cast<char*>(&x), sizeof x);
    return x;
  }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (1ULL << 34)) throw DataError(source_ + ": corrupt string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::map<std::string, Tensor2> tensors() {
    std::map<std::string, Tensor2> out;
    const std::uint64_t n = u64();
    for (std::uint64_t k = 0; k < n; ++k) {
      std::string name = str();
      const auto rows = static_cast<Index>(u64());
      const auto cols = static_cast<Index>(u64());
      if (rows < 0 || cols < 0 || rows * cols > (Index{1} << 32)) throw DataError(source_ + ": corrupt tensor shape");
      Tensor2 t(rows, cols);
      bytes(reinterpret_cast<char*>(t.data()), static_cast<std::size_t>(t.size()) * sizeof(double));
      out.emplace(std::move(name), std::move(t));
    }
    return out;
  }

 private:
  std::istream& in_;
  std::string source_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  Writer w(out);
  w.str(ckpt.header);
  w.u64(ckpt.step);
  w.tensors(ckpt.params.entries());
  w.f64(ckpt.adam.config.lr);
  w.f64(ckpt.adam.config.beta1);
  w.f64(ckpt.adam.config.beta2);
  w.f64(ckpt.adam.config.eps);
  w.u64(ckpt.adam.step);
  w.tensors(ckpt.adam.m);
  w.tensors(ckpt.adam.v);
  w.u64(ckpt.extras.size());
  for (const auto& [k, v] : ckpt.extras) {
    w.str(k);
    w.str(v);
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string* expected_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (in.gcount() != sizeof magic || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw DataError(path.string() + ": not a checkpoint file");
  Reader r(in, path.string());
  Checkpoint c;
  c.header = r.str();
  if (expected_header && *expected_header != c.header)
    throw ConfigError(path.string() + ": checkpoint was written for a different model configuration");
  c.step = r.u64();
  for (auto& [name, t] : r.tensors()) c.params.add(name, std::move(t));
  c.adam.config.lr = r.f64();
  c.adam.config.beta1 = r.f64();
  c.adam.config.beta2 = r.f64();
  c.adam.config.eps = r.f64();
  c.adam.step = r.u64();
  c.adam.m = r.tensors();
  c.adam.v = r.tensors();
  const std::uint64_t n = r.u64();
  for (std::uint64_t k = 0; k < n; ++k) {
    std::string key = r.str();
    c.extras.emplace(std::move(key), r.str());
  }
  return c;
}

}  // namespace h3t::nc
