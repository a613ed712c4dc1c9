#include "taksie/numerics/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace taksie::num {
namespace {

constexpr std::string_view kMagic = "TAKSIE-CKPT v1\n";

void put_double_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_double_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::string line() {
    const auto end = bytes_.find('\n', pos_);
    if (end == std::string::npos) throw std::runtime_error("checkpoint truncated: missing line terminator");
    std::string s = bytes_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return s;
  }

  const char* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw std::runtime_error("checkpoint truncated: payload shorter than declared");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ParameterSet& params) {
  std::string out(kMagic);
  out += "version " + std::to_string(params.version()) + " entries " + std::to_string(params.count()) + "\n";
  for (const auto& [name, t] : params) {
    if (name.empty() || name.find_first_of(" \n") != std::string::npos) {
      throw std::invalid_argument("parameter name not serializable: '" + name + "'");
    }
    out += name + " " + std::to_string(t.rank());
    for (std::size_t d : t.shape()) out += " " + std::to_string(d);
    out += "\n";
    for (double v : t.data()) put_double_le(out, v);
  }
  return out;
}

ParameterSet deserialize_checkpoint(const std::string& bytes) {
  if (bytes.compare(0, kMagic.size(), kMagic) != 0) throw std::runtime_error("not a TAKSIE-CKPT v1 file");
  Reader r(bytes);
  r.line();
  std::istringstream header(r.line());
  std::string kw_version, kw_entries;
  int version = 0;
  std::size_t count = 0;
  if (!(header >> kw_version >> version >> kw_entries >> count) || kw_version != "version" ||
      kw_entries != "entries") {
    throw std::runtime_error("malformed checkpoint header");
  }
  ParameterSet params(version);
  for (std::size_t e = 0; e < count; ++e) {
    std::istringstream rec(r.line());
    std::string name;
    std::size_t rank = 0;
    if (!(rec >> name >> rank) || rank == 0) throw std::runtime_error("malformed checkpoint entry " + std::to_string(e));
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      if (!(rec >> d) || d == 0) throw std::runtime_error("malformed shape for checkpoint entry " + name);
      n *= d;
    }
    const char* p = r.take(n * 8);
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = get_double_le(p + 8 * i);
    params.add(name, Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw std::runtime_error("trailing bytes after checkpoint entries");
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  const std::string bytes = serialize_checkpoint(params);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace taksie::num
