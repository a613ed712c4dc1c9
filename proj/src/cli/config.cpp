#include "taksie/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace taksie::cli {
namespace {

enum class Kind { u64, size, real, path, modes };

std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::u64:
    case Kind::size: return "unsigned integer";
    case Kind::real: return "real number";
    case Kind::path: return "path";
    case Kind::modes: return "comma-separated mode list";
  }
  return "?";
}

struct Field {
  std::string key;
  Kind kind;
  std::function<void*(Config&)> ref;
};

template <class F>
Field field(std::string key, Kind kind, F f) {
  return {std::move(key), kind, [f](Config& c) -> void* { return static_cast<void*>(&f(c)); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      field("seed", Kind::u64, [](Config& c) -> auto& { return c.seed; }),
      field("out", Kind::path, [](Config& c) -> auto& { return c.out; }),
      field("demos.per_task", Kind::size, [](Config& c) -> auto& { return c.demos_per_task; }),
      field("demos.speed_min", Kind::real, [](Config& c) -> auto& { return c.speed_min; }),
      field("demos.speed_max", Kind::real, [](Config& c) -> auto& { return c.speed_max; }),
      field("repr.steps", Kind::size, [](Config& c) -> auto& { return c.repr.steps; }),
      field("repr.batch", Kind::size, [](Config& c) -> auto& { return c.repr.batch; }),
      field("repr.tau", Kind::real, [](Config& c) -> auto& { return c.repr.tau; }),
      field("repr.lr", Kind::real, [](Config& c) -> auto& { return c.repr.lr; }),
      field("select.smooth_frac", Kind::real, [](Config& c) -> auto& { return c.selection.smooth_frac; }),
      field("select.delta1", Kind::real, [](Config& c) -> auto& { return c.selection.delta1; }),
      field("select.delta2", Kind::real, [](Config& c) -> auto& { return c.selection.delta2; }),
      field("select.min_interval", Kind::size, [](Config& c) -> auto& { return c.selection.min_interval; }),
      field("gen.steps", Kind::size, [](Config& c) -> auto& { return c.gen.steps; }),
      field("gen.batch", Kind::size, [](Config& c) -> auto& { return c.gen.batch; }),
      field("gen.lr", Kind::real, [](Config& c) -> auto& { return c.gen.lr; }),
      field("gen.drop_text", Kind::real, [](Config& c) -> auto& { return c.gen.drop_text; }),
      field("gen.drop_image", Kind::real, [](Config& c) -> auto& { return c.gen.drop_image; }),
      field("policy.steps", Kind::size, [](Config& c) -> auto& { return c.policy.steps; }),
      field("policy.batch", Kind::size, [](Config& c) -> auto& { return c.policy.batch; }),
      field("policy.lr", Kind::real, [](Config& c) -> auto& { return c.policy.lr; }),
      field("policy.k_min", Kind::size, [](Config& c) -> auto& { return c.policy.window.k_min; }),
      field("policy.k_max", Kind::size, [](Config& c) -> auto& { return c.policy.window.k_max; }),
      field("policy.k_delta", Kind::size, [](Config& c) -> auto& { return c.policy.window.k_delta; }),
      field("lcbc.steps", Kind::size, [](Config& c) -> auto& { return c.lcbc_steps; }),
      field("guidance.image_scale", Kind::real, [](Config& c) -> auto& { return c.suite.rollout.guidance.image_scale; }),
      field("guidance.text_scale", Kind::real, [](Config& c) -> auto& { return c.suite.rollout.guidance.text_scale; }),
      field("guidance.ddim_steps", Kind::size, [](Config& c) -> auto& { return c.suite.rollout.guidance.ddim_steps; }),
      field("eval.delta", Kind::real, [](Config& c) -> auto& { return c.suite.rollout.evaluator.delta; }),
      field("eval.lambda", Kind::size, [](Config& c) -> auto& { return c.suite.rollout.evaluator.lambda; }),
      field("eval.episode_cap", Kind::size, [](Config& c) -> auto& { return c.suite.rollout.episode_cap; }),
      field("eval.interval", Kind::size, [](Config& c) -> auto& { return c.suite.rollout.interval; }),
      field("eval.seeds", Kind::size, [](Config& c) -> auto& { return c.suite.seeds; }),
      field("eval.chains", Kind::size, [](Config& c) -> auto& { return c.suite.chains; }),
      field("eval.first_seed", Kind::u64, [](Config& c) -> auto& { return c.suite.first_seed; }),
      field("eval.modes", Kind::modes, [](Config& c) -> auto& { return c.suite.modes; }),
  };
  return f;
}

const Field& find(const std::string& key) {
  const std::string k = canonical_key(key);
  for (const auto& f : fields()) {
    if (f.key == k) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

[[noreturn]] void mismatch(const Field& f, const std::string& v) {
  throw ConfigError("config key '" + f.key + "' expects type " + std::string(kind_name(f.kind)) + ", got '" + v + "'");
}

std::uint64_t parse_u64(const Field& f, const std::string& v) {
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) mismatch(f, v);
  return x;
}

double parse_real(const Field& f, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    mismatch(f, v);
  }
  if (used != v.size() || !std::isfinite(x)) mismatch(f, v);
  return x;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const auto keys = [] {
    std::vector<std::pair<std::string, std::string>> k;
    for (const auto& f : fields()) k.emplace_back(f.key, std::string(kind_name(f.kind)));
    return k;
  }();
  return keys;
}

std::string canonical_key(const std::string& key) {
  static const std::map<std::string, std::string> alias = {
      {"lambda", "eval.lambda"}, {"delta", "eval.delta"}, {"modes", "eval.modes"},
      {"seeds", "eval.seeds"},   {"chains", "eval.chains"}, {"interval", "eval.interval"},
  };
  const auto it = alias.find(key);
  return it == alias.end() ? key : it->second;
}

void set_value(Config& c, const std::string& key, const std::string& raw) {
  const Field& f = find(key);
  const std::string v = trim(raw);
  void* p = f.ref(c);
  switch (f.kind) {
    case Kind::u64: *static_cast<std::uint64_t*>(p) = parse_u64(f, v); break;
    case Kind::size: *static_cast<std::size_t*>(p) = static_cast<std::size_t>(parse_u64(f, v)); break;
    case Kind::real: *static_cast<double*>(p) = parse_real(f, v); break;
    case Kind::path:
      if (v.empty()) mismatch(f, v);
      *static_cast<std::filesystem::path*>(p) = v;
      break;
    case Kind::modes: {
      std::vector<rollout::Mode> modes;
      if (v == "all") {
        modes.assign(rollout::kAllModes.begin(), rollout::kAllModes.end());
      } else {
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) {
          const auto m = rollout::mode_from_name(trim(item));
          if (!m) throw ConfigError("config key 'eval.modes': unknown mode '" + trim(item) + "'");
          modes.push_back(*m);
        }
      }
      if (modes.empty()) mismatch(f, v);
      *static_cast<std::vector<rollout::Mode>*>(p) = modes;
      break;
    }
  }
}

std::string get_value(const Config& c, const std::string& key) {
  const Field& f = find(key);
  void* p = f.ref(const_cast<Config&>(c));
  std::ostringstream os;
  os.precision(17);
  switch (f.kind) {
    case Kind::u64: os << *static_cast<std::uint64_t*>(p); break;
    case Kind::size: os << *static_cast<std::size_t*>(p); break;
    case Kind::real: {
      char buf[32];
      const auto r = std::to_chars(buf, buf + sizeof buf, *static_cast<double*>(p));
      os << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
      break;
    }
    case Kind::path: os << static_cast<std::filesystem::path*>(p)->string(); break;
    case Kind::modes: {
      const auto& m = *static_cast<std::vector<rollout::Mode>*>(p);
      for (std::size_t i = 0; i < m.size(); ++i) os << (i ? "," : "") << rollout::mode_name(m[i]);
      break;
    }
  }
  return os.str();
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(is, line)) {
    ++no;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(no) + ": expected 'key = value'");
    out[canonical_key(trim(t.substr(0, eq)))] = trim(t.substr(eq + 1));
  }
  return out;
}

Config parse_config(const std::string& file_text, const std::map<std::string, std::string>& overrides) {
  Config c;
  for (const auto& [k, v] : parse_kv(file_text)) set_value(c, k, v);
  for (const auto& [k, v] : overrides) set_value(c, k, v);
  c.repr.seed = c.gen.seed = c.policy.seed = c.seed;
  if (!(c.speed_min > 0.0 && c.speed_min <= c.speed_max)) throw ConfigError("demo speeds need 0 < speed_min <= speed_max");
  if (const auto v = select::params_violation(c.selection); !v.empty()) throw ConfigError(v);
  if (const auto v = progress::evaluator_violation(c.suite.rollout.evaluator); !v.empty()) throw ConfigError(v);
  return c;
}

Config load_config(const std::filesystem::path* file, const std::map<std::string, std::string>& overrides) {
  std::string text;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot read config file " + file->string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config(text, overrides);
}

std::string dump_config(const Config& c) {
  std::ostringstream os;
  for (const auto& [k, type] : config_keys()) os << k << " = " << get_value(c, k) << '\n';
  return os.str();
}

}  // namespace taksie::cli
