#include "taksie/sim/dataset.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace taksie::sim {
namespace {

constexpr std::string_view kHeader = "TAKSIE-DATA v1 obs_dim=16 act_dim=4";

void put_hex(std::string& out, double v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
  out.append(buf, 16);
}

struct Parser {
  std::istringstream in;
  std::size_t line_no = 0;
  std::size_t record = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("dataset line " + std::to_string(line_no) + " (record " + std::to_string(record) +
                             "): " + what);
  }

  bool next(std::string& line) {
    if (!std::getline(in, line)) return false;
    ++line_no;
    return true;
  }

  std::string need(const char* what) {
    std::string line;
    if (!next(line)) fail(std::string("file truncated, expected ") + what);
    return line;
  }

  template <std::size_t N>
  std::array<double, N> hex_row(const std::string& line, char tag) {
    if (line.size() != 2 + 16 * N || line[0] != tag || line[1] != ' ') {
      fail(std::string("expected '") + tag + "' row of " + std::to_string(N) + " values");
    }
    std::array<double, N> row{};
    for (std::size_t i = 0; i < N; ++i) {
      std::uint64_t bits = 0;
      for (std::size_t c = 0; c < 16; ++c) {
        const char ch = line[2 + 16 * i + c];
        int v;
        if (ch >= '0' && ch <= '9') v = ch - '0';
        else if (ch >= 'a' && ch <= 'f') v = ch - 'a' + 10;
        else fail("bad hex digit");
        bits = (bits << 4) | static_cast<std::uint64_t>(v);
      }
      row[i] = std::bit_cast<double>(bits);
    }
    return row;
  }
};

}  // namespace

std::string dataset_serialize(const std::vector<Trajectory>& trajs) {
  std::string out(kHeader);
  out += '\n';
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    const Trajectory& t = trajs[k];
    if (const auto v = trajectory_violation(t); !v.empty()) {
      throw std::invalid_argument("trajectory " + std::to_string(k) + " invalid: " + v);
    }
    if (t.command.find('\n') != std::string::npos) throw std::invalid_argument("command contains a newline");
    out += "traj " + std::to_string(k) + " task=" + std::string(task_info(t.task).name) +
           " success=" + (t.success ? "1" : "0") + " frames=" + std::to_string(t.length()) + "\n";
    out += "command " + t.command + "\n";
    for (const auto& o : t.observations) {
      out += "o ";
      for (double v : o) put_hex(out, v);
      out += '\n';
    }
    for (const auto& a : t.actions) {
      out += "a ";
      for (double v : a) put_hex(out, v);
      out += '\n';
    }
    out += "end\n";
  }
  return out;
}

std::vector<Trajectory> dataset_parse(const std::string& text) {
  Parser p{std::istringstream(text)};
  std::string line;
  if (!p.next(line) || line != kHeader) p.fail("missing header '" + std::string(kHeader) + "'");
  std::vector<Trajectory> out;
  while (p.next(line)) {
    p.record = out.size();
    std::istringstream head(line);
    std::string kw, task_kv, success_kv, frames_kv;
    std::size_t index = 0;
    if (!(head >> kw >> index >> task_kv >> success_kv >> frames_kv) || kw != "traj" ||
        task_kv.rfind("task=", 0) != 0 || success_kv.rfind("success=", 0) != 0 || frames_kv.rfind("frames=", 0) != 0) {
      p.fail("malformed record header");
    }
    if (index != out.size()) p.fail("record index out of sequence");
    Trajectory t;
    const auto task = task_from_name(task_kv.substr(5));
    if (!task) p.fail("unknown task " + task_kv.substr(5));
    t.task = *task;
    const std::string sflag = success_kv.substr(8);
    if (sflag != "0" && sflag != "1") p.fail("success flag must be 0 or 1");
    t.success = sflag == "1";
    std::size_t frames = 0;
    try {
      std::size_t used = 0;
      frames = std::stoul(frames_kv.substr(7), &used);
      if (used != frames_kv.size() - 7) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      p.fail("bad frame count");
    }
    if (frames == 0) p.fail("frame count must be positive");

    const std::string cmd = p.need("command line");
    if (cmd.rfind("command ", 0) != 0) p.fail("expected command line");
    t.command = cmd.substr(8);
    for (std::size_t i = 0; i < frames; ++i) t.observations.push_back(p.hex_row<kObsDim>(p.need("observation"), 'o'));
    for (std::size_t i = 0; i + 1 < frames; ++i) t.actions.push_back(p.hex_row<kActDim>(p.need("action"), 'a'));
    if (p.need("end") != "end") p.fail("expected 'end'");
    if (const auto v = trajectory_violation(t); !v.empty()) p.fail(v);
    out.push_back(std::move(t));
  }
  return out;
}

void dataset_write(const std::vector<Trajectory>& trajs, const std::filesystem::path& path) {
  const std::string text = dataset_serialize(trajs);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write dataset " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing dataset " + path.string());
}

std::vector<Trajectory> dataset_read(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read dataset " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return dataset_parse(ss.str());
}

}  // namespace taksie::sim
