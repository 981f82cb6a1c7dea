#include "wyflow/io.hpp"

#include <charconv>
#include <sstream>

#include "json.hpp"

namespace wyflow {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

const std::string& diagnostics_header() {
  static const std::string header =
      "step,t,dt,volume,r,dr_dt_residual,min_R,max_R,l1,l2,lp_small,lp_big,sup_R_minus_r,energy,w_min,w_max";
  return header;
}

std::string diagnostics_line(const DiagnosticsRow& row) {
  std::string line = std::to_string(row.step);
  for (double v : {row.t, row.dt, row.volume, row.r, row.dr_dt_residual, row.min_R, row.max_R, row.l1, row.l2,
                   row.lp_small, row.lp_big, row.sup_R_minus_r, row.energy, row.w_min, row.w_max}) {
    line += ',';
    line += format_double(v);
  }
  return line;
}

void TrajectoryRecorder::offer(const DiagnosticsRow& row, const FlowState& state) {
  history.emplace_back(row.t, row.r);
  if (samples.empty() || row.sup_R_minus_r <= 0.8 * last_recorded_) {
    samples.push_back({state.t, state.w, state.r});
    last_recorded_ = row.sup_R_minus_r;
    last_t_ = state.t;
    last_step_ = state.step;
  }
}

void TrajectoryRecorder::finish(const FlowState& state) {
  if (state.step != last_step_ || samples.empty()) {
    samples.push_back({state.t, state.w, state.r});
    last_t_ = state.t;
    last_step_ = state.step;
  }
}

CsvSink::CsvSink(const std::filesystem::path& path, TrajectoryRecorder* recorder)
    : out_(path), path_(path), recorder_(recorder) {
  if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  out_ << diagnostics_header() << '\n';
}

void CsvSink::consume(const DiagnosticsRow& row, const FlowState& state) {
  out_ << diagnostics_line(row) << '\n';
  if (!out_) throw IoError("write failed on " + path_.string());
  rows.push_back(row);
  if (recorder_) recorder_->offer(row, state);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed on " + path.string());
}

namespace {

json parse_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<double> number_array(const json& j, const std::string& what) {
  if (!j.is_array()) throw IoError(what + ": expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw IoError(what + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const Snapshot& s) {
  json j;
  j["config"] = json::parse(config_to_json(s.config));
  j["step"] = s.step;
  j["t"] = s.t;
  j["r"] = s.r;
  j["termination"] = s.termination;
  j["w"] = s.w;
  write_text_file(path, j.dump(1) + "\n");
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  const json j = parse_file(path);
  Snapshot s;
  try {
    s.config = parse_config(j.at("config").dump());
    s.step = j.at("step").get<long>();
    s.t = j.at("t").get<double>();
    s.r = j.at("r").get<double>();
    s.termination = j.at("termination").get<std::string>();
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  s.w = number_array(j.at("w"), path.string() + ": w");
  return s;
}

void write_trajectory(const std::filesystem::path& path, const RunConfig& config,
                      const std::vector<TrajectorySample>& samples,
                      const std::vector<std::pair<double, double>>& history) {
  json j;
  j["config"] = json::parse(config_to_json(config));
  json arr = json::array();
  for (const auto& s : samples) {
    arr.push_back({{"t", s.t}, {"r", s.r}, {"w", std::vector<double>(s.w.values().begin(), s.w.values().end())}});
  }
  j["samples"] = std::move(arr);
  json hist = json::array();
  for (const auto& [t, r] : history) hist.push_back({t, r});
  j["history"] = std::move(hist);
  write_text_file(path, j.dump() + "\n");
}

TrajectoryFile read_trajectory(const std::filesystem::path& path) {
  const json j = parse_file(path);
  TrajectoryFile f;
  try {
    f.config = parse_config(j.at("config").dump());
    for (const auto& s : j.at("samples")) {
      f.t.push_back(s.at("t").get<double>());
      f.r.push_back(s.at("r").get<double>());
      f.w.push_back(number_array(s.at("w"), path.string() + ": samples.w"));
    }
    if (j.contains("history")) {
      for (const auto& h : j["history"]) f.history.emplace_back(h.at(0).get<double>(), h.at(1).get<double>());
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return f;
}

}  // namespace wyflow
