#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "wyflow/config.hpp"
#include "wyflow/flow.hpp"
#include "wyflow/spectral.hpp"

namespace wyflow {

class IoError : public Error {
 public:
  using Error::Error;
};

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// The fixed diagnostics CSV header (no trailing newline).
const std::string& diagnostics_header();
std::string diagnostics_line(const DiagnosticsRow& row);

/// Keeps the states whose sup|R - r| has dropped to 0.8 of the last kept one,
/// starting with the first state seen.  `finish` appends the final state.
class TrajectoryRecorder {
 public:
  void offer(const DiagnosticsRow& row, const FlowState& state);
  void finish(const FlowState& state);

  std::vector<TrajectorySample> samples;
  std::vector<std::pair<double, double>> history;  ///< (t, r) of every emitted row

 private:
  double last_recorded_ = 0.0;
  double last_t_ = -1.0;
  long last_step_ = -1;
};

/// Streams rows to a CSV file and feeds a trajectory recorder.
class CsvSink : public DiagnosticsSink {
 public:
  explicit CsvSink(const std::filesystem::path& path, TrajectoryRecorder* recorder = nullptr);
  void consume(const DiagnosticsRow& row, const FlowState& state) override;
  std::vector<DiagnosticsRow> rows;

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  TrajectoryRecorder* recorder_;
};

struct Snapshot {
  RunConfig config;
  long step = 0;
  double t = 0.0;
  double r = 0.0;
  std::string termination;
  std::vector<double> w;
};

void write_snapshot(const std::filesystem::path& path, const Snapshot& snapshot);
Snapshot read_snapshot(const std::filesystem::path& path);

struct TrajectoryFile {
  RunConfig config;
  std::vector<double> t;
  std::vector<double> r;
  std::vector<std::vector<double>> w;
  std::vector<std::pair<double, double>> history;
};

void write_trajectory(const std::filesystem::path& path, const RunConfig& config,
                      const std::vector<TrajectorySample>& samples,
                      const std::vector<std::pair<double, double>>& history);
TrajectoryFile read_trajectory(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace wyflow
