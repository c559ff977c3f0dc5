#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "relaynet/error.hpp"
#include "relaynet/opt.hpp"
#include "relaynet/sim.hpp"
#include "relaynet/throughput.hpp"

namespace relaynet {

// Shortest round-trip decimal form; independent of the C++ locale.
inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string format_number(std::uint64_t x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::initializer_list<std::string_view> header) : out_(out) {
    row_strings(std::vector<std::string>(header.begin(), header.end()));
  }

  class Row {
   public:
    explicit Row(std::ostream& out) : out_(out) {}
    Row(const Row&) = delete;
    ~Row() { out_ << '\n'; }
    Row& operator<<(double x) { return cell(format_number(x)); }
    Row& operator<<(std::uint64_t x) { return cell(format_number(x)); }
    Row& operator<<(std::string_view s) { return cell(std::string(s)); }
    Row& operator<<(const char* s) { return cell(s); }

   private:
    Row& cell(const std::string& s) {
      if (!first_) out_ << ',';
      first_ = false;
      out_ << s;
      return *this;
    }
    std::ostream& out_;
    bool first_ = true;
  };

  Row row() { return Row(out_); }

 private:
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  std::ostream& out_;
};

// Opens `path` for writing, creating parent directories.
inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("out", "cannot write " + path.string());
  return out;
}

inline void write_sim_csv(std::ostream& out, const SimResult& r) {
  CsvWriter w(out, {"buffer", "threshold", "prob", "std_err"});
  for (std::size_t b = 0; b < r.buffers.size(); ++b)
    for (std::size_t k = 0; k < r.thresholds[b].size(); ++k)
      w.row() << r.buffers[b] << r.thresholds[b][k] << r.overflow_prob[b][k] << r.std_error[b][k];
}

// Unusable fits are listed with empty numeric cells.
inline void write_fit_csv(std::ostream& out, const SimResult& r) {
  CsvWriter w(out, {"buffer", "slope", "intercept", "n_points"});
  for (std::size_t b = 0; b < r.buffers.size(); ++b) {
    const SlopeFit& f = r.fits[b];
    if (f.usable)
      w.row() << r.buffers[b] << f.slope << f.intercept
              << static_cast<std::uint64_t>(f.fit_range.size());
    else
      w.row() << r.buffers[b] << "" << "" << std::uint64_t{0};
  }
}

inline void write_region_csv(std::ostream& out, const RegionFrontier& f) {
  CsvWriter w(out, {"r1", "r2", "tau", "rho", "delta"});
  for (const auto& p : f.points) w.row() << p.r1 << p.r2 << p.tau << p.rho << p.delta;
}

inline void write_throughput_csv(std::ostream& out, const ThroughputResult& r) {
  CsvWriter w(out, {"source", "arrival_rate", "bottleneck"});
  for (std::size_t j = 0; j < r.arrival_rates.size(); ++j)
    w.row() << static_cast<std::uint64_t>(j + 1) << r.arrival_rates[j] << to_string(r.bottleneck[j]);
}

inline void write_fd_throughput_csv(std::ostream& out, const FdThroughputResult& r) {
  CsvWriter w(out, {"source", "arrival_rate", "bottleneck", "case", "theta_bar", "theta_star"});
  for (std::size_t j = 0; j < r.throughput.arrival_rates.size(); ++j) {
    auto row = w.row();
    row << static_cast<std::uint64_t>(j + 1) << r.throughput.arrival_rates[j]
        << to_string(r.throughput.bottleneck[j]);
    if (j < r.cases.size()) {
      const auto& c = r.cases[j];
      row << to_string(c.case_id);
      if (c.theta_bar) row << *c.theta_bar; else row << "";
      if (c.theta_star) row << *c.theta_star; else row << "";
    } else {
      row << "" << "" << "";
    }
  }
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& s) {
  CsvWriter w(out, {s.axis, "value"});
  for (std::size_t i = 0; i < s.grid.size(); ++i) w.row() << s.grid[i] << s.values[i];
}

}  // namespace relaynet
