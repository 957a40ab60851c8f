// Config ingestion, command dispatch and report emission for the pxlap tool.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pxlap/grid.hpp"
#include "pxlap/infconv.hpp"
#include "pxlap/solver.hpp"

namespace pxl {

/// Invalid configuration; line and column are 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0, int column = 0);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitPropertyFailed = 1,
  kExitConfigError = 2,
  kExitNumericalFailure = 3,
};

struct RunConfig {
  int dim = 2;
  std::vector<Interval> bounds{{0.0, 1.0}, {0.0, 1.0}};
  std::vector<int> n_cells{32, 32};
  std::string exponent = "2";
  /// Named generator (see fixture_names) or a field file via fixture_file.
  std::string fixture = "constant";
  std::string fixture_file;
  /// 0 selects 2 for degenerate kernels and max(4, p+/(p+ - 1) + 1) otherwise.
  double q = 0.0;
  std::vector<double> eps{0.1, 0.05};
  std::optional<KernelVariant> variant;
  std::vector<double> delta{1e-2, 1e-4, 1e-6};
  std::vector<int> mollifier_j{8, 16};
  double norm_tol = 1e-10;
  SolveOptions solve{};
  /// Unset entries fall back to default_tolerances.
  std::optional<double> weak_tol;
  std::optional<double> viscosity_tol;
  std::optional<double> comparison_tol;
  int n_tests = 50;
  int n_subdomains = 6;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "pxlap_out";

  Grid grid() const;
};

/// Parses a JSON config. Unknown keys and malformed values raise ConfigError
/// carrying the line and column of the offending text where known.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

const std::vector<std::string>& commands();

/// Runs one command and writes report.json plus CSV tables into out_dir.
/// Returns an ExitCode; exceptions are mapped to codes 2 and 3.
int run(const std::string& command, const RunConfig& cfg, std::ostream& log);

/// Text header ("dim", "bounds", "n_cells" lines) followed by one value per
/// line in flat-index order (x1 varies fastest), as shortest round-trip decimals.
void write_field(const std::filesystem::path& path, const ScalarField& u);
ScalarField read_field(const std::filesystem::path& path);

/// Shortest round-trip decimal, or "inf", "-inf", "nan".
std::string format_double(double x);

}  // namespace pxl
