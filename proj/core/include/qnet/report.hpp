#pragma once

#include "qnet/model.hpp"
#include "qnet/moments.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qnet {

/// One compared quantity. Passes when |analytic - oracle| <= tolerance and
/// |analytic - sim| <= 3 sim_se, for whichever of oracle / sim are present.
struct ReportRow {
  std::string name;
  double analytic = 0.0;
  std::optional<double> oracle;
  std::optional<double> sim;
  std::optional<double> sim_se;
  double tolerance = 0.0;
  bool pass = true;
};

class RunReport {
 public:
  void add(std::string name, double analytic, std::optional<double> oracle, std::optional<double> sim,
           std::optional<double> sim_se, double tolerance);
  const std::vector<ReportRow>& rows() const { return rows_; }
  bool passed() const;
  /// Columns: quantity,analytic,oracle,sim,sim_se,tolerance,pass (absent values empty).
  void write_csv(std::ostream& out) const;

 private:
  std::vector<ReportRow> rows_;
};

struct CompareOptions {
  std::vector<unsigned> caps;
  std::size_t reps = 2000;
  std::uint64_t seed = 1;
  std::vector<double> times{1.0, 2.0};
  double tolerance = 1e-6;
  unsigned threads = 0;
  InitialCondition initial;  ///< counts empty means an empty network
};

/// Stationary moments and loss probability against the oracle; transient means
/// and expected losses against the oracle and the simulator.
RunReport compare(const ValidatedNetwork& net, const CompareOptions& opts);

}  // namespace qnet
