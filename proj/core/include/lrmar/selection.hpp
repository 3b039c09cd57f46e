#ifndef LRMAR_SELECTION_HPP
#define LRMAR_SELECTION_HPP

#include <string>
#include <vector>

#include "lrmar/model_spec.hpp"
#include "lrmar/posteriors.hpp"
#include "lrmar/time_series.hpp"

namespace lrmar
{
namespace selection
{

// Free-energy model selection over a (P, Q) grid. Every cell is fitted
// `repetitions` times from restarts whose seeds are derived from the
// template seed and the cell coordinates, so results do not depend on task
// order or worker count. A cell counts as long as at least one repetition
// produced a model: restarts that stop at the iteration cap still carry a
// valid bound, so only fits that throw are dropped. The winner is the
// usable cell with the lowest best free energy; exact ties go to the
// smaller Q, then the smaller P.

struct Repetition
{
  int P = 0;
  int Q = 0;
  int rep = 0;
  double free_energy = 0.0;   // NaN when the fit failed
  bool converged = false;
  int iterations = 0;
  double seconds = 0.0;
  std::string error;          // empty unless the fit threw
};

struct Cell
{
  int P = 0;
  int Q = 0;
  bool usable = false;        // at least one repetition produced a model
  double best_free_energy = 0.0;
  int best_rep = -1;
  int best_iterations = 0;
};

struct SelectionGrid
{
  std::vector<int> p_values;
  std::vector<int> q_values;
  std::vector<Repetition> repetitions;  // ordered by (P index, Q index, rep)
  std::vector<Cell> cells;              // same (P, Q) order
  int best_p = 0;
  int best_q = 0;
  double best_free_energy = 0.0;
  FittedModel best_model;
};

// Restart seed for one repetition of one cell.
std::uint64_t cell_seed(std::uint64_t base, int p, int q, int rep);

// Worker count resolution: an explicit request wins, else the
// LRMAR_WORKERS environment variable, else the hardware concurrency.
int resolve_workers(int requested);

// Runs the grid with a pool of `workers` threads (resolved as above when
// workers <= 0). The template spec supplies everything except P, Q, and
// the per-repetition seed. Throws ValidationError if the grid is empty,
// repetitions < 1, or any cell is impossible for the series; throws
// NumericalError if every repetition of every cell fails.
SelectionGrid grid_select(const TimeSeries& series, const ModelSpec& tmpl,
                          const std::vector<int>& p_values,
                          const std::vector<int>& q_values,
                          int repetitions = 3, int workers = 0);

// One row per repetition with the columns
// P,Q,free_energy,converged,iterations,seconds followed by a '#' summary
// line naming the winning cell. `seconds` is wall-clock and will differ
// between runs; everything else is deterministic.
void write_grid_csv(const std::string& path, const SelectionGrid& grid);

} // namespace selection
} // namespace lrmar

#endif
