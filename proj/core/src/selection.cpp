#include "lrmar/selection.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

#include "lrmar/csv.hpp"
#include "lrmar/errors.hpp"
#include "lrmar/vb_engine.hpp"

namespace lrmar
{
namespace selection
{

namespace
{

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

} // namespace

std::uint64_t cell_seed(std::uint64_t base, int p, int q, int rep)
{
  std::uint64_t h = splitmix64(base ^ 0x1CE11u);
  h = splitmix64(h ^ static_cast<std::uint64_t>(p));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(q) << 20));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(rep) << 40));
  return h;
}

int resolve_workers(int requested)
{
  if (requested > 0)
    return requested;
  if (const char* env = std::getenv("LRMAR_WORKERS"))
  {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v > 0)
      return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

SelectionGrid grid_select(const TimeSeries& series, const ModelSpec& tmpl,
                          const std::vector<int>& p_values,
                          const std::vector<int>& q_values, int repetitions,
                          int workers)
{
  validate(series);
  if (p_values.empty() || q_values.empty())
    throw ValidationError("selection grid is empty");
  if (repetitions < 1)
    throw ValidationError("repetitions must be at least 1");

  // Fail before spawning anything if some cell can never fit.
  for (int p : p_values)
    for (int q : q_values)
    {
      ModelSpec probe = tmpl;
      probe.P = p;
      probe.Q = q;
      probe.a.resize(0);
      probe.b.resize(0, 0);
      probe.c.resize(0);
      probe.validate(series.channels(), series.length());
    }

  SelectionGrid grid;
  grid.p_values = p_values;
  grid.q_values = q_values;

  struct Task
  {
    int p = 0;
    int q = 0;
    int rep = 0;
  };
  std::vector<Task> tasks;
  tasks.reserve(p_values.size() * q_values.size() * static_cast<std::size_t>(repetitions));
  for (int p : p_values)
    for (int q : q_values)
      for (int rep = 0; rep < repetitions; ++rep)
        tasks.push_back({p, q, rep});

  grid.repetitions.assign(tasks.size(), Repetition{});
  std::vector<FittedModel> models(tasks.size());

  std::atomic<std::size_t> next{0};
  auto run_tasks = [&]()
  {
    while (true)
    {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size())
        return;
      const Task& t = tasks[i];
      Repetition& rec = grid.repetitions[i];
      rec.P = t.p;
      rec.Q = t.q;
      rec.rep = t.rep;
      ModelSpec spec = tmpl;
      spec.P = t.p;
      spec.Q = t.q;
      spec.a.resize(0);
      spec.b.resize(0, 0);
      spec.c.resize(0);
      spec.seed = cell_seed(tmpl.seed, t.p, t.q, t.rep);
      const auto start = std::chrono::steady_clock::now();
      try
      {
        models[i] = vb::fit(series, spec);
        rec.free_energy = models[i].free_energy_trace.back().total;
        rec.converged = models[i].converged;
        rec.iterations = models[i].iterations;
      }
      catch (const std::exception& e)
      {
        rec.free_energy = std::numeric_limits<double>::quiet_NaN();
        rec.converged = false;
        rec.iterations = 0;
        rec.error = e.what();
      }
      const auto stop = std::chrono::steady_clock::now();
      rec.seconds = std::chrono::duration<double>(stop - start).count();
    }
  };

  const int pool = std::min<int>(resolve_workers(workers),
                                 static_cast<int>(tasks.size()));
  if (pool <= 1)
  {
    run_tasks();
  }
  else
  {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(pool));
    for (int w = 0; w < pool; ++w)
      threads.emplace_back(run_tasks);
    for (auto& th : threads)
      th.join();
  }

  // Reduce repetitions to cells, keeping the lowest free energy among the
  // restarts that produced a model. A cell drops out only when every one of
  // its fits threw.
  std::size_t task_idx = 0;
  for (int p : p_values)
    for (int q : q_values)
    {
      Cell cell;
      cell.P = p;
      cell.Q = q;
      for (int rep = 0; rep < repetitions; ++rep, ++task_idx)
      {
        const Repetition& rec = grid.repetitions[task_idx];
        if (std::isnan(rec.free_energy))
          continue;
        if (cell.best_rep < 0 || rec.free_energy < cell.best_free_energy)
        {
          cell.usable = true;
          cell.best_free_energy = rec.free_energy;
          cell.best_rep = rep;
          cell.best_iterations = rec.iterations;
        }
      }
      grid.cells.push_back(cell);
    }

  // Winner: lowest best free energy among usable cells, scanning Q
  // ascending then P ascending so exact ties keep the smaller model.
  bool found = false;
  double best_fe = std::numeric_limits<double>::infinity();
  std::size_t best_cell = 0;
  for (std::size_t qi = 0; qi < q_values.size(); ++qi)
    for (std::size_t pi = 0; pi < p_values.size(); ++pi)
    {
      const std::size_t ci = pi * q_values.size() + qi;
      const Cell& cell = grid.cells[ci];
      if (!cell.usable)
        continue;
      if (!found || cell.best_free_energy < best_fe)
      {
        found = true;
        best_fe = cell.best_free_energy;
        best_cell = ci;
      }
    }
  if (!found)
    throw NumericalError("every cell of the selection grid failed");

  const Cell& winner = grid.cells[best_cell];
  grid.best_p = winner.P;
  grid.best_q = winner.Q;
  grid.best_free_energy = winner.best_free_energy;
  const std::size_t p_idx = best_cell / q_values.size();
  const std::size_t q_idx = best_cell % q_values.size();
  const std::size_t rep_idx = (p_idx * q_values.size() + q_idx)
                                  * static_cast<std::size_t>(repetitions)
                              + static_cast<std::size_t>(winner.best_rep);
  grid.best_model = std::move(models[rep_idx]);
  return grid;
}

void write_grid_csv(const std::string& path, const SelectionGrid& grid)
{
  std::ostringstream out;
  out << "P,Q,free_energy,converged,iterations,seconds\n";
  for (const Repetition& rec : grid.repetitions)
    out << rec.P << ',' << rec.Q << ',' << format_full(rec.free_energy) << ','
        << (rec.converged ? 1 : 0) << ',' << rec.iterations << ','
        << format_full(rec.seconds) << '\n';
  out << "# best P=" << grid.best_p << " Q=" << grid.best_q
      << " free_energy=" << format_full(grid.best_free_energy) << '\n';
  atomic_write_text(path, out.str());
}

} // namespace selection
} // namespace lrmar
