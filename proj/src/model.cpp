#include "csdp/model.hpp"

#include <algorithm>
#include <numeric>

namespace csdp {

namespace {

constexpr double kRowSumTol = 1e-12;

bool is_distribution(const Dist& d, std::string* why) {
  double sum = 0.0;
  for (double v : d) {
    if (v < 0.0) {
      if (why) *why = cat("negative entry ", v);
      return false;
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kRowSumTol) {
    if (why) *why = cat("row sums to ", sum);
    return false;
  }
  return true;
}

}  // namespace

void CoupledModel::allow_all_actions() {
  feasible.assign(n, {});
  for (int i = 0; i < n; ++i) {
    feasible[i].assign(z_size, {});
    for (int z = 0; z < z_size; ++z) {
      feasible[i][z].assign(x_sizes[i], {});
      for (int x = 0; x < x_sizes[i]; ++x) {
        feasible[i][z][x].resize(u_sizes[i]);
        std::iota(feasible[i][z][x].begin(), feasible[i][z][x].end(), 0);
      }
    }
  }
}

ValidationReport validate_model(const CoupledModel& m) {
  ValidationReport report;
  auto flag = [&](std::string msg) { report.violations.push_back(std::move(msg)); };

  if (m.n <= 0) {
    flag("n must be positive");
    return report;
  }
  if (m.z_size <= 0) flag("shared alphabet must be nonempty");
  auto check_sizes = [&](const std::vector<int>& sizes, const char* name) {
    if (static_cast<int>(sizes.size()) != m.n) {
      flag(cat(name, " has ", sizes.size(), " entries, expected n=", m.n));
      return false;
    }
    for (int i = 0; i < m.n; ++i)
      if (sizes[i] <= 0) flag(cat(name, "[", i, "] must be positive"));
    return true;
  };
  bool shapes_ok = check_sizes(m.x_sizes, "local_alphabets");
  shapes_ok = check_sizes(m.u_sizes, "action_alphabets") && shapes_ok;
  if (!m.y_sizes.empty()) shapes_ok = check_sizes(m.y_sizes, "observation_alphabets") && shapes_ok;
  if (!shapes_ok) return report;

  const int ju_total = m.u_indexer().total();
  const int jx_total = m.x_indexer().total();

  std::string why;
  if (static_cast<int>(m.shared_kernel.size()) != m.z_size) {
    flag(cat("shared_kernel has ", m.shared_kernel.size(), " rows, expected |Z|=", m.z_size));
  } else {
    for (int z = 0; z < m.z_size; ++z) {
      if (static_cast<int>(m.shared_kernel[z].size()) != ju_total) {
        flag(cat("shared_kernel[z=", z, "] has ", m.shared_kernel[z].size(),
                 " action rows, expected ", ju_total));
        continue;
      }
      for (int ju = 0; ju < ju_total; ++ju) {
        const Dist& row = m.shared_kernel[z][ju];
        if (static_cast<int>(row.size()) != m.z_size)
          flag(cat("shared_kernel row (z=", z, ", ju=", ju, ") has wrong length"));
        else if (!is_distribution(row, &why))
          flag(cat("shared_kernel row (z=", z, ", ju=", ju, "): ", why));
      }
    }
  }

  if (static_cast<int>(m.local_kernels.size()) != m.n) {
    flag(cat("local_kernels has ", m.local_kernels.size(), " subsystems, expected ", m.n));
  } else {
    for (int i = 0; i < m.n; ++i) {
      if (static_cast<int>(m.local_kernels[i].size()) != m.z_size) {
        flag(cat("local_kernels[", i, "] has wrong |Z| dimension"));
        continue;
      }
      for (int z = 0; z < m.z_size; ++z) {
        if (static_cast<int>(m.local_kernels[i][z].size()) != m.x_sizes[i]) {
          flag(cat("local_kernels[", i, "][z=", z, "] has wrong |X| dimension"));
          continue;
        }
        for (int x = 0; x < m.x_sizes[i]; ++x) {
          if (static_cast<int>(m.local_kernels[i][z][x].size()) != ju_total) {
            flag(cat("local_kernels[", i, "] row (z=", z, ", x=", x, ") has wrong |U| dimension"));
            continue;
          }
          for (int ju = 0; ju < ju_total; ++ju) {
            const Dist& row = m.local_kernels[i][z][x][ju];
            if (static_cast<int>(row.size()) != m.x_sizes[i])
              flag(cat("local kernel row (i=", i, ", z=", z, ", x=", x, ", ju=", ju,
                       ") has wrong length"));
            else if (!is_distribution(row, &why))
              flag(cat("local kernel row (i=", i, ", z=", z, ", x=", x, ", ju=", ju, "): ", why));
          }
        }
      }
    }
  }

  if (!m.observation_kernels.empty()) {
    if (m.y_sizes.empty()) flag("observation_kernels present but observation_alphabets missing");
    if (static_cast<int>(m.observation_kernels.size()) != m.n) {
      flag("observation_kernels has wrong subsystem count");
    } else if (!m.y_sizes.empty()) {
      for (int i = 0; i < m.n; ++i) {
        if (static_cast<int>(m.observation_kernels[i].size()) != m.x_sizes[i]) {
          flag(cat("observation_kernels[", i, "] has wrong |X| dimension"));
          continue;
        }
        for (int x = 0; x < m.x_sizes[i]; ++x) {
          const Dist& row = m.observation_kernels[i][x];
          if (static_cast<int>(row.size()) != m.y_sizes[i])
            flag(cat("observation kernel row (i=", i, ", x=", x, ") has wrong length"));
          else if (!is_distribution(row, &why))
            flag(cat("observation kernel row (i=", i, ", x=", x, "): ", why));
        }
      }
    }
  }

  if (m.stage_costs.empty()) flag("no cost tensor");
  for (std::size_t k = 0; k < m.stage_costs.size(); ++k) {
    const auto& tensor = m.stage_costs[k];
    if (static_cast<int>(tensor.size()) != m.z_size) {
      flag(cat("cost tensor ", k, " has wrong |Z| dimension"));
      continue;
    }
    for (int z = 0; z < m.z_size; ++z) {
      if (static_cast<int>(tensor[z].size()) != jx_total) {
        flag(cat("cost tensor ", k, " (z=", z, ") has wrong |X| dimension"));
        continue;
      }
      for (int jx = 0; jx < jx_total; ++jx)
        if (static_cast<int>(tensor[z][jx].size()) != ju_total)
          flag(cat("cost tensor ", k, " (z=", z, ", jx=", jx, ") has wrong |U| dimension"));
    }
  }

  if (static_cast<int>(m.feasible.size()) != m.n) {
    flag("feasible_actions has wrong subsystem count");
  } else {
    for (int i = 0; i < m.n; ++i) {
      if (static_cast<int>(m.feasible[i].size()) != m.z_size) {
        flag(cat("feasible_actions[", i, "] has wrong |Z| dimension"));
        continue;
      }
      for (int z = 0; z < m.z_size; ++z) {
        if (static_cast<int>(m.feasible[i][z].size()) != m.x_sizes[i]) {
          flag(cat("feasible_actions[", i, "][z=", z, "] has wrong |X| dimension"));
          continue;
        }
        for (int x = 0; x < m.x_sizes[i]; ++x) {
          const auto& set = m.feasible[i][z][x];
          if (set.empty()) flag(cat("empty feasible set at (i=", i, ", z=", z, ", x=", x, ")"));
          if (!std::is_sorted(set.begin(), set.end()))
            flag(cat("feasible set at (i=", i, ", z=", z, ", x=", x, ") not sorted"));
          for (int u : set)
            if (u < 0 || u >= m.u_sizes[i])
              flag(cat("feasible action ", u, " out of range at (i=", i, ", z=", z, ", x=", x, ")"));
          if (std::adjacent_find(set.begin(), set.end()) != set.end())
            flag(cat("duplicate feasible action at (i=", i, ", z=", z, ", x=", x, ")"));
        }
      }
    }
  }

  if (static_cast<int>(m.initial_shared.size()) != m.z_size)
    flag("initial_shared has wrong length");
  else if (!is_distribution(m.initial_shared, &why))
    flag(cat("initial_shared: ", why));

  if (static_cast<int>(m.initial_local.size()) != m.n) {
    flag("initial_local has wrong subsystem count");
  } else {
    for (int i = 0; i < m.n; ++i) {
      if (static_cast<int>(m.initial_local[i].size()) != m.z_size) {
        flag(cat("initial_local[", i, "] has wrong |Z| dimension"));
        continue;
      }
      for (int z = 0; z < m.z_size; ++z) {
        if (static_cast<int>(m.initial_shared.size()) == m.z_size &&
            m.initial_shared[z] <= 0.0)
          continue;  // rows for unreachable z are unconstrained
        const Dist& row = m.initial_local[i][z];
        if (static_cast<int>(row.size()) != m.x_sizes[i])
          flag(cat("initial_local[", i, "][z=", z, "] has wrong length"));
        else if (!is_distribution(row, &why))
          flag(cat("initial_local[", i, "][z=", z, "]: ", why));
      }
    }
  }

  return report;
}

const Dist& transition_local(const CoupledModel& m, int i, int z, int x_i,
                             std::span<const int> u_joint) {
  if (i < 0 || i >= m.n) throw IndexError(cat("subsystem index ", i, " out of range"));
  if (z < 0 || z >= m.z_size) throw IndexError(cat("shared state ", z, " out of range"));
  if (x_i < 0 || x_i >= m.x_sizes[i]) throw IndexError(cat("local state ", x_i, " out of range"));
  if (static_cast<int>(u_joint.size()) != m.n)
    throw IndexError("joint action has wrong arity");
  for (int j = 0; j < m.n; ++j)
    if (u_joint[j] < 0 || u_joint[j] >= m.u_sizes[j])
      throw IndexError(cat("action u[", j, "]=", u_joint[j], " out of range"));
  const int ju = m.u_indexer().index(u_joint);
  return m.local_kernels[i][z][x_i][ju];
}

double Trajectory::total_cost() const {
  double sum = 0.0;
  for (double c : stage_cost) sum += c;
  return sum;
}

Trajectory sample_trajectory(const CoupledModel& m, const JointStrategy& strategy,
                             int horizon, std::uint64_t seed) {
  Trajectory traj;
  traj.seed = seed;
  if (horizon <= 0) return traj;

  std::mt19937_64 rng(seed);
  const JointIndexer ux = m.u_indexer();
  const JointIndexer xx = m.x_indexer();
  const bool partial = m.partial();

  std::vector<std::vector<int>> own_hist(m.n);  // x-history, or y-history when partial

  int z = sample_index(m.initial_shared, rng);
  std::vector<int> x(m.n);
  for (int i = 0; i < m.n; ++i) x[i] = sample_index(m.initial_local[i][z], rng);

  for (int t = 0; t < horizon; ++t) {
    traj.z.push_back(z);
    traj.x.push_back(x);
    if (partial) {
      std::vector<int> y(m.n);
      for (int i = 0; i < m.n; ++i)
        y[i] = sample_index(m.observation_kernels[i][x[i]], rng);
      traj.y.push_back(y);
      for (int i = 0; i < m.n; ++i) own_hist[i].push_back(y[i]);
    } else {
      for (int i = 0; i < m.n; ++i) own_hist[i].push_back(x[i]);
    }

    std::vector<int> u(m.n);
    for (int i = 0; i < m.n; ++i) {
      u[i] = strategy.act(m, i, t + 1, traj.z, own_hist[i], traj.u);
      const auto& allowed = m.feasible_at(i, z, x[i]);
      if (!std::binary_search(allowed.begin(), allowed.end(), u[i]))
        throw InfeasibleAction(cat("infeasible action at t=", t + 1, ", i=", i, ", z=", z,
                                   ", x=", x[i], ", u=", u[i]));
    }
    traj.u.push_back(u);

    const int ju = ux.index(u);
    const int jx = xx.index(x);
    traj.stage_cost.push_back(m.cost(t, z, jx, ju));

    const int z_next = sample_index(m.shared_row(z, ju), rng);
    std::vector<int> x_next(m.n);
    for (int i = 0; i < m.n; ++i)
      x_next[i] = sample_index(m.local_row(i, z, x[i], ju), rng);
    z = z_next;
    x = std::move(x_next);
  }
  return traj;
}

}  // namespace csdp
