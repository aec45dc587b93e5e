#include "csdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace csdp::oracle {

namespace {

bool better(Sense sense, double candidate, double incumbent) {
  return sense == Sense::minimize ? candidate < incumbent : candidate > incumbent;
}

// Runs fn over every digit tuple of the given radices, in lexicographic order.
template <class Fn>
void for_each_tuple(const std::vector<int>& radices, Fn&& fn) {
  std::vector<int> digits(radices.size(), 0);
  for (int r : radices)
    if (r <= 0) return;
  while (true) {
    fn(digits);
    std::size_t k = radices.size();
    while (k-- > 0) {
      if (++digits[k] < radices[k]) break;
      digits[k] = 0;
      if (k == 0) return;
    }
    if (radices.empty()) return;
  }
}

}  // namespace

GeneralModel GeneralModel::from(const CoupledModel& m) {
  GeneralModel g;
  g.n = m.n;
  g.z_size = m.z_size;
  g.x_sizes = m.x_sizes;
  g.u_sizes = m.u_sizes;
  g.y_sizes = m.y_sizes;
  g.shared_kernel = m.shared_kernel;
  g.observation_kernels = m.observation_kernels;
  g.stage_costs = m.stage_costs;
  g.sense = m.sense;
  g.feasible = m.feasible;
  g.initial_shared = m.initial_shared;

  const JointIndexer xx = m.x_indexer();
  const JointIndexer ux = m.u_indexer();
  g.joint_local.assign(m.z_size, std::vector<std::vector<Dist>>(
                                     xx.total(), std::vector<Dist>(ux.total())));
  for (int z = 0; z < m.z_size; ++z) {
    std::vector<int> x(m.n, 0);
    int jx = 0;
    do {
      for (int ju = 0; ju < ux.total(); ++ju) {
        Dist row(xx.total(), 0.0);
        std::vector<int> xn(m.n, 0);
        int jxn = 0;
        do {
          double p = 1.0;
          for (int i = 0; i < m.n; ++i) p *= m.local_row(i, z, x[i], ju)[xn[i]];
          row[jxn] = p;
          ++jxn;
        } while (xx.next(xn));
        g.joint_local[z][jx][ju] = std::move(row);
      }
      ++jx;
    } while (xx.next(x));
  }

  g.initial_local_joint.assign(m.z_size, Dist(xx.total(), 0.0));
  for (int z = 0; z < m.z_size; ++z) {
    std::vector<int> x(m.n, 0);
    int jx = 0;
    do {
      double p = 1.0;
      for (int i = 0; i < m.n; ++i) p *= m.initial_local[i][z][x[i]];
      g.initial_local_joint[z][jx] = p;
      ++jx;
    } while (xx.next(x));
  }
  return g;
}

ExactJoint exact_joint_distribution(const GeneralModel& m, const JointDecision& strategy,
                                    int T, std::size_t cap) {
  ExactJoint out;
  out.n = m.n;
  out.T = T;
  out.has_y = m.partial();
  if (T <= 0) return out;

  const JointIndexer xx = m.x_indexer();
  const JointIndexer ux = m.u_indexer();

  auto observations = [&](const std::vector<int>& x,
                          auto&& emit) {  // emit(y, prob)
    std::vector<int> radices = m.y_sizes;
    for_each_tuple(radices, [&](const std::vector<int>& y) {
      double p = 1.0;
      for (int i = 0; i < m.n; ++i) p *= m.observation_kernels[i][x[i]][y[i]];
      if (p > 0.0) emit(y, p);
    });
  };

  std::vector<std::pair<Path, double>> paths;
  for (int z = 0; z < m.z_size; ++z) {
    if (m.initial_shared[z] <= 0.0) continue;
    for (int jx = 0; jx < xx.total(); ++jx) {
      const double px = m.initial_local_joint[z][jx];
      if (px <= 0.0) continue;
      Path base;
      base.z.push_back(z);
      base.x.push_back(xx.digits(jx));
      const double w = m.initial_shared[z] * px;
      if (out.has_y) {
        observations(base.x.back(), [&](const std::vector<int>& y, double py) {
          Path p = base;
          p.y.push_back(y);
          paths.emplace_back(std::move(p), w * py);
        });
      } else {
        paths.emplace_back(std::move(base), w);
      }
    }
  }

  for (int t = 1; t <= T; ++t) {
    for (auto& [p, w] : paths) {
      std::vector<int> u = strategy(t, p);
      if (static_cast<int>(u.size()) != m.n) throw Error("strategy returned wrong arity");
      for (int i = 0; i < m.n; ++i)
        if (u[i] < 0 || u[i] >= m.u_sizes[i])
          throw Error(cat("strategy action u[", i, "]=", u[i], " out of range"));
      p.u.push_back(std::move(u));
    }
    if (t == T) break;

    std::vector<std::pair<Path, double>> next;
    for (const auto& [p, w] : paths) {
      const int z = p.z.back();
      const int jx = xx.index(p.x.back());
      const int ju = ux.index(p.u.back());
      const Dist& zrow = m.shared_kernel[z][ju];
      const Dist& xrow = m.joint_local[z][jx][ju];
      for (int zn = 0; zn < m.z_size; ++zn) {
        if (zrow[zn] <= 0.0) continue;
        for (int jxn = 0; jxn < xx.total(); ++jxn) {
          if (xrow[jxn] <= 0.0) continue;
          Path q = p;
          q.z.push_back(zn);
          q.x.push_back(xx.digits(jxn));
          const double w2 = w * zrow[zn] * xrow[jxn];
          if (out.has_y) {
            observations(q.x.back(), [&](const std::vector<int>& y, double py) {
              Path r = q;
              r.y.push_back(y);
              next.emplace_back(std::move(r), w2 * py);
            });
          } else {
            next.emplace_back(std::move(q), w2);
          }
          if (next.size() > cap)
            throw CombinatorialBlowup(
                cat("exact joint table exceeds cap ", cap, " at stage ", t + 1),
                next.size());
        }
      }
    }
    paths = std::move(next);
  }
  out.atoms = std::move(paths);
  return out;
}

namespace {

std::vector<int> common_key(const Path& p, int t, bool include_u_t) {
  std::vector<int> key;
  for (int s = 0; s < t; ++s) key.push_back(p.z[s]);
  const int u_stages = include_u_t ? t : t - 1;
  for (int s = 0; s < u_stages; ++s)
    for (int v : p.u[s]) key.push_back(v);
  return key;
}

// Max deviation between a joint law over per-subsystem symbol histories and
// the product of its marginals, across all groups keyed by `group_of` and all
// horizons 1..T.
struct ProductCheck {
  int n;
  double worst = 0.0;

  void run(const std::vector<std::pair<Path, double>>& atoms, int T,
           const std::function<std::vector<int>(const Path&, int)>& group_of,
           const std::function<std::vector<int>(const Path&, int, int)>& symbols_of) {
    for (int t = 1; t <= T; ++t) {
      struct Group {
        double mass = 0.0;
        std::map<std::vector<int>, double> joint;
        std::vector<std::map<std::vector<int>, double>> marginals;
      };
      std::map<std::vector<int>, Group> groups;
      for (const auto& [p, w] : atoms) {
        Group& g = groups[group_of(p, t)];
        if (g.marginals.empty()) g.marginals.resize(n);
        g.mass += w;
        std::vector<int> joint_key;
        for (int i = 0; i < n; ++i) {
          std::vector<int> hist = symbols_of(p, i, t);
          g.marginals[i][hist] += w;
          joint_key.insert(joint_key.end(), hist.begin(), hist.end());
        }
        g.joint[joint_key] += w;
      }
      for (const auto& [key, g] : groups) {
        if (g.mass <= 0.0) continue;
        std::vector<std::vector<std::pair<std::vector<int>, double>>> supports(n);
        for (int i = 0; i < n; ++i)
          supports[i].assign(g.marginals[i].begin(), g.marginals[i].end());
        std::vector<int> radices(n);
        for (int i = 0; i < n; ++i) radices[i] = static_cast<int>(supports[i].size());
        for_each_tuple(radices, [&](const std::vector<int>& pick) {
          double prod = 1.0;
          std::vector<int> joint_key;
          for (int i = 0; i < n; ++i) {
            prod *= supports[i][pick[i]].second / g.mass;
            const auto& hist = supports[i][pick[i]].first;
            joint_key.insert(joint_key.end(), hist.begin(), hist.end());
          }
          auto it = g.joint.find(joint_key);
          const double joint_p = it == g.joint.end() ? 0.0 : it->second / g.mass;
          worst = std::max(worst, std::abs(joint_p - prod));
        });
      }
    }
  }
};

}  // namespace

double check_conditional_independence(const ExactJoint& joint) {
  ProductCheck check{joint.n};
  check.run(
      joint.atoms, joint.T,
      [](const Path& p, int t) { return common_key(p, t, /*include_u_t=*/true); },
      [](const Path& p, int i, int t) {
        std::vector<int> hist;
        for (int s = 0; s < t; ++s) hist.push_back(p.x[s][i]);
        return hist;
      });
  return check.worst;
}

double check_controlled_markov(const GeneralModel& m, const JointDecision& strategy,
                               int T, std::size_t cap) {
  const ExactJoint joint = exact_joint_distribution(m, strategy, T, cap);
  const JointIndexer xx = m.x_indexer();
  const JointIndexer ux = m.u_indexer();
  double worst = 0.0;

  for (int i = 0; i < m.n; ++i) {
    for (int t = 1; t <= T; ++t) {
      // Conditioning keys: the full variant keeps the whole own-state history
      // x^i_{1:t}; the Markov variant keeps only x^i_t. Everything else
      // (z_{1:t}, u_{1:t-1}, u^i_t) is shared.
      auto full_key = [&](const Path& p) {
        std::vector<int> key = common_key(p, t, /*include_u_t=*/false);
        for (int s = 0; s < t; ++s) key.push_back(p.x[s][i]);
        key.push_back(p.u[t - 1][i]);
        return key;
      };
      auto markov_key = [&](const Path& p) {
        std::vector<int> key = common_key(p, t, /*include_u_t=*/false);
        key.push_back(p.x[t - 1][i]);
        key.push_back(p.u[t - 1][i]);
        return key;
      };

      if (t < T) {
        // Part 1: law of the next R-state, i.e. of (x^i_{t+1}, z_{t+1}, u^{-i}_t).
        auto outcome = [&](const Path& p) {
          std::vector<int> o;
          o.push_back(p.x[t][i]);
          o.push_back(p.z[t]);
          for (int j = 0; j < m.n; ++j)
            if (j != i) o.push_back(p.u[t - 1][j]);
          return o;
        };
        struct Cond {
          double mass = 0.0;
          std::map<std::vector<int>, double> law;
        };
        std::map<std::vector<int>, Cond> full, markov;
        for (const auto& [p, w] : joint.atoms) {
          auto o = outcome(p);
          Cond& cf = full[full_key(p)];
          cf.mass += w;
          cf.law[o] += w;
          Cond& cm = markov[markov_key(p)];
          cm.mass += w;
          cm.law[o] += w;
        }
        for (const auto& [p, w] : joint.atoms) {
          (void)w;
          const Cond& cf = full.at(full_key(p));
          const Cond& cm = markov.at(markov_key(p));
          for (const auto& [o, mass] : cm.law) {
            auto it = cf.law.find(o);
            const double pf = it == cf.law.end() ? 0.0 : it->second / cf.mass;
            worst = std::max(worst, std::abs(pf - mass / cm.mass));
          }
        }
      }

      // Part 2: expected stage cost given the two conditionings.
      struct CostCond {
        double mass = 0.0;
        double cost = 0.0;
      };
      std::map<std::vector<int>, CostCond> full_c, markov_c;
      for (const auto& [p, w] : joint.atoms) {
        const double c =
            m.cost(t - 1, p.z[t - 1], xx.index(p.x[t - 1]), ux.index(p.u[t - 1]));
        CostCond& cf = full_c[full_key(p)];
        cf.mass += w;
        cf.cost += w * c;
        CostCond& cm = markov_c[markov_key(p)];
        cm.mass += w;
        cm.cost += w * c;
      }
      for (const auto& [p, w] : joint.atoms) {
        (void)w;
        const CostCond& cf = full_c.at(full_key(p));
        const CostCond& cm = markov_c.at(markov_key(p));
        worst = std::max(worst, std::abs(cf.cost / cf.mass - cm.cost / cm.mass));
      }
    }
  }
  return worst;
}

namespace {

// Exact per-station posteriors P(x^i_t | y^i_{1:t}, z_{1:t}, u_{1:t-1})
// computed by enumeration, with symbol ids for the quantized values. This is
// the independent route to the local sufficient statistic.
struct XiSymbolizer {
  const GeneralModel& m;
  const ExactJoint& joint;

  struct Post {
    double mass = 0.0;
    Dist over_x;
  };
  std::map<std::vector<int>, Post> posteriors;
  std::map<std::vector<std::int64_t>, int> symbol_ids;

  XiSymbolizer(const GeneralModel& model, const ExactJoint& j) : m(model), joint(j) {
    for (int t = 1; t <= joint.T; ++t) {
      for (const auto& [p, w] : joint.atoms) {
        for (int i = 0; i < m.n; ++i) {
          Post& post = posteriors[station_info(p, i, t)];
          if (post.over_x.empty()) post.over_x.assign(m.x_sizes[i], 0.0);
          post.mass += w;
          post.over_x[p.x[t - 1][i]] += w;
        }
      }
    }
  }

  static std::vector<int> station_info(const Path& p, int i, int t) {
    std::vector<int> key;
    key.push_back(i);
    key.push_back(t);
    for (int s = 0; s < t; ++s) key.push_back(p.y[s][i]);
    for (int s = 0; s < t; ++s) key.push_back(p.z[s]);
    for (int s = 0; s + 1 < t; ++s)
      for (int v : p.u[s]) key.push_back(v);
    return key;
  }

  int symbol(const Path& p, int i, int t) {
    const Post& post = posteriors.at(station_info(p, i, t));
    std::vector<std::int64_t> q;
    for (double v : post.over_x) q.push_back(quantize(v / post.mass, 1e-9));
    auto [it, inserted] = symbol_ids.emplace(q, static_cast<int>(symbol_ids.size()));
    return it->second;
  }
};

}  // namespace

double check_xi_independence(const GeneralModel& m, const JointDecision& strategy,
                             int T, std::size_t cap) {
  if (!m.partial()) throw Error("check_xi_independence requires a partial model");
  const ExactJoint joint = exact_joint_distribution(m, strategy, T, cap);
  XiSymbolizer xi(m, joint);

  ProductCheck check{m.n};
  check.run(
      joint.atoms, T,
      [](const Path& p, int t) { return common_key(p, t, /*include_u_t=*/true); },
      [&](const Path& p, int i, int t) {
        std::vector<int> hist;
        for (int s = 1; s <= t; ++s) hist.push_back(xi.symbol(p, i, s));
        return hist;
      });
  return check.worst;
}

double check_controlled_markov_xi(const GeneralModel& m, const JointDecision& strategy,
                                  int T, std::size_t cap) {
  if (!m.partial()) throw Error("check_controlled_markov_xi requires a partial model");
  const ExactJoint joint = exact_joint_distribution(m, strategy, T, cap);
  XiSymbolizer xi(m, joint);
  const JointIndexer xx = m.x_indexer();
  const JointIndexer ux = m.u_indexer();
  double worst = 0.0;

  for (int i = 0; i < m.n; ++i) {
    for (int t = 1; t <= T; ++t) {
      auto full_key = [&](const Path& p) {
        std::vector<int> key = common_key(p, t, /*include_u_t=*/false);
        for (int s = 1; s <= t; ++s) key.push_back(xi.symbol(p, i, s));
        key.push_back(p.u[t - 1][i]);
        return key;
      };
      auto markov_key = [&](const Path& p) {
        std::vector<int> key = common_key(p, t, /*include_u_t=*/false);
        key.push_back(xi.symbol(p, i, t));
        key.push_back(p.u[t - 1][i]);
        return key;
      };

      if (t < T) {
        auto outcome = [&](const Path& p) {
          std::vector<int> o;
          o.push_back(xi.symbol(p, i, t + 1));
          o.push_back(p.z[t]);
          for (int j = 0; j < m.n; ++j)
            if (j != i) o.push_back(p.u[t - 1][j]);
          return o;
        };
        struct Cond {
          double mass = 0.0;
          std::map<std::vector<int>, double> law;
        };
        std::map<std::vector<int>, Cond> full, markov;
        for (const auto& [p, w] : joint.atoms) {
          auto o = outcome(p);
          Cond& cf = full[full_key(p)];
          cf.mass += w;
          cf.law[o] += w;
          Cond& cm = markov[markov_key(p)];
          cm.mass += w;
          cm.law[o] += w;
        }
        for (const auto& [p, w] : joint.atoms) {
          (void)w;
          const Cond& cf = full.at(full_key(p));
          const Cond& cm = markov.at(markov_key(p));
          for (const auto& [o, mass] : cm.law) {
            auto it = cf.law.find(o);
            const double pf = it == cf.law.end() ? 0.0 : it->second / cf.mass;
            worst = std::max(worst, std::abs(pf - mass / cm.mass));
          }
        }
      }

      struct CostCond {
        double mass = 0.0;
        double cost = 0.0;
      };
      std::map<std::vector<int>, CostCond> full_c, markov_c;
      for (const auto& [p, w] : joint.atoms) {
        const double c =
            m.cost(t - 1, p.z[t - 1], xx.index(p.x[t - 1]), ux.index(p.u[t - 1]));
        CostCond& cf = full_c[full_key(p)];
        cf.mass += w;
        cf.cost += w * c;
        CostCond& cm = markov_c[markov_key(p)];
        cm.mass += w;
        cm.cost += w * c;
      }
      for (const auto& [p, w] : joint.atoms) {
        (void)w;
        const CostCond& cf = full_c.at(full_key(p));
        const CostCond& cm = markov_c.at(markov_key(p));
        worst = std::max(worst, std::abs(cf.cost / cf.mass - cm.cost / cm.mass));
      }
    }
  }
  return worst;
}

std::vector<int> StrategyTable::encode_info(InfoPattern pattern, int station, int t,
                                            const Path& prefix, bool partial) {
  const auto& own = partial ? prefix.y : prefix.x;
  std::vector<int> key;
  if (pattern == InfoPattern::kFullHistory) {
    for (int s = 0; s < t; ++s) key.push_back(own[s][station]);
  } else {
    key.push_back(own[t - 1][station]);
  }
  for (int s = 0; s < t; ++s) key.push_back(prefix.z[s]);
  for (int s = 0; s + 1 < t; ++s)
    for (int v : prefix.u[s]) key.push_back(v);
  return key;
}

int StrategyTable::act(int station, int t, const Path& prefix, bool partial) const {
  const auto& layer = entries.at(station).at(t - 1);
  const auto key = encode_info(pattern, station, t, prefix, partial);
  auto it = layer.find(key);
  if (it == layer.end())
    throw Error(cat("strategy table has no entry for station ", station, " at stage ", t));
  return it->second;
}

JointDecision StrategyTable::decision(const GeneralModel& m) const {
  const bool partial = m.partial();
  return [this, partial, n = m.n](int t, const Path& prefix) {
    std::vector<int> u(n);
    for (int i = 0; i < n; ++i) u[i] = act(i, t, prefix, partial);
    return u;
  };
}

namespace {

using JointMap = std::vector<std::vector<int>>;  // [i][x] -> u

// All admissible joint prescriptions at shared state z, lexicographic.
std::vector<JointMap> all_joint_maps(const GeneralModel& m, int z) {
  struct Slot {
    int i, x;
  };
  std::vector<Slot> slots;
  std::vector<int> radices;
  for (int i = 0; i < m.n; ++i)
    for (int x = 0; x < m.x_sizes[i]; ++x) {
      slots.push_back({i, x});
      radices.push_back(static_cast<int>(m.feasible[i][z][x].size()));
    }
  std::vector<JointMap> out;
  for_each_tuple(radices, [&](const std::vector<int>& pick) {
    JointMap d(m.n);
    for (int i = 0; i < m.n; ++i) d[i].resize(m.x_sizes[i]);
    for (std::size_t k = 0; k < slots.size(); ++k)
      d[slots[k].i][slots[k].x] = m.feasible[slots[k].i][z][slots[k].x][pick[k]];
    out.push_back(std::move(d));
  });
  return out;
}

struct TreeSearch {
  const GeneralModel& m;
  int T;
  std::uint64_t cap;
  std::uint64_t work = 0;
  bool markov = false;
  double quantization = 1e-9;
  // Markov memo per stage: (z, quantized conditional) -> (value, prescription).
  std::vector<std::map<std::vector<std::int64_t>, std::pair<double, JointMap>>> memo;

  std::vector<std::int64_t> memo_key(int z, const std::vector<double>& cond) const {
    std::vector<std::int64_t> key;
    key.push_back(z);
    for (double v : cond) key.push_back(quantize(v, quantization));
    return key;
  }

  // Optimal cost-to-go at a common node with conditional law `cond` over the
  // joint local state. Fills *best_out with the optimizing prescription.
  double best(int t, int z, const std::vector<double>& cond, JointMap* best_out) {
    if (markov) {
      auto it = memo[t - 1].find(memo_key(z, cond));
      if (it != memo[t - 1].end()) {
        if (best_out) *best_out = it->second.second;
        return it->second.first;
      }
    }
    const JointIndexer xx = m.x_indexer();
    const JointIndexer ux = m.u_indexer();
    double best_value = 0.0;
    JointMap best_map;
    bool first = true;
    for (const JointMap& d : all_joint_maps(m, z)) {
      if (++work > cap)
        throw CombinatorialBlowup(
            cat("brute-force search work exceeds cap ", cap), work);
      double imm = 0.0;
      std::map<int, double> action_mass;
      std::map<int, std::vector<double>> action_post;
      for (int jx = 0; jx < xx.total(); ++jx) {
        if (cond[jx] <= 0.0) continue;
        const auto digits = xx.digits(jx);
        std::vector<int> u(m.n);
        for (int i = 0; i < m.n; ++i) u[i] = d[i][digits[i]];
        const int ju = ux.index(u);
        imm += cond[jx] * m.cost(t - 1, z, jx, ju);
        action_mass[ju] += cond[jx];
        auto& post = action_post[ju];
        if (post.empty()) post.assign(xx.total(), 0.0);
        const Dist& row = m.joint_local[z][jx][ju];
        for (int jxn = 0; jxn < xx.total(); ++jxn)
          post[jxn] += cond[jx] * row[jxn];
      }
      double value = imm;
      if (t < T) {
        for (auto& [ju, mass] : action_mass) {
          std::vector<double> post = action_post[ju];
          for (double& v : post) v /= mass;
          const Dist& zrow = m.shared_kernel[z][ju];
          for (int zn = 0; zn < m.z_size; ++zn) {
            if (zrow[zn] <= 0.0) continue;
            value += mass * zrow[zn] * best(t + 1, zn, post, nullptr);
          }
        }
      }
      if (first || better(m.sense, value, best_value)) {
        best_value = value;
        best_map = d;
        first = false;
      }
    }
    if (first) throw Error("no admissible prescription at brute-force node");
    if (markov) memo[t - 1][memo_key(z, cond)] = {best_value, best_map};
    if (best_out) *best_out = best_map;
    return best_value;
  }

  // Replays the optimal choices, recording the strategy per common node.
  void record(int t, int z, const std::vector<double>& cond, Path& prefix,
              StrategyTable& table) {
    JointMap d;
    best(t, z, cond, &d);
    for (int i = 0; i < m.n; ++i) {
      for (int x = 0; x < m.x_sizes[i]; ++x) {
        Path probe = prefix;
        probe.x.resize(t);
        if (static_cast<int>(probe.x[t - 1].size()) != m.n)
          probe.x[t - 1].assign(m.n, 0);
        probe.x[t - 1][i] = x;
        table.entries[i][t - 1][StrategyTable::encode_info(
            InfoPattern::kReduced, i, t, probe, false)] = d[i][x];
      }
    }
    if (t == T) return;
    const JointIndexer xx = m.x_indexer();
    const JointIndexer ux = m.u_indexer();
    std::map<int, double> action_mass;
    std::map<int, std::vector<double>> action_post;
    for (int jx = 0; jx < xx.total(); ++jx) {
      if (cond[jx] <= 0.0) continue;
      const auto digits = xx.digits(jx);
      std::vector<int> u(m.n);
      for (int i = 0; i < m.n; ++i) u[i] = d[i][digits[i]];
      const int ju = ux.index(u);
      action_mass[ju] += cond[jx];
      auto& post = action_post[ju];
      if (post.empty()) post.assign(xx.total(), 0.0);
      const Dist& row = m.joint_local[z][jx][ju];
      for (int jxn = 0; jxn < xx.total(); ++jxn) post[jxn] += cond[jx] * row[jxn];
    }
    for (auto& [ju, mass] : action_mass) {
      std::vector<double> post = action_post[ju];
      for (double& v : post) v /= mass;
      const Dist& zrow = m.shared_kernel[z][ju];
      for (int zn = 0; zn < m.z_size; ++zn) {
        if (zrow[zn] <= 0.0) continue;
        Path extended = prefix;
        extended.u.push_back(ux.digits(ju));
        extended.z.push_back(zn);
        extended.x.emplace_back(m.n, 0);
        record(t + 1, zn, post, extended, table);
      }
    }
  }
};

double evaluate_total_cost(const GeneralModel& m, const JointDecision& strategy, int T,
                           std::size_t cap) {
  const ExactJoint joint = exact_joint_distribution(m, strategy, T, cap);
  const JointIndexer xx = m.x_indexer();
  const JointIndexer ux = m.u_indexer();
  double total = 0.0;
  for (const auto& [p, w] : joint.atoms) {
    for (int t = 0; t < T; ++t)
      total += w * m.cost(t, p.z[t], xx.index(p.x[t]), ux.index(p.u[t]));
  }
  return total;
}

// All syntactic information realizations for (station, stage, pattern), in
// lexicographic order, together with the feasible action set of each.
struct InfoDomain {
  std::vector<std::vector<int>> keys;
  std::vector<const std::vector<int>*> feasible;
};

InfoDomain info_domain(const GeneralModel& m, InfoPattern pattern, int station, int t) {
  InfoDomain dom;
  const bool partial = m.partial();
  const int own_size = partial ? m.y_sizes[station] : m.x_sizes[station];
  const int own_slots = pattern == InfoPattern::kFullHistory ? t : 1;

  std::vector<int> radices;
  for (int s = 0; s < own_slots; ++s) radices.push_back(own_size);
  for (int s = 0; s < t; ++s) radices.push_back(m.z_size);
  for (int s = 0; s + 1 < t; ++s)
    for (int j = 0; j < m.n; ++j) radices.push_back(m.u_sizes[j]);

  static const std::vector<int> kNone;
  for_each_tuple(radices, [&](const std::vector<int>& key) {
    dom.keys.push_back(key);
    const int z_t = key[own_slots + t - 1];
    if (partial) {
      // Feasibility may not depend on the unobserved local state.
      dom.feasible.push_back(&m.feasible[station][z_t][0]);
    } else {
      const int x_t = key[own_slots - 1];
      dom.feasible.push_back(&m.feasible[station][z_t][x_t]);
    }
  });
  (void)kNone;
  return dom;
}

}  // namespace

BruteForceResult brute_force_optimal(const GeneralModel& m, int T, InfoPattern pattern,
                                     std::uint64_t cap) {
  BruteForceResult result;
  result.strategy.pattern = pattern;
  result.strategy.entries.assign(m.n, std::vector<std::map<std::vector<int>, int>>(
                                          std::max(T, 0)));
  if (T <= 0) return result;

  if (pattern == InfoPattern::kReduced || pattern == InfoPattern::kMarkov) {
    TreeSearch search{m, T, cap, 0, false, 1e-9, {}};
    search.markov = pattern == InfoPattern::kMarkov;
    search.memo.resize(T);
    double value = 0.0;
    for (int z = 0; z < m.z_size; ++z) {
      if (m.initial_shared[z] <= 0.0) continue;
      value += m.initial_shared[z] * search.best(1, z, m.initial_local_joint[z], nullptr);
    }
    result.value = value;
    for (int z = 0; z < m.z_size; ++z) {
      if (m.initial_shared[z] <= 0.0) continue;
      Path prefix;
      prefix.z.push_back(z);
      prefix.x.emplace_back(m.n, 0);
      search.record(1, z, m.initial_local_joint[z], prefix, result.strategy);
    }
    // Totalize on zero-probability realizations (arbitrary there; they only
    // matter when another station deviates, e.g. in best-response tests).
    for (int i = 0; i < m.n; ++i) {
      for (int t = 1; t <= T; ++t) {
        const InfoDomain dom = info_domain(m, InfoPattern::kReduced, i, t);
        for (std::size_t k = 0; k < dom.keys.size(); ++k)
          result.strategy.entries[i][t - 1].try_emplace(dom.keys[k],
                                                        dom.feasible[k]->front());
      }
    }
    return result;
  }

  // Full-history pattern: outright enumeration of joint strategy tables.
  std::vector<std::vector<InfoDomain>> domains(m.n);
  std::uint64_t count = 1;
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  std::vector<int> radices;
  struct SlotRef {
    int station, stage, index;
  };
  std::vector<SlotRef> slots;
  for (int i = 0; i < m.n; ++i) {
    domains[i].resize(T);
    for (int t = 1; t <= T; ++t) {
      domains[i][t - 1] = info_domain(m, pattern, i, t);
      const InfoDomain& dom = domains[i][t - 1];
      for (std::size_t k = 0; k < dom.keys.size(); ++k) {
        const std::uint64_t choices = dom.feasible[k]->size();
        count = (choices != 0 && count > kMax / choices) ? kMax : count * choices;
        radices.push_back(static_cast<int>(choices));
        slots.push_back({i, t, static_cast<int>(k)});
      }
    }
  }
  if (count > cap)
    throw CombinatorialBlowup(
        cat("full-history strategy count ", count, " exceeds cap ", cap), count);

  bool first = true;
  std::vector<int> best_pick;
  StrategyTable candidate;
  candidate.pattern = pattern;
  candidate.entries.assign(m.n, std::vector<std::map<std::vector<int>, int>>(T));
  for_each_tuple(radices, [&](const std::vector<int>& pick) {
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const auto& [i, t, k] = slots[s];
      const InfoDomain& dom = domains[i][t - 1];
      candidate.entries[i][t - 1][dom.keys[k]] = (*dom.feasible[k])[pick[s]];
    }
    const double value = evaluate_total_cost(m, candidate.decision(m), T, cap);
    if (first || better(m.sense, value, result.value)) {
      result.value = value;
      best_pick = pick;
      first = false;
    }
  });
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const auto& [i, t, k] = slots[s];
    const InfoDomain& dom = domains[i][t - 1];
    result.strategy.entries[i][t - 1][dom.keys[k]] = (*dom.feasible[k])[best_pick[s]];
  }
  return result;
}

BruteForceResult best_response(const GeneralModel& m, int station,
                               const StationDecision& others, int T,
                               InfoPattern pattern, std::uint64_t cap) {
  BruteForceResult result;
  result.strategy.pattern = pattern;
  result.strategy.entries.assign(m.n, std::vector<std::map<std::vector<int>, int>>(
                                          std::max(T, 0)));
  if (T <= 0) return result;

  const bool partial = m.partial();
  const JointIndexer xx = m.x_indexer();
  const JointIndexer ux = m.u_indexer();

  // Exhaustive over the station's maps for stages 1..T-1; the final stage is
  // optimized pointwise per information realization (admissible because
  // stage-T choices at distinct realizations affect disjoint events).
  std::vector<InfoDomain> prefix_domains;
  std::vector<int> radices;
  struct SlotRef {
    int stage, index;
  };
  std::vector<SlotRef> slots;
  std::uint64_t count = 1;
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  for (int t = 1; t < T; ++t) {
    prefix_domains.push_back(info_domain(m, pattern, station, t));
    const InfoDomain& dom = prefix_domains.back();
    for (std::size_t k = 0; k < dom.keys.size(); ++k) {
      const std::uint64_t choices = dom.feasible[k]->size();
      count = (choices != 0 && count > kMax / choices) ? kMax : count * choices;
      radices.push_back(static_cast<int>(choices));
      slots.push_back({t, static_cast<int>(k)});
    }
  }
  if (count > cap)
    throw CombinatorialBlowup(
        cat("best-response prefix strategy count ", count, " exceeds cap ", cap), count);

  const InfoDomain last_domain = info_domain(m, pattern, station, T);

  bool first = true;
  std::vector<int> best_pick;
  std::map<std::vector<int>, int> best_last;

  auto evaluate = [&](const std::vector<int>& pick, std::map<std::vector<int>, int>* last_out)
      -> double {
    // Own prefix maps for this candidate.
    std::vector<std::map<std::vector<int>, int>> own(T);
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const auto& [t, k] = slots[s];
      const InfoDomain& dom = prefix_domains[t - 1];
      own[t - 1][dom.keys[k]] = (*dom.feasible[k])[pick[s]];
    }

    // Forward exact enumeration; expected costs for stages 1..T-1 accumulate
    // directly, stage-T paths group by the station's information realization.
    double prefix_cost = 0.0;
    std::vector<std::pair<Path, double>> paths;
    for (int z = 0; z < m.z_size; ++z) {
      if (m.initial_shared[z] <= 0.0) continue;
      for (int jx = 0; jx < xx.total(); ++jx) {
        const double px = m.initial_local_joint[z][jx];
        if (px <= 0.0) continue;
        Path base;
        base.z.push_back(z);
        base.x.push_back(xx.digits(jx));
        const double w = m.initial_shared[z] * px;
        if (partial) {
          std::vector<int> yr = m.y_sizes;
          for_each_tuple(yr, [&](const std::vector<int>& y) {
            double py = 1.0;
            for (int i = 0; i < m.n; ++i)
              py *= m.observation_kernels[i][base.x.back()[i]][y[i]];
            if (py <= 0.0) return;
            Path q = base;
            q.y.push_back(y);
            paths.emplace_back(std::move(q), w * py);
          });
        } else {
          paths.emplace_back(std::move(base), w);
        }
      }
    }

    for (int t = 1; t < T; ++t) {
      std::vector<std::pair<Path, double>> next;
      for (auto& [p, w] : paths) {
        std::vector<int> u(m.n);
        for (int j = 0; j < m.n; ++j)
          if (j != station) u[j] = others(j, t, p);
        u[station] =
            own[t - 1].at(StrategyTable::encode_info(pattern, station, t, p, partial));
        p.u.push_back(u);
        const int z = p.z.back();
        const int jx = xx.index(p.x.back());
        const int ju = ux.index(p.u.back());
        prefix_cost += w * m.cost(t - 1, z, jx, ju);
        const Dist& zrow = m.shared_kernel[z][ju];
        const Dist& xrow = m.joint_local[z][jx][ju];
        for (int zn = 0; zn < m.z_size; ++zn) {
          if (zrow[zn] <= 0.0) continue;
          for (int jxn = 0; jxn < xx.total(); ++jxn) {
            if (xrow[jxn] <= 0.0) continue;
            Path q = p;
            q.z.push_back(zn);
            q.x.push_back(xx.digits(jxn));
            const double w2 = w * zrow[zn] * xrow[jxn];
            if (partial) {
              std::vector<int> yr = m.y_sizes;
              for_each_tuple(yr, [&](const std::vector<int>& y) {
                double py = 1.0;
                for (int i = 0; i < m.n; ++i)
                  py *= m.observation_kernels[i][q.x.back()[i]][y[i]];
                if (py <= 0.0) return;
                Path r = q;
                r.y.push_back(y);
                next.emplace_back(std::move(r), w2 * py);
              });
            } else {
              next.emplace_back(std::move(q), w2);
            }
          }
        }
      }
      paths = std::move(next);
    }

    // Final stage: group by the station's information realization.
    struct Group {
      std::vector<std::pair<const Path*, double>> members;
      const std::vector<int>* feasible = nullptr;
    };
    std::map<std::vector<int>, Group> groups;
    for (const auto& [p, w] : paths) {
      const auto key = StrategyTable::encode_info(pattern, station, T, p, partial);
      Group& g = groups[key];
      g.members.emplace_back(&p, w);
      if (g.feasible == nullptr) {
        const int z_t = p.z.back();
        g.feasible = partial ? &m.feasible[station][z_t][0]
                             : &m.feasible[station][z_t][p.x.back()[station]];
      }
    }
    double last_cost = 0.0;
    for (auto& [key, g] : groups) {
      double group_best = 0.0;
      int group_action = -1;
      for (int a : *g.feasible) {
        double contribution = 0.0;
        for (const auto& [pp, w] : g.members) {
          std::vector<int> u(m.n);
          for (int j = 0; j < m.n; ++j)
            if (j != station) u[j] = others(j, T, *pp);
          u[station] = a;
          contribution +=
              w * m.cost(T - 1, pp->z.back(), xx.index(pp->x.back()), ux.index(u));
        }
        if (group_action < 0 || better(m.sense, contribution, group_best)) {
          group_best = contribution;
          group_action = a;
        }
      }
      last_cost += group_best;
      if (last_out) (*last_out)[key] = group_action;
    }
    return prefix_cost + last_cost;
  };

  if (radices.empty()) {
    std::map<std::vector<int>, int> last;
    result.value = evaluate({}, &last);
    best_last = std::move(last);
  } else {
    for_each_tuple(radices, [&](const std::vector<int>& pick) {
      const double value = evaluate(pick, nullptr);
      if (first || better(m.sense, value, result.value)) {
        result.value = value;
        best_pick = pick;
        first = false;
      }
    });
    evaluate(best_pick, &best_last);
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const auto& [t, k] = slots[s];
      const InfoDomain& dom = prefix_domains[t - 1];
      result.strategy.entries[station][t - 1][dom.keys[k]] =
          (*dom.feasible[k])[best_pick[s]];
    }
  }
  result.strategy.entries[station][T - 1] = std::move(best_last);
  return result;
}

namespace {

GeneralModel deterministic_pair_model(
    const std::function<std::pair<int, int>(int, int)>& step) {
  GeneralModel g;
  g.n = 2;
  g.z_size = 1;
  g.x_sizes = {2, 2};
  g.u_sizes = {1, 1};
  g.shared_kernel = {{{1.0}}};
  g.sense = Sense::minimize;
  const JointIndexer xx{{2, 2}};
  g.joint_local.assign(1, std::vector<std::vector<Dist>>(xx.total(),
                                                         std::vector<Dist>(1)));
  for (int x1 = 0; x1 < 2; ++x1) {
    for (int x2 = 0; x2 < 2; ++x2) {
      const auto [n1, n2] = step(x1, x2);
      Dist row(xx.total(), 0.0);
      const std::vector<int> next = {n1, n2};
      row[xx.index(next)] = 1.0;
      const std::vector<int> cur = {x1, x2};
      g.joint_local[0][xx.index(cur)][0] = row;
    }
  }
  g.stage_costs.assign(
      1, {std::vector<std::vector<double>>(xx.total(), std::vector<double>(1, 0.0))});
  g.feasible.assign(2, {});
  for (int i = 0; i < 2; ++i) g.feasible[i] = {{{0}, {0}}};
  g.initial_shared = {1.0};
  g.initial_local_joint = {Dist(xx.total(), 0.25)};
  return g;
}

}  // namespace

GeneralModel counterexample_cross_coupled() {
  return deterministic_pair_model([](int x1, int x2) { return std::make_pair(x2, x1); });
}

GeneralModel counterexample_correlated() {
  return deterministic_pair_model([](int x1, int x2) {
    (void)x1;
    return std::make_pair(x2, x2);
  });
}

CoupledModel random_model(const RandomModelOptions& opts, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5eed5eed5eed5eedull);
  auto random_dist = [&](int size) {
    Dist d(size);
    double sum = 0.0;
    for (double& v : d) {
      v = 0.05 + uniform01(rng);
      sum += v;
    }
    for (double& v : d) v /= sum;
    return d;
  };

  CoupledModel m;
  m.n = opts.n;
  m.z_size = opts.z_size;
  m.x_sizes.assign(opts.n, opts.x_size);
  m.u_sizes.assign(opts.n, opts.u_size);
  m.sense = opts.sense;
  const int ju_total = m.u_indexer().total();
  const int jx_total = m.x_indexer().total();

  m.shared_kernel.assign(m.z_size, std::vector<Dist>(ju_total));
  for (auto& row : m.shared_kernel)
    for (auto& d : row) d = random_dist(m.z_size);

  m.local_kernels.assign(opts.n, {});
  for (int i = 0; i < opts.n; ++i) {
    m.local_kernels[i].assign(m.z_size, {});
    for (int z = 0; z < m.z_size; ++z) {
      m.local_kernels[i][z].assign(opts.x_size, std::vector<Dist>(ju_total));
      for (int x = 0; x < opts.x_size; ++x)
        for (int ju = 0; ju < ju_total; ++ju)
          m.local_kernels[i][z][x][ju] = random_dist(opts.x_size);
    }
  }

  if (opts.partial) {
    m.y_sizes.assign(opts.n, opts.y_size);
    m.observation_kernels.assign(opts.n, {});
    for (int i = 0; i < opts.n; ++i) {
      m.observation_kernels[i].assign(opts.x_size, Dist{});
      for (int x = 0; x < opts.x_size; ++x)
        m.observation_kernels[i][x] = random_dist(opts.y_size);
    }
  }

  m.stage_costs.assign(opts.stages, {});
  for (auto& tensor : m.stage_costs) {
    tensor.assign(m.z_size, std::vector<std::vector<double>>(
                                jx_total, std::vector<double>(ju_total)));
    for (auto& plane : tensor)
      for (auto& row : plane)
        for (double& c : row) c = uniform01(rng);
  }

  m.allow_all_actions();
  if (opts.restrict_feasibility && !opts.partial) {
    for (int i = 0; i < opts.n; ++i)
      for (int z = 0; z < m.z_size; ++z)
        for (int x = 0; x < opts.x_size; ++x) {
          std::vector<int> kept;
          for (int u = 0; u < opts.u_size; ++u)
            if (uniform01(rng) < 0.7) kept.push_back(u);
          if (kept.empty())
            kept.push_back(static_cast<int>(rng() % static_cast<unsigned>(opts.u_size)));
          m.feasible[i][z][x] = kept;
        }
  }

  m.initial_shared = random_dist(m.z_size);
  m.initial_local.assign(opts.n, {});
  for (int i = 0; i < opts.n; ++i) {
    m.initial_local[i].assign(m.z_size, Dist{});
    for (int z = 0; z < m.z_size; ++z) m.initial_local[i][z] = random_dist(opts.x_size);
  }
  return m;
}

StrategyTable random_full_history_strategy(const GeneralModel& m, int T,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xabcdef0123456789ull);
  StrategyTable table;
  table.pattern = InfoPattern::kFullHistory;
  table.entries.assign(m.n, std::vector<std::map<std::vector<int>, int>>(T));
  for (int i = 0; i < m.n; ++i) {
    for (int t = 1; t <= T; ++t) {
      const InfoDomain dom = info_domain(m, InfoPattern::kFullHistory, i, t);
      for (std::size_t k = 0; k < dom.keys.size(); ++k) {
        const auto& feasible = *dom.feasible[k];
        table.entries[i][t - 1][dom.keys[k]] =
            feasible[rng() % feasible.size()];
      }
    }
  }
  return table;
}

}  // namespace csdp::oracle
