#include "csdp/prescription.hpp"

#include <limits>

namespace csdp {

std::uint64_t count_prescriptions(const CoupledModel& m, int z) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t count = 1;
  for (int i = 0; i < m.n; ++i) {
    for (int x = 0; x < m.x_sizes[i]; ++x) {
      const std::uint64_t k = m.feasible_at(i, z, x).size();
      if (k == 0) return 0;
      if (count > kMax / k) return kMax;
      count *= k;
    }
  }
  return count;
}

std::vector<Prescription> enumerate_prescriptions(const CoupledModel& m, int z,
                                                  std::uint64_t cap) {
  if (z < 0 || z >= m.z_size) throw IndexError(cat("shared state ", z, " out of range"));
  const std::uint64_t count = count_prescriptions(m, z);
  if (count > cap)
    throw CombinatorialBlowup(
        cat("prescription count ", count, " at z=", z, " exceeds cap ", cap), count);

  // Flatten the (i, x) slots; an odometer over feasible-set positions with the
  // last slot fastest yields lexicographic order.
  struct Slot {
    int i, x;
    const std::vector<int>* choices;
  };
  std::vector<Slot> slots;
  for (int i = 0; i < m.n; ++i)
    for (int x = 0; x < m.x_sizes[i]; ++x)
      slots.push_back({i, x, &m.feasible_at(i, z, x)});

  std::vector<Prescription> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> pos(slots.size(), 0);
  Prescription d;
  d.maps.resize(m.n);
  for (int i = 0; i < m.n; ++i) d.maps[i].resize(m.x_sizes[i]);
  while (true) {
    for (std::size_t s = 0; s < slots.size(); ++s)
      d.maps[slots[s].i][slots[s].x] = (*slots[s].choices)[pos[s]];
    out.push_back(d);
    std::size_t s = slots.size();
    while (s-- > 0) {
      if (++pos[s] < slots[s].choices->size()) break;
      pos[s] = 0;
      if (s == 0) return out;
    }
    if (slots.empty()) return out;
  }
}

}  // namespace csdp
