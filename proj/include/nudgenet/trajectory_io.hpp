#pragma once

#include "nudgenet/dynamics.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace nudgenet {

/// CSV with header `t,x1,...,xd`; values use shortest round-trip decimals.
std::string trajectory_to_csv(const Trajectory& traj);
Trajectory trajectory_from_csv(const std::string& text);

/// Binary layout: 8-byte magic "NGTRAJ01", u64 dim, u64 count, then `count`
/// rows of (t, x1..xd) as little-endian float64.
void write_trajectory(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory(std::istream& is);

/// An ensemble file is a concatenation of binary trajectories.
void save_ensemble(const std::filesystem::path& path, const std::vector<Trajectory>& refs);
std::vector<Trajectory> load_ensemble(const std::filesystem::path& path);

}  // namespace nudgenet
