#include "nudgenet/trajectory_io.hpp"

#include "nudgenet/io_util.hpp"

#include <fstream>
#include <sstream>

namespace nudgenet {

namespace {
constexpr std::string_view kMagic = "NGTRAJ01";
}

std::string trajectory_to_csv(const Trajectory& traj) {
  std::string out = "t";
  const int d = traj.dim();
  for (int i = 1; i <= d; ++i) {
    out += ",x" + std::to_string(i);
  }
  out += '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out += io::format_double(traj.times[k]);
    for (int i = 0; i < d; ++i) {
      out += ',';
      out += io::format_double(traj.states[k][i]);
    }
    out += '\n';
  }
  return out;
}

Trajectory trajectory_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("trajectory csv: missing header");
  }
  const auto header = io::split(io::trim(line), ',');
  if (header.empty() || header[0] != "t") {
    throw FormatError("trajectory csv: header must start with 't'");
  }
  const auto d = static_cast<Eigen::Index>(header.size() - 1);
  Trajectory traj;
  while (std::getline(in, line)) {
    if (io::trim(line).empty()) {
      continue;
    }
    const auto cells = io::split(io::trim(line), ',');
    if (static_cast<Eigen::Index>(cells.size()) != d + 1) {
      throw FormatError("trajectory csv: wrong number of columns");
    }
    State s(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      s[i] = io::parse_double(cells[static_cast<std::size_t>(i + 1)]);
    }
    traj.push_back(io::parse_double(cells[0]), std::move(s));
  }
  traj.validate();
  return traj;
}

void write_trajectory(std::ostream& os, const Trajectory& traj) {
  const auto d = static_cast<std::size_t>(traj.dim());
  io::write_bytes(os, kMagic);
  io::write_u64(os, d);
  io::write_u64(os, traj.size());
  std::vector<double> row(d + 1);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    row[0] = traj.times[k];
    for (std::size_t i = 0; i < d; ++i) {
      row[i + 1] = traj.states[k][static_cast<Eigen::Index>(i)];
    }
    io::write_f64s(os, row);
  }
}

Trajectory read_trajectory(std::istream& is) {
  if (io::read_bytes(is, kMagic.size()) != kMagic) {
    throw FormatError("trajectory: bad magic");
  }
  const auto d = io::read_u64(is);
  const auto count = io::read_u64(is);
  if (d == 0 || d > (1u << 20)) {
    throw FormatError("trajectory: implausible dimension");
  }
  Trajectory traj;
  traj.times.reserve(count);
  traj.states.reserve(count);
  std::vector<double> row(d + 1);
  for (std::uint64_t k = 0; k < count; ++k) {
    io::read_f64s(is, row);
    traj.push_back(row[0], Eigen::Map<const State>(row.data() + 1, static_cast<Eigen::Index>(d)));
  }
  return traj;
}

void save_ensemble(const std::filesystem::path& path, const std::vector<Trajectory>& refs) {
  std::ostringstream os;
  for (const auto& r : refs) {
    write_trajectory(os, r);
  }
  io::write_file(path, os.str());
}

std::vector<Trajectory> load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open ensemble " + path.string());
  }
  std::vector<Trajectory> refs;
  while (in.peek() != std::char_traits<char>::eof()) {
    refs.push_back(read_trajectory(in));
  }
  return refs;
}

}  // namespace nudgenet
