// CSV persistence for observation paths. Sample file: header `t,y`, one row
// per grid point. Companion jump table `<base>_jumps.csv`: header
// `n,t_jump,z`. Both files may carry leading `#` manifest lines.

#include "jdfilter/simulate.hpp"

#include "jdfilter/csv.hpp"

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace jdfilter {

namespace {

std::string jumps_path_for(const std::string& base_path) {
  const std::string suffix = ".csv";
  if (base_path.size() >= suffix.size() &&
      base_path.compare(base_path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return base_path.substr(0, base_path.size() - suffix.size()) + "_jumps.csv";
  return base_path + "_jumps.csv";
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

void save_observation(const ObservationPath& obs, const std::string& base_path,
                      const std::string& manifest_line) {
  {
    std::ofstream out(base_path);
    if (!out) throw std::runtime_error(base_path + ": cannot open for writing");
    if (!manifest_line.empty()) out << "# " << manifest_line << "\n";
    out << "t,y\n";
    for (Eigen::Index i = 0; i < obs.t.size(); ++i)
      out << format_double(obs.t[i]) << "," << format_double(obs.y[i]) << "\n";
  }
  {
    const std::string jp = jumps_path_for(base_path);
    std::ofstream out(jp);
    if (!out) throw std::runtime_error(jp + ": cannot open for writing");
    if (!manifest_line.empty()) out << "# " << manifest_line << "\n";
    out << "n,t_jump,z\n";
    for (std::size_t n = 0; n < obs.jumps.size(); ++n)
      out << n << "," << format_double(obs.jumps[n].time) << ","
          << format_double(obs.jumps[n].size) << "\n";
  }
}

ObservationPath load_observation(const std::string& base_path) {
  ObservationPath obs;

  const auto lines = read_lines(base_path);
  std::vector<double> ts, ys;
  bool header_seen = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string line = trim(lines[ln]);
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "t,y")
        throw std::runtime_error(base_path + ":" + std::to_string(ln + 1) +
                                 ": expected header 't,y'");
      header_seen = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 2)
      throw std::runtime_error(base_path + ":" + std::to_string(ln + 1) + ": expected 2 columns");
    const std::string ctx = base_path + ":" + std::to_string(ln + 1);
    const double t = parse_double(trim(cells[0]), ctx);
    const double y = parse_double(trim(cells[1]), ctx);
    if (!ts.empty() && !(t > ts.back()))
      throw std::runtime_error(ctx + ": grid times must be strictly increasing");
    ts.push_back(t);
    ys.push_back(y);
  }
  if (!header_seen) throw std::runtime_error(base_path + ": missing header 't,y'");
  if (ts.empty()) throw std::runtime_error(base_path + ": no grid points");

  obs.t = Eigen::Map<Eigen::VectorXd>(ts.data(), static_cast<Eigen::Index>(ts.size()));
  obs.y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));

  std::map<double, std::ptrdiff_t> index_of;
  for (Eigen::Index i = 0; i < obs.t.size(); ++i) index_of[obs.t[i]] = i;

  const std::string jp = jumps_path_for(base_path);
  const auto jlines = read_lines(jp);
  header_seen = false;
  for (std::size_t ln = 0; ln < jlines.size(); ++ln) {
    const std::string line = trim(jlines[ln]);
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "n,t_jump,z")
        throw std::runtime_error(jp + ":" + std::to_string(ln + 1) +
                                 ": expected header 'n,t_jump,z'");
      header_seen = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 3)
      throw std::runtime_error(jp + ":" + std::to_string(ln + 1) + ": expected 3 columns");
    const std::string ctx = jp + ":" + std::to_string(ln + 1);
    const double t = parse_double(trim(cells[1]), ctx);
    const double z = parse_double(trim(cells[2]), ctx);
    if (z == 0.0) throw std::runtime_error(ctx + ": jump size must be nonzero");
    const auto it = index_of.find(t);
    if (it == index_of.end())
      throw std::runtime_error(ctx + ": jump time is not a grid point of the sample file");
    if (!obs.jumps.empty() && !(t > obs.jumps.back().time))
      throw std::runtime_error(ctx + ": jump times must be strictly increasing");
    obs.jumps.push_back({it->second, t, z});
  }
  if (!header_seen) throw std::runtime_error(jp + ": missing header 'n,t_jump,z'");
  return obs;
}

}  // namespace jdfilter
