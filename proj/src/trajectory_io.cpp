// Filter trajectory CSV: `t,log_mass,pi_<label0>,...`. Jump times produce two
// consecutive rows (left limit, then post-jump value); readers recover the
// flags from the repeated time.

#include "jdfilter/trajectory.hpp"

#include "jdfilter/csv.hpp"

#include <fstream>
#include <stdexcept>

namespace jdfilter {

void write_filter_csv(const std::string& path, const FilterTrajectory& traj,
                      const std::vector<std::string>& state_labels,
                      const Eigen::VectorXd* log_mass, const std::string& manifest_line) {
  if (static_cast<Eigen::Index>(state_labels.size()) != traj.probs.cols())
    throw std::invalid_argument("write_filter_csv: one label per state required");
  if (log_mass && log_mass->size() != traj.rows())
    throw std::invalid_argument("write_filter_csv: log_mass rows mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  if (!manifest_line.empty()) out << "# " << manifest_line << "\n";
  out << "t,log_mass";
  for (const auto& label : state_labels) out << ",pi_" << label;
  out << "\n";
  for (Eigen::Index i = 0; i < traj.rows(); ++i) {
    out << format_double(traj.t[i]) << ","
        << format_double(log_mass ? (*log_mass)[i] : 0.0);
    for (Eigen::Index u = 0; u < traj.probs.cols(); ++u)
      out << "," << format_double(traj.probs(i, u));
    out << "\n";
  }
}

FilterTrajectory read_filter_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  std::vector<double> ts, masses;
  std::vector<std::vector<double>> rows;
  bool header_seen = false;
  Eigen::Index n_states = 0;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (!header_seen) {
      const auto cells = split(s, ',');
      if (cells.size() < 3 || cells[0] != "t" || cells[1] != "log_mass")
        throw std::runtime_error(path + ":" + std::to_string(ln) + ": unexpected header");
      n_states = static_cast<Eigen::Index>(cells.size()) - 2;
      header_seen = true;
      continue;
    }
    const auto cells = split(s, ',');
    if (static_cast<Eigen::Index>(cells.size()) != n_states + 2)
      throw std::runtime_error(path + ":" + std::to_string(ln) + ": wrong column count");
    const std::string ctx = path + ":" + std::to_string(ln);
    ts.push_back(parse_double(trim(cells[0]), ctx));
    masses.push_back(parse_double(trim(cells[1]), ctx));
    std::vector<double> row;
    for (Eigen::Index u = 0; u < n_states; ++u)
      row.push_back(parse_double(trim(cells[static_cast<std::size_t>(u) + 2]), ctx));
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw std::runtime_error(path + ": missing header");

  FilterTrajectory traj;
  const Eigen::Index n = static_cast<Eigen::Index>(ts.size());
  traj.t = Eigen::Map<Eigen::VectorXd>(ts.data(), n);
  traj.probs.resize(n, n_states);
  traj.post_jump.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index u = 0; u < n_states; ++u)
      traj.probs(i, u) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(u)];
    if (i > 0 && traj.t[i] == traj.t[i - 1]) traj.post_jump[static_cast<std::size_t>(i)] = 1;
  }
  return traj;
}

}  // namespace jdfilter
