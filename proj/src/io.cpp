#include "cstar/io.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace cstar {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) throw IoError("cannot parse number '" + s + "'");
  return v;
}

namespace {

long long parse_long(const std::string& s) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("cannot parse integer '" + s + "'");
  return v;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path, const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      table.header = fields;
      if (table.header != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw IoError(path + ": expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != expected_header.size())
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(expected_header.size()) + " fields");
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw IoError(path + ": missing header row");
  return table;
}

// Time keys: plain integers, or ISO dates (YYYY-MM / YYYY-MM-DD) mapped to a
// monthly index. Mixing the two forms in one file is an error.
struct TimeKey {
  long long key = 0;
  bool is_date = false;
};

TimeKey parse_time(const std::string& s) {
  if (s.empty()) throw IoError("empty time field");
  bool digits = true;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(std::isdigit(static_cast<unsigned char>(s[i])) || (i == 0 && s[i] == '-'))) {
      digits = false;
      break;
    }
  }
  if (digits) return {parse_long(s), false};
  int y = 0, m = 0, d = 1;
  if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d) >= 2 && m >= 1 && m <= 12)
    return {static_cast<long long>(y) * 12 + (m - 1), true};
  throw IoError("cannot parse time '" + s + "' (expected integer or YYYY-MM[-DD])");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

}  // namespace

LoadedPanel load_panel(const std::string& path, const PanelLoadOptions& opts) {
  CsvTable table = read_csv(path, {"region_id", "time", "part", "value"});
  if (table.rows.empty()) throw IoError(path + ": no data rows");

  std::set<std::string> region_set, part_set;
  std::map<long long, std::string> time_spelling;
  bool any_date = false, any_int = false;
  struct Cell {
    double value;
  };
  std::map<std::tuple<std::string, long long, std::string>, double> cells;

  for (const auto& row : table.rows) {
    const std::string& region = row[0];
    const TimeKey tk = parse_time(row[1]);
    (tk.is_date ? any_date : any_int) = true;
    const std::string& part = row[2];
    const double value = parse_double(row[3]);
    if (!(value >= 0.0)) throw ValidationError("negative value for (" + region + "," + row[1] + "," + part + ")");
    region_set.insert(region);
    part_set.insert(part);
    auto [it, inserted] = time_spelling.emplace(tk.key, row[1]);
    if (!inserted && it->second != row[1])
      throw ValidationError("time spellings '" + it->second + "' and '" + row[1] + "' collide");
    auto key = std::make_tuple(region, tk.key, part);
    if (!cells.emplace(key, value).second)
      throw ValidationError("duplicate cell (" + region + "," + row[1] + "," + part + ")");
  }
  if (any_date && any_int) throw ValidationError(path + ": time keys mix integers and dates");
  if (part_set.size() < 2) throw ValidationError("panel needs at least 2 parts");

  const Eigen::Index d = static_cast<Eigen::Index>(part_set.size());
  LoadedPanel panel{PanelData{}, build_basis(d, opts.basis, opts.partition), {}, {}, {}, {}, 0};
  panel.regions.assign(region_set.begin(), region_set.end());
  panel.parts.assign(part_set.begin(), part_set.end());
  for (const auto& [key, label] : time_spelling) {
    panel.times.push_back(key);
    panel.time_labels.push_back(label);
  }
  if (panel.times.size() < 2) throw ValidationError("panel needs at least 2 time points (Y_0 plus responses)");
  for (std::size_t i = 2; i < panel.times.size(); ++i) {
    if (panel.times[i] - panel.times[i - 1] != panel.times[1] - panel.times[0])
      throw ValidationError("time steps are not equidistant (at '" + panel.time_labels[i] + "')");
  }

  const Eigen::Index n = static_cast<Eigen::Index>(panel.regions.size());

  std::vector<Eigen::MatrixXd> ilr_panels;
  for (std::size_t ti = 0; ti < panel.times.size(); ++ti) {
    Eigen::MatrixXd y(n, d - 1);
    for (Eigen::Index r = 0; r < n; ++r) {
      Eigen::VectorXd raw(d);
      for (Eigen::Index c = 0; c < d; ++c) {
        auto it = cells.find(std::make_tuple(panel.regions[static_cast<std::size_t>(r)], panel.times[ti],
                                             panel.parts[static_cast<std::size_t>(c)]));
        if (it == cells.end())
          throw ValidationError("missing cell (" + panel.regions[static_cast<std::size_t>(r)] + "," +
                                panel.time_labels[ti] + "," + panel.parts[static_cast<std::size_t>(c)] + ")");
        raw[c] = it->second;
      }
      Composition comp = [&] {
        if (opts.zero_policy == ZeroPolicy::replace) {
          int replaced = 0;
          Composition out = closure_replacing_zeros(raw, 1.0, opts.zero_delta, &replaced);
          panel.zeros_replaced += replaced;
          return out;
        }
        for (Eigen::Index c = 0; c < d; ++c)
          if (raw[c] == 0.0)
            throw ValidationError("zero part (" + panel.regions[static_cast<std::size_t>(r)] + "," +
                                  panel.time_labels[ti] + "," + panel.parts[static_cast<std::size_t>(c)] +
                                  "); rerun with the replace policy to substitute zeros");
        return closure(raw);
      }();
      y.row(r) = ilr(comp, panel.basis).transpose();
    }
    ilr_panels.push_back(std::move(y));
  }

  panel.data.Y0 = ilr_panels.front();
  panel.data.Y.assign(ilr_panels.begin() + 1, ilr_panels.end());
  panel.data.validate();
  return panel;
}

void save_panel(const std::string& path, const std::vector<std::string>& regions,
                const std::vector<std::string>& time_labels, const std::vector<std::string>& parts,
                const std::vector<Eigen::MatrixXd>& panels) {
  if (time_labels.size() != panels.size()) throw ValidationError("one time label per panel required");
  auto out = open_out(path);
  out << "region_id,time,part,value\n";
  for (std::size_t t = 0; t < panels.size(); ++t) {
    const auto& m = panels[t];
    if (m.rows() != static_cast<Eigen::Index>(regions.size()) ||
        m.cols() != static_cast<Eigen::Index>(parts.size()))
      throw ValidationError("panel shape does not match id maps");
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        out << regions[static_cast<std::size_t>(r)] << ',' << time_labels[t] << ','
            << parts[static_cast<std::size_t>(c)] << ',' << format_double(m(r, c)) << '\n';
  }
}

std::vector<std::vector<Eigen::MatrixXd>> load_regressors(const std::string& path, const LoadedPanel& panel) {
  CsvTable table = read_csv(path, {"region_id", "time", "regressor", "component", "value"});
  const Eigen::Index n = static_cast<Eigen::Index>(panel.regions.size());
  const Eigen::Index p = panel.data.p();

  std::map<std::string, Eigen::Index> region_of;
  for (std::size_t i = 0; i < panel.regions.size(); ++i)
    region_of[panel.regions[i]] = static_cast<Eigen::Index>(i);
  std::map<long long, Eigen::Index> t_of;  // response times only
  for (std::size_t i = 1; i < panel.times.size(); ++i)
    t_of[panel.times[i]] = static_cast<Eigen::Index>(i - 1);

  std::set<std::string> labels;
  for (const auto& row : table.rows) labels.insert(row[2]);
  std::map<std::string, Eigen::Index> reg_of;
  Eigen::Index qi = 0;
  for (const auto& l : labels) reg_of[l] = qi++;

  const Eigen::Index T = panel.data.T();
  std::vector<std::vector<Eigen::MatrixXd>> x(
      static_cast<std::size_t>(T),
      std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(qi), Eigen::MatrixXd::Constant(n, p, std::numeric_limits<double>::quiet_NaN())));

  for (const auto& row : table.rows) {
    auto rit = region_of.find(row[0]);
    if (rit == region_of.end()) throw ValidationError("regressor file names unknown region '" + row[0] + "'");
    const TimeKey tk = parse_time(row[1]);
    auto tit = t_of.find(tk.key);
    if (tit == t_of.end()) continue;  // times outside the response range are ignored
    const Eigen::Index i = reg_of[row[2]];
    const double value = parse_double(row[4]);
    auto& mat = x[static_cast<std::size_t>(tit->second)][static_cast<std::size_t>(i)];
    if (row[3] == "*") {
      mat.row(rit->second).setConstant(value);
    } else {
      const long long comp = parse_long(row[3]);
      if (comp < 1 || comp > p)
        throw ValidationError("component " + row[3] + " outside 1.." + std::to_string(p));
      mat(rit->second, static_cast<Eigen::Index>(comp - 1)) = value;
    }
  }

  for (Eigen::Index t = 0; t < T; ++t)
    for (const auto& [label, i] : reg_of) {
      const auto& mat = x[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index j = 0; j < p; ++j)
          if (!std::isfinite(mat(r, j)))
            throw ValidationError("regressor '" + label + "' missing value for region '" +
                                  panel.regions[static_cast<std::size_t>(r)] + "' at time '" +
                                  panel.time_labels[static_cast<std::size_t>(t + 1)] + "' component " +
                                  std::to_string(j + 1));
    }
  return x;
}

SpatialWeights load_adjacency(const std::string& path, std::optional<Eigen::Index> n) {
  CsvTable table = read_csv(path, {"i", "j"});
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  Eigen::Index max_id = -1;
  for (const auto& row : table.rows) {
    const Eigen::Index i = parse_long(row[0]), j = parse_long(row[1]);
    pairs.emplace_back(i, j);
    max_id = std::max({max_id, i, j});
  }
  return from_adjacency(n.value_or(max_id + 1), pairs);
}

SpatialWeights load_distance_weights(const std::string& path, double radius) {
  CsvTable table = read_csv(path, {"id", "x", "y"});
  std::vector<std::pair<double, double>> coords(table.rows.size());
  std::vector<bool> seen(table.rows.size(), false);
  for (const auto& row : table.rows) {
    const long long id = parse_long(row[0]);
    if (id < 0 || id >= static_cast<long long>(coords.size()))
      throw ValidationError("coordinate ids must be 0..n-1, got " + row[0]);
    if (seen[static_cast<std::size_t>(id)]) throw ValidationError("duplicate coordinate id " + row[0]);
    seen[static_cast<std::size_t>(id)] = true;
    coords[static_cast<std::size_t>(id)] = {parse_double(row[1]), parse_double(row[2])};
  }
  return distance_cutoff(coords, radius);
}

void save_weights(const std::string& path, const SpatialWeights& w) {
  auto out = open_out(path);
  out << "i,j,w\n";
  const auto& m = w.matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (SpatialWeights::Sparse::InnerIterator it(m, i); it; ++it)
      out << i << ',' << it.col() << ',' << format_double(it.value()) << '\n';
}

SpatialWeights load_weights(const std::string& path, std::optional<Eigen::Index> n, bool standardized) {
  CsvTable table = read_csv(path, {"i", "j", "w"});
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::Index max_id = -1;
  for (const auto& row : table.rows) {
    const Eigen::Index i = parse_long(row[0]), j = parse_long(row[1]);
    trip.emplace_back(i, j, parse_double(row[2]));
    max_id = std::max({max_id, i, j});
  }
  return SpatialWeights(n.value_or(max_id + 1), trip, standardized);
}

void save_fit(const std::string& path, const FitResult& fit, bool first_regressor_is_intercept) {
  const Eigen::Index q = fit.q(), p = fit.p();
  auto out = open_out(path);
  out << "block,coef,estimate,std_error,t_stat\n";
  const auto names = parameter_names(q, p, first_regressor_is_intercept);
  auto write_row = [&](const std::string& block, Eigen::Index idx) {
    const double se = fit.std_errors[idx];
    const double t = fit.t_stats[idx];
    out << block << ',' << names[static_cast<std::size_t>(idx)] << ',' << format_double(fit.estimates[idx])
        << ',' << (std::isfinite(se) ? format_double(se) : "") << ','
        << (std::isfinite(t) ? format_double(t) : "") << '\n';
  };
  for (Eigen::Index i = 0; i < q; ++i) {
    const bool intercept_row = first_regressor_is_intercept && i == 0;
    for (Eigen::Index j = 0; j < p; ++j)
      write_row(intercept_row ? "intercept" : "beta", beta_index(q, p, i, j));
  }
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index k = 0; k < p; ++k) write_row("psi", psi_index(q, p, j, k));
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index k = 0; k < p; ++k) write_row("pi", pi_index(q, p, j, k));
  write_row("sigma", sigma_index(q, p));
}

void save_mc(const std::string& path, const McResult& res) {
  auto rows = summarize(res);
  auto out = open_out(path);
  out << "param_group,param,side,n,T,rmse,bias,n_fail\n";
  for (const auto& r : rows)
    out << r.param_group << ',' << r.param << ',' << r.side << ',' << r.n << ',' << r.T << ','
        << format_double(r.rmse) << ',' << format_double(r.bias) << ',' << r.n_fail << '\n';
}

void save_mc_manifest(const std::string& path, const McResult& res, const std::string& preset_label) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["seed"] = res.config.seed;
  j["preset"] = preset_label;
  j["replications"] = res.config.replications;
  j["burn_in"] = res.config.burn_in;
  j["threads"] = res.config.threads;
  j["wall_seconds"] = res.wall_seconds;
  j["grid_sides"] = res.config.grid_sides;
  j["horizons"] = res.config.horizons;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : res.cells)
    cells.push_back({{"side", c.side}, {"n", c.n}, {"T", c.T}, {"failures", c.failures}});
  j["cells"] = cells;
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void save_coordinates(const std::string& path, const std::vector<std::string>& regions,
                      const std::vector<std::string>& time_labels,
                      const std::vector<Eigen::MatrixXd>& coords) {
  if (time_labels.size() != coords.size()) throw ValidationError("one time label per panel required");
  auto out = open_out(path);
  out << "region_id,time,coord,value\n";
  for (std::size_t t = 0; t < coords.size(); ++t) {
    const auto& m = coords[t];
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        out << regions[static_cast<std::size_t>(r)] << ',' << time_labels[t] << ',' << c + 1 << ','
            << format_double(m(r, c)) << '\n';
  }
}

CoordinatePanel load_coordinate_panel(const std::string& path) {
  CsvTable table = read_csv(path, {"region_id", "time", "coord", "value"});
  if (table.rows.empty()) throw IoError(path + ": no data rows");
  std::set<std::string> region_set;
  std::map<long long, std::string> time_spelling;
  Eigen::Index max_coord = 0;
  std::map<std::tuple<std::string, long long, long long>, double> cells;
  for (const auto& row : table.rows) {
    const TimeKey tk = parse_time(row[1]);
    const long long coord = parse_long(row[2]);
    if (coord < 1) throw ValidationError("coordinate index must be >= 1");
    max_coord = std::max<Eigen::Index>(max_coord, coord);
    region_set.insert(row[0]);
    auto [it, inserted] = time_spelling.emplace(tk.key, row[1]);
    if (!inserted && it->second != row[1])
      throw ValidationError("time spellings '" + it->second + "' and '" + row[1] + "' collide");
    if (!cells.emplace(std::make_tuple(row[0], tk.key, coord), parse_double(row[3])).second)
      throw ValidationError("duplicate coordinate (" + row[0] + "," + row[1] + "," + row[2] + ")");
  }
  CoordinatePanel out;
  out.regions.assign(region_set.begin(), region_set.end());
  for (const auto& [key, label] : time_spelling) out.time_labels.push_back(label);
  Eigen::Index ti = 0;
  for (const auto& [key, label] : time_spelling) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(out.regions.size()), max_coord);
    for (std::size_t r = 0; r < out.regions.size(); ++r)
      for (Eigen::Index c = 1; c <= max_coord; ++c) {
        auto it = cells.find(std::make_tuple(out.regions[r], key, static_cast<long long>(c)));
        if (it == cells.end())
          throw ValidationError("missing coordinate (" + out.regions[r] + "," + label + "," +
                                std::to_string(c) + ")");
        m(static_cast<Eigen::Index>(r), c - 1) = it->second;
      }
    out.coords.push_back(std::move(m));
    ++ti;
  }
  return out;
}

namespace {

Eigen::MatrixXd json_matrix(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw IoError("config field '" + name + "' must be an array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) throw IoError("ragged matrix in '" + name + "'");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

// `key = value` fallback: scalars, comma lists, and `;`-separated matrix rows.
nlohmann::json kv_to_json(const std::string& text) {
  nlohmann::json j;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw IoError("config line without '=': " + s);
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (value.find(';') != std::string::npos) {
      nlohmann::json rows = nlohmann::json::array();
      std::istringstream rs(value);
      std::string row;
      while (std::getline(rs, row, ';')) {
        nlohmann::json cells = nlohmann::json::array();
        std::istringstream cs(row);
        std::string cell;
        while (std::getline(cs, cell, ',')) cells.push_back(parse_double(trim(cell)));
        rows.push_back(cells);
      }
      j[key] = rows;
    } else if (value.find(',') != std::string::npos) {
      nlohmann::json list = nlohmann::json::array();
      std::istringstream cs(value);
      std::string cell;
      while (std::getline(cs, cell, ',')) list.push_back(parse_double(trim(cell)));
      j[key] = list;
    } else if (value == "true" || value == "false") {
      j[key] = value == "true";
    } else {
      j[key] = parse_double(value);
    }
  }
  return j;
}

}  // namespace

McConfig load_mc_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  nlohmann::json j;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    j = nlohmann::json::parse(text);
  } else {
    j = kv_to_json(text);
  }

  McConfig cfg;
  auto int_list = [&](const char* key, std::vector<Eigen::Index>& out) {
    if (!j.contains(key)) return;
    out.clear();
    if (j[key].is_array())
      for (const auto& v : j[key]) out.push_back(static_cast<Eigen::Index>(v.get<double>()));
    else
      out.push_back(static_cast<Eigen::Index>(j[key].get<double>()));
  };
  int_list("grid_sides", cfg.grid_sides);
  int_list("horizons", cfg.horizons);
  if (j.contains("replications")) cfg.replications = static_cast<int>(j["replications"].get<double>());
  if (j.contains("seed")) cfg.seed = static_cast<std::uint64_t>(j["seed"].get<double>());
  if (j.contains("threads")) cfg.threads = static_cast<int>(j["threads"].get<double>());
  if (j.contains("burn_in")) cfg.burn_in = static_cast<Eigen::Index>(j["burn_in"].get<double>());
  if (j.contains("sigma2")) cfg.params.sigma2 = j["sigma2"].get<double>();
  if (j.contains("Psi")) cfg.params.Psi = json_matrix(j["Psi"], "Psi");
  if (j.contains("Pi")) cfg.params.Pi = json_matrix(j["Pi"], "Pi");
  if (j.contains("B")) cfg.params.B = json_matrix(j["B"], "B");
  if (j.contains("intercept")) cfg.regressors.intercept = j["intercept"].get<bool>();
  if (j.contains("n_random")) {
    cfg.regressors.n_random = static_cast<Eigen::Index>(j["n_random"].get<double>());
  } else if (j.contains("B")) {
    // infer the regressor count from B when not given explicitly
    cfg.regressors.n_random = std::max<Eigen::Index>(cfg.params.B.rows() - (cfg.regressors.intercept ? 1 : 0), 0);
  }
  cfg.validate();
  return cfg;
}

}  // namespace cstar
