#include "felogit/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "felogit/errors.hpp"

namespace felogit {

bool PanelUnit::covariates_constant() const {
  for (int t = 1; t < x.rows(); ++t) {
    if ((x.row(t) - x.row(0)).cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return true;
}

bool PanelDataset::balanced() const {
  if (individuals.empty()) return true;
  const int t0 = individuals.front().periods();
  for (const auto& u : individuals) {
    if (u.periods() != t0) return false;
  }
  return true;
}

int PanelDataset::max_periods() const {
  int m = 0;
  for (const auto& u : individuals) m = std::max(m, u.periods());
  return m;
}

void PanelDataset::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& u : individuals) {
    if (!seen.insert(u.id).second) {
      throw ValidationError("duplicate individual id '" + u.id + "'");
    }
    if (u.periods() < 2) {
      throw ValidationError("unit '" + u.id + "' has fewer than 2 periods");
    }
    if (u.x.rows() != u.periods() || u.x.cols() != p) {
      throw ValidationError("unit '" + u.id +
                            "' has a covariate block of the wrong shape");
    }
    int s = 0;
    for (int v : u.y) {
      if (v != 0 && v != 1) {
        throw ValidationError("unit '" + u.id + "' has a non-binary outcome");
      }
      s += v;
    }
    if (s != u.s) {
      throw ValidationError("unit '" + u.id +
                            "' has an inconsistent outcome sum");
    }
  }
  if (effect_index < 0 || effect_index >= p) {
    throw ValidationError("effect index out of range");
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, std::size_t row,
                    const std::string& what) {
  double v{};
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw ValidationError("row " + std::to_string(row) + ": field '" + what +
                          "' is not a number: '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& s, std::size_t row,
                    const std::string& what) {
  long long v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ValidationError("row " + std::to_string(row) + ": field '" + what +
                          "' must be an integer: '" + s + "'");
  }
  return v;
}

}  // namespace

PanelDataset load_panel(const std::string& path, const PanelSchema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");

  std::string header;
  if (!std::getline(in, header)) {
    throw SchemaError("'" + path + "' is empty");
  }
  const std::vector<std::string> cols = split_csv_line(header);
  auto find_col = [&](const std::string& name) {
    const auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) {
      throw SchemaError("missing column '" + name + "' in '" + path + "'");
    }
    return static_cast<int>(it - cols.begin());
  };

  const int id_col = find_col(schema.id_column);
  const int t_col = find_col(schema.period_column);
  const int y_col = find_col(schema.outcome_column);

  std::vector<int> x_cols;
  std::vector<std::string> x_names;
  if (schema.covariate_columns.empty()) {
    for (int j = 0; j < static_cast<int>(cols.size()); ++j) {
      if (j == id_col || j == t_col || j == y_col) continue;
      x_cols.push_back(j);
      x_names.push_back(cols[static_cast<std::size_t>(j)]);
    }
  } else {
    for (const auto& name : schema.covariate_columns) {
      x_cols.push_back(find_col(name));
      x_names.push_back(name);
    }
  }
  if (x_cols.empty()) {
    throw SchemaError("no covariate columns found in '" + path + "'");
  }
  const int p = static_cast<int>(x_cols.size());

  struct Row {
    long long period;
    int y;
    std::vector<double> x;
  };
  // Grouped by id, keeping the order ids first appear in the file.
  std::vector<std::string> id_order;
  std::unordered_map<std::string, std::vector<Row>> by_id;

  std::string line;
  std::size_t row_index = 1;  // header was row 1
  while (std::getline(in, line)) {
    ++row_index;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != cols.size()) {
      throw ValidationError("row " + std::to_string(row_index) +
                            ": expected " + std::to_string(cols.size()) +
                            " fields, found " + std::to_string(fields.size()));
    }
    Row r;
    r.period = parse_int(fields[static_cast<std::size_t>(t_col)], row_index,
                         schema.period_column);
    const double yv = parse_double(fields[static_cast<std::size_t>(y_col)],
                                   row_index, schema.outcome_column);
    if (yv != 0.0 && yv != 1.0) {
      throw ValidationError("row " + std::to_string(row_index) +
                            ": outcome must be 0 or 1, found '" +
                            fields[static_cast<std::size_t>(y_col)] + "'");
    }
    r.y = static_cast<int>(yv);
    r.x.reserve(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
      r.x.push_back(parse_double(
          fields[static_cast<std::size_t>(x_cols[static_cast<std::size_t>(j)])],
          row_index, x_names[static_cast<std::size_t>(j)]));
    }
    const std::string& id = fields[static_cast<std::size_t>(id_col)];
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      id_order.push_back(id);
      it = by_id.emplace(id, std::vector<Row>{}).first;
    }
    for (const Row& prev : it->second) {
      if (prev.period == r.period) {
        throw ValidationError("row " + std::to_string(row_index) +
                              ": duplicate (id, period) = ('" + id + "', " +
                              std::to_string(r.period) + ")");
      }
    }
    it->second.push_back(std::move(r));
  }

  PanelDataset data;
  data.p = p;
  data.covariate_names = x_names;
  data.individuals.reserve(id_order.size());
  for (const auto& id : id_order) {
    auto& rows = by_id[id];
    std::sort(rows.begin(), rows.end(),
              [](const Row& a, const Row& b) { return a.period < b.period; });
    PanelUnit u;
    u.id = id;
    const int Ti = static_cast<int>(rows.size());
    if (Ti < 2) {
      throw ValidationError("unit '" + id + "' has fewer than 2 periods");
    }
    u.y.resize(static_cast<std::size_t>(Ti));
    u.period_labels.resize(static_cast<std::size_t>(Ti));
    u.x.resize(Ti, p);
    for (int t = 0; t < Ti; ++t) {
      u.y[static_cast<std::size_t>(t)] = rows[static_cast<std::size_t>(t)].y;
      u.period_labels[static_cast<std::size_t>(t)] =
          rows[static_cast<std::size_t>(t)].period;
      for (int j = 0; j < p; ++j) {
        u.x(t, j) = rows[static_cast<std::size_t>(t)].x[static_cast<std::size_t>(j)];
      }
      u.s += rows[static_cast<std::size_t>(t)].y;
    }
    if (u.covariates_constant()) ++data.stayer_count;
    data.individuals.push_back(std::move(u));
  }
  data.validate();
  return data;
}

void write_panel(const PanelDataset& data, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw SchemaError("cannot write '" + tmp + "'");
    out << "id,t,y";
    for (int j = 0; j < data.p; ++j) {
      if (j < static_cast<int>(data.covariate_names.size())) {
        out << ',' << data.covariate_names[static_cast<std::size_t>(j)];
      } else {
        out << ",x" << (j + 1);
      }
    }
    out << '\n';
    char buf[64];
    for (const auto& u : data.individuals) {
      for (int t = 0; t < u.periods(); ++t) {
        out << u.id << ',' << u.period_labels[static_cast<std::size_t>(t)]
            << ',' << u.y[static_cast<std::size_t>(t)];
        for (int j = 0; j < data.p; ++j) {
          std::snprintf(buf, sizeof(buf), "%.17g", u.x(t, j));
          out << ',' << buf;
        }
        out << '\n';
      }
    }
  }
  std::filesystem::rename(tmp, path);
}

RankCondition check_rank_condition(const PanelDataset& data,
                                   double relative_tol) {
  if (data.individuals.empty()) {
    throw ValidationError("check_rank_condition: empty dataset");
  }
  const int p = data.p;
  RankCondition out;
  out.matrix = Eigen::MatrixXd::Zero(p, p);
  for (const auto& u : data.individuals) {
    for (int t = 0; t < u.periods(); ++t) {
      for (int tp = 0; tp < u.periods(); ++tp) {
        const Eigen::VectorXd d = (u.x.row(t) - u.x.row(tp)).transpose();
        out.matrix.noalias() += d * d.transpose();
      }
    }
  }
  out.matrix /= static_cast<double>(data.individuals.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.matrix);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  out.max_eigenvalue = es.eigenvalues().maxCoeff();
  out.nonsingular =
      out.min_eigenvalue > relative_tol * std::max(out.max_eigenvalue, 0.0) &&
      out.max_eigenvalue > 0.0;
  return out;
}

}  // namespace felogit
