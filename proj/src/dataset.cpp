#include "clreg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "clreg/error.hpp"

namespace clreg {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Splits one logical record; quoted fields may span lines.
bool read_record(std::istream& in, std::vector<std::string>& fields, long& line_no) {
  fields.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0;; ++i) {
    if (i == line.size()) {
      if (!quoted) break;
      std::string more;
      if (!std::getline(in, more)) throw DataError("unterminated quoted field at line " + std::to_string(line_no));
      ++line_no;
      field += '\n';
      line = more;
      i = static_cast<std::size_t>(-1);
      continue;
    }
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && trim(field).empty()) {
      field.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else {
      field += c;
    }
  }
  fields.push_back(was_quoted ? field : trim(field));
  return true;
}

bool blank(const std::vector<std::string>& fields) {
  return std::all_of(fields.begin(), fields.end(), [](const std::string& f) { return f.empty(); });
}

std::string where(const CsvTable& t, std::size_t row, const std::string& col) {
  return t.source + ": row " + std::to_string(row + 1) + ", column '" + col + "'";
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError(source + ": missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  t.source = source;
  std::vector<std::string> fields;
  long line_no = 0;
  while (read_record(in, fields, line_no)) {
    if (blank(fields)) continue;
    if (t.header.empty()) {
      if (!fields.empty() && fields[0].size() >= 3 && fields[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
        fields[0] = fields[0].substr(3);
      t.header = fields;
      std::set<std::string> seen;
      for (const auto& h : t.header) {
        if (h.empty()) throw DataError(source + ": empty column name in header");
        if (!seen.insert(h).second) throw DataError(source + ": duplicate column '" + h + "'");
      }
      continue;
    }
    if (fields.size() != t.header.size())
      throw DataError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(t.header.size()));
    t.rows.push_back(fields);
  }
  if (t.header.empty()) throw DataError(source + ": empty file");
  if (t.rows.empty()) throw DataError(source + ": no data rows");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  return parse_csv(in, path);
}

std::optional<double> parse_number(const std::string& cell) {
  const std::string s = trim(cell);
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_exact(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void ModelConfig::validate() const {
  const int m = component_count(h);
  if (static_cast<int>(components.size()) != m)
    throw ConfigError("model: " + to_string(h) + " needs " + std::to_string(m) + " component lists, got " +
                      std::to_string(components.size()));
  for (const auto& comp : components) {
    std::set<std::string> seen;
    for (const auto& c : comp)
      if (!seen.insert(c).second) throw ConfigError("model: column '" + c + "' repeated within a component");
    if (comp.empty() && !intercept) throw ConfigError("model: a component has no terms");
  }
  if (biomarker) {
    int count = 0;
    for (const auto& comp : components) count += static_cast<int>(std::count(comp.begin(), comp.end(), *biomarker));
    if (count != 1)
      throw ConfigError("model: biomarker '" + *biomarker + "' must appear in exactly one component");
    const auto& first = components.front();
    if (std::find(first.begin(), first.end(), *biomarker) == first.end())
      throw ConfigError("model: the biomarker must enter the first component");
  }
}

std::vector<std::string> parameter_names(const ModelConfig& model, bool reparametrize) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < model.components.size(); ++k) {
    const std::string idx = std::to_string(k + 1);
    const bool starred = reparametrize && k == 0 && model.biomarker;
    const std::string b = starred ? "b*[" : "b[";
    if (model.intercept) names.push_back(b + "0," + idx + "]");
    for (const auto& c : model.components[k]) {
      if (starred && c == *model.biomarker)
        names.push_back("xi[" + idx + "]");
      else
        names.push_back(b + c + "," + idx + "]");
    }
  }
  return names;
}

ModelSpec build_spec(const ModelConfig& model, const std::map<std::string, VectorXd>& columns, Index n,
                     bool reparametrize) {
  model.validate();
  Index p = 0;
  for (const auto& comp : model.components) p += static_cast<Index>(comp.size()) + (model.intercept ? 1 : 0);

  ModelSpec spec;
  spec.h = model.h;
  spec.designs.assign(model.components.size(), MatrixXd::Zero(n, p));
  Index j = 0;
  for (std::size_t k = 0; k < model.components.size(); ++k) {
    MatrixXd& x = spec.designs[k];
    if (model.intercept) x.col(j++).setOnes();
    for (const auto& c : model.components[k]) {
      const auto it = columns.find(c);
      if (it == columns.end()) throw DataError("missing covariate column '" + c + "'");
      if (it->second.size() != n) throw DimensionError("covariate column '" + c + "' has the wrong length");
      if (model.biomarker && c == *model.biomarker) spec.biomarker = Biomarker{static_cast<int>(k), j, reparametrize, 1.0};
      x.col(j++) = it->second;
    }
  }
  spec.param_names = parameter_names(model, reparametrize);
  spec.validate();
  return spec;
}

Dataset make_dataset(const CsvTable& table, const ModelConfig& model, const DataConfig& data,
                     const FitOptions& options) {
  model.validate();
  if (options.cop_flag && !model.biomarker) throw ConfigError("cop_flag requires a biomarker column");
  if (options.exchangeable && !data.group) throw ConfigError("exchangeable requires a group column");

  std::vector<std::string> referenced{data.response};
  if (data.group) referenced.push_back(*data.group);
  for (const auto& comp : model.components) referenced.insert(referenced.end(), comp.begin(), comp.end());
  for (const auto& name : referenced)
    if (!table.has_column(name)) throw ConfigError(table.source + ": the configuration references missing column '" + name + "'");

  const std::size_t n = table.rows.size();
  Dataset ds;
  ds.data.y.resize(static_cast<Index>(n));
  const std::size_t ycol = table.column(data.response);
  for (std::size_t r = 0; r < n; ++r) {
    const auto v = parse_number(table.rows[r][ycol]);
    if (!v || (*v != 0.0 && *v != 1.0))
      throw DataError(where(table, r, data.response) + ": response must be 0 or 1, got '" + table.rows[r][ycol] + "'");
    ds.data.y(static_cast<Index>(r)) = *v;
  }

  std::set<std::string> needed;
  for (const auto& comp : model.components) needed.insert(comp.begin(), comp.end());
  for (const auto& name : needed) {
    if (name == data.response) throw ConfigError("model: response column '" + name + "' used as a covariate");
    const std::size_t c = table.column(name);
    VectorXd col(static_cast<Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
      const auto v = parse_number(table.rows[r][c]);
      if (!v) throw DataError(where(table, r, name) + ": non-numeric value '" + table.rows[r][c] + "'");
      col(static_cast<Index>(r)) = *v;
    }
    ds.summaries.push_back({name, col.minCoeff(), col.maxCoeff(), col.mean()});
    ds.columns.emplace(name, std::move(col));
  }

  if (data.group) {
    const std::size_t g = table.column(*data.group);
    std::map<std::string, long> ids;
    std::vector<long> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::string& key = table.rows[r][g];
      if (key.empty()) throw DataError(where(table, r, *data.group) + ": empty group label");
      labels[r] = ids.emplace(key, static_cast<long>(ids.size())).first->second;
    }
    ds.data.groups = make_groups(labels);
    if (options.exchangeable && largest_group(ds.data.groups) < 2)
      ds.warnings.push_back("every group is a singleton: no estimable pairs for the exchangeable correlation");
  }

  ds.spec = build_spec(model, ds.columns, static_cast<Index>(n), options.cop_flag);
  const double ones = ds.data.y.sum();
  if (ones == 0.0 || ones == static_cast<double>(n)) ds.warnings.push_back("the response has a single class");
  return ds;
}

Dataset ingest(const std::string& path, const ModelConfig& model, const DataConfig& data,
               const FitOptions& options) {
  return make_dataset(read_csv(path), model, data, options);
}

}  // namespace clreg
