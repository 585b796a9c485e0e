#include "medbal/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace medbal {

namespace {

using Row = std::vector<std::string>;

// RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF line endings.
std::vector<Row> parse_csv_text(const std::string& text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    i = 3;
  }
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_row();
    } else if (c == '\n') {
      end_row();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw DataError("csv: unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == ".";
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

double sample_sd(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

Eigen::Index Dataset::treated_count() const {
  return static_cast<Eigen::Index>((d.array() > 0.5).count());
}

void Dataset::validate() const {
  const auto rows = n();
  if (rows == 0) throw DataError("dataset is empty");
  if (d.size() != rows || m.rows() != rows || x.rows() != rows) {
    throw DataError("dataset columns have inconsistent lengths");
  }
  if (m.cols() < 1) throw DataError("dataset needs at least one mediator");
  if (static_cast<Eigen::Index>(mediator_names.size()) != m.cols() ||
      static_cast<Eigen::Index>(covariate_names.size()) != x.cols()) {
    throw DataError("column names do not match matrix widths");
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (d[i] != 0.0 && d[i] != 1.0) {
      throw DataError("non-binary treatment at row " + std::to_string(i + 1));
    }
    if (!std::isfinite(y[i])) throw DataError("non-finite outcome at row " + std::to_string(i + 1));
  }
  if (!m.allFinite() || !x.allFinite()) throw DataError("non-finite mediator or covariate value");
  const auto treated = treated_count();
  if (treated == 0) throw DataError("empty treated group");
  if (treated == rows) throw DataError("empty control group");
}

std::optional<Eigen::VectorXd> Dataset::column(const std::string& name) const {
  for (std::size_t j = 0; j < mediator_names.size(); ++j) {
    if (mediator_names[j] == name) return Eigen::VectorXd(m.col(static_cast<Eigen::Index>(j)));
  }
  for (std::size_t j = 0; j < covariate_names.size(); ++j) {
    if (covariate_names[j] == name) return Eigen::VectorXd(x.col(static_cast<Eigen::Index>(j)));
  }
  return std::nullopt;
}

bool Dataset::is_mediator(const std::string& name) const {
  return std::find(mediator_names.begin(), mediator_names.end(), name) != mediator_names.end();
}

Dataset Dataset::with_flipped_treatment() const {
  Dataset out = *this;
  out.d = (1.0 - d.array()).matrix();
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const ColumnRoles& roles) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto rows = parse_csv_text(buffer.str());
  if (rows.empty()) throw DataError(path.string() + ": missing header row");

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < rows[0].size(); ++j) index[trim(rows[0][j])] = j;
  auto locate = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw DataError(path.string() + ": missing column '" + name + "'");
    return it->second;
  };
  if (roles.mediators.empty()) throw DataError("role map needs at least one mediator");

  const std::size_t n = rows.size() - 1;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) {
      throw DataError(path.string() + ": row " + std::to_string(r) + " has " +
                      std::to_string(rows[r].size()) + " fields, header has " +
                      std::to_string(rows[0].size()));
    }
  }

  auto numeric_column = [&](const std::string& name) {
    const auto j = locate(name);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
      const auto cell = trim(rows[r + 1][j]);
      if (is_missing(cell)) {
        throw DataError("missing value in column '" + name + "' at row " + std::to_string(r + 1));
      }
      auto value = parse_double(cell);
      if (!value || !std::isfinite(*value)) {
        throw DataError("non-numeric value '" + cell + "' in column '" + name + "' at row " +
                        std::to_string(r + 1));
      }
      v[static_cast<Eigen::Index>(r)] = *value;
    }
    return v;
  };

  Dataset data;
  data.outcome_name = roles.outcome;
  data.treatment_name = roles.treatment;
  data.mediator_names = roles.mediators;
  data.covariate_names = roles.covariates;
  data.y = numeric_column(roles.outcome);

  // Treatment: numeric {0,1} or a two-level factor with a declared reference level.
  {
    const auto j = locate(roles.treatment);
    std::vector<std::string> cells(n);
    bool all_numeric = true;
    for (std::size_t r = 0; r < n; ++r) {
      cells[r] = trim(rows[r + 1][j]);
      if (is_missing(cells[r])) {
        throw DataError("missing value in column '" + roles.treatment + "' at row " +
                        std::to_string(r + 1));
      }
      if (!parse_double(cells[r])) all_numeric = false;
    }
    data.d.resize(static_cast<Eigen::Index>(n));
    if (all_numeric) {
      for (std::size_t r = 0; r < n; ++r) {
        const double v = *parse_double(cells[r]);
        if (v != 0.0 && v != 1.0) {
          throw DataError("non-binary treatment value '" + cells[r] + "' in column '" +
                          roles.treatment + "' at row " + std::to_string(r + 1));
        }
        data.d[static_cast<Eigen::Index>(r)] = v;
      }
    } else {
      std::set<std::string> levels(cells.begin(), cells.end());
      if (levels.size() != 2) {
        throw DataError("non-binary treatment: column '" + roles.treatment + "' has " +
                        std::to_string(levels.size()) + " levels");
      }
      if (!roles.reference_level || !levels.contains(*roles.reference_level)) {
        throw DataError("two-level treatment '" + roles.treatment +
                        "' needs a declared reference level present in the data");
      }
      for (std::size_t r = 0; r < n; ++r) {
        data.d[static_cast<Eigen::Index>(r)] = cells[r] == *roles.reference_level ? 0.0 : 1.0;
      }
    }
  }

  data.m.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(roles.mediators.size()));
  for (std::size_t k = 0; k < roles.mediators.size(); ++k) {
    data.m.col(static_cast<Eigen::Index>(k)) = numeric_column(roles.mediators[k]);
  }
  data.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(roles.covariates.size()));
  for (std::size_t k = 0; k < roles.covariates.size(); ++k) {
    data.x.col(static_cast<Eigen::Index>(k)) = numeric_column(roles.covariates[k]);
  }
  data.validate();
  return data;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << csv_quote(data.outcome_name) << ',' << csv_quote(data.treatment_name);
  for (const auto& name : data.mediator_names) out << ',' << csv_quote(name);
  for (const auto& name : data.covariate_names) out << ',' << csv_quote(name);
  out << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out << format_double(data.y[i]) << ',' << format_double(data.d[i]);
    for (Eigen::Index k = 0; k < data.m.cols(); ++k) out << ',' << format_double(data.m(i, k));
    for (Eigen::Index k = 0; k < data.x.cols(); ++k) out << ',' << format_double(data.x(i, k));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Terms and bases
// ---------------------------------------------------------------------------

std::string Term::name() const {
  switch (kind) {
    case TermKind::raw:
      return columns.at(0);
    case TermKind::power:
      return columns.at(0) + "^" + std::to_string(power);
    case TermKind::interaction: {
      std::string out;
      for (std::size_t k = 0; k < columns.size(); ++k) {
        if (k) out += '*';
        out += columns[k];
      }
      return out;
    }
    case TermKind::constant:
      return "(const)";
  }
  return {};
}

Term Term::raw(std::string column) { return Term{TermKind::raw, {std::move(column)}, 1}; }

Term Term::pow(std::string column, int k) {
  if (k < 1) throw DataError("power must be >= 1");
  if (k == 1) return raw(std::move(column));
  return Term{TermKind::power, {std::move(column)}, k};
}

Term Term::interaction(std::vector<std::string> columns) {
  if (columns.size() < 2 || columns.size() > 3) {
    throw DataError("interactions take two or three columns");
  }
  return Term{TermKind::interaction, std::move(columns), 1};
}

Term Term::constant() { return Term{TermKind::constant, {}, 0}; }

Term parse_term(const std::string& text) {
  const auto t = trim(text);
  if (t == "1" || t == "(const)") return Term::constant();
  if (t.find('*') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(t);
    std::string part;
    while (std::getline(ss, part, '*')) parts.push_back(trim(part));
    return Term::interaction(parts);
  }
  if (auto caret = t.find('^'); caret != std::string::npos) {
    int k = 0;
    const auto exponent = t.substr(caret + 1);
    auto [ptr, ec] = std::from_chars(exponent.data(), exponent.data() + exponent.size(), k);
    if (ec != std::errc() || ptr != exponent.data() + exponent.size()) {
      throw DataError("bad power term '" + t + "'");
    }
    return Term::pow(trim(t.substr(0, caret)), k);
  }
  if (t.empty()) throw DataError("empty term");
  return Term::raw(t);
}

BasisSpec BasisSpec::linear(const std::vector<std::string>& columns, bool include_constant) {
  BasisSpec spec;
  for (const auto& c : columns) spec.terms.push_back(Term::raw(c));
  spec.include_constant = include_constant;
  return spec;
}

std::optional<Eigen::Index> DesignMatrix::constant_column() const {
  for (std::size_t j = 0; j < column_names.size(); ++j) {
    if (column_names[j] == "(const)") return static_cast<Eigen::Index>(j);
  }
  return std::nullopt;
}

Eigen::Index DesignMatrix::non_constant_cols() const {
  return cols() - (constant_column() ? 1 : 0);
}

namespace {

DesignMatrix build_basis_impl(const Dataset& data, const BasisSpec& spec, BasisScope scope,
                              const std::map<std::string, ColumnTransform>* frozen) {
  std::vector<Term> terms = spec.terms;
  // Validation: duplicate-free, constant at most once and last.
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (terms[k].kind == TermKind::constant && k + 1 != terms.size()) {
      throw DataError("constant term must be the last basis column");
    }
    for (std::size_t l = 0; l < k; ++l) {
      if (terms[l].name() == terms[k].name()) {
        throw DataError("duplicate basis term '" + terms[k].name() + "'");
      }
    }
  }
  const bool has_constant = !terms.empty() && terms.back().kind == TermKind::constant;
  if (spec.include_constant && !has_constant) terms.push_back(Term::constant());
  if (!spec.include_constant && has_constant) terms.pop_back();

  DesignMatrix out;
  out.source_spec = spec;

  // Resolve and (optionally) standardize the raw columns referenced by terms.
  std::map<std::string, Eigen::VectorXd> raw;
  for (const auto& term : terms) {
    for (const auto& col : term.columns) {
      if (raw.contains(col)) continue;
      if (scope == BasisScope::covariates && data.is_mediator(col)) {
        throw DataError("term '" + term.name() + "' uses mediator '" + col +
                        "' in a covariates-only basis");
      }
      auto v = data.column(col);
      if (!v) throw DataError("unknown column '" + col + "' in basis term '" + term.name() + "'");
      if (spec.standardize) {
        ColumnTransform tr;
        if (frozen) {
          auto it = frozen->find(col);
          if (it == frozen->end()) throw DataError("no frozen transform for column '" + col + "'");
          tr = it->second;
        } else {
          tr.center = v->mean();
          tr.scale = sample_sd(*v);
          if (!(tr.scale > 0.0)) {
            throw DataError("column '" + col + "' has zero variance and cannot be standardized");
          }
        }
        *v = ((v->array() - tr.center) / tr.scale).matrix();
        out.transforms[col] = tr;
      }
      raw.emplace(col, std::move(*v));
    }
  }

  const Eigen::Index n = data.n();
  out.values.resize(n, static_cast<Eigen::Index>(terms.size()));
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto& term = terms[k];
    auto col = out.values.col(static_cast<Eigen::Index>(k));
    switch (term.kind) {
      case TermKind::raw:
        col = raw.at(term.columns[0]);
        break;
      case TermKind::power:
        col = raw.at(term.columns[0]).array().pow(term.power).matrix();
        break;
      case TermKind::interaction:
        col.setOnes();
        for (const auto& c : term.columns) col.array() *= raw.at(c).array();
        break;
      case TermKind::constant:
        col.setOnes();
        break;
    }
    out.column_names.push_back(term.name());
  }
  if (!out.values.allFinite()) throw DataError("basis evaluation produced non-finite entries");
  return out;
}

}  // namespace

DesignMatrix build_basis(const Dataset& data, const BasisSpec& spec, BasisScope scope) {
  return build_basis_impl(data, spec, scope, nullptr);
}

DesignMatrix build_basis(const Dataset& data, const BasisSpec& spec, BasisScope scope,
                         const std::map<std::string, ColumnTransform>& frozen) {
  return build_basis_impl(data, spec, scope, &frozen);
}

BasisSpec polynomial_basis(const Dataset& data, const std::vector<std::string>& columns,
                           int degree, int interaction_order, bool include_constant) {
  BasisSpec spec;
  spec.include_constant = include_constant;
  std::vector<bool> dummy(columns.size());
  for (std::size_t k = 0; k < columns.size(); ++k) {
    auto v = data.column(columns[k]);
    if (!v) throw DataError("unknown column '" + columns[k] + "'");
    std::set<double> distinct(v->data(), v->data() + v->size());
    dummy[k] = distinct.size() <= 2;
    spec.terms.push_back(Term::raw(columns[k]));
  }
  for (int p = 2; p <= degree; ++p) {
    for (std::size_t k = 0; k < columns.size(); ++k) {
      if (!dummy[k]) spec.terms.push_back(Term::pow(columns[k], p));
    }
  }
  const std::size_t c = columns.size();
  if (interaction_order >= 2) {
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t b = a + 1; b < c; ++b)
        spec.terms.push_back(Term::interaction({columns[a], columns[b]}));
  }
  if (interaction_order >= 3) {
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t b = a + 1; b < c; ++b)
        for (std::size_t e = b + 1; e < c; ++e)
          spec.terms.push_back(Term::interaction({columns[a], columns[b], columns[e]}));
  }
  return spec;
}

}  // namespace medbal
