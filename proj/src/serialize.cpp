#include "weightsmith/serialize.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace weightsmith {

using json = nlohmann::json;

namespace {

[[noreturn]] void schema_fail(const std::string& msg) { throw Error(ErrorKind::SchemaError, msg); }

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) schema_fail(std::string("missing field '") + key + "'");
  return j.at(key);
}

Eigen::Index get_index(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_integer()) schema_fail(std::string("field '") + key + "' is not an integer");
  return v.get<Eigen::Index>();
}

double get_double(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) schema_fail(std::string("field '") + key + "' is not a number string");
  return parse_double(v.get<std::string>());
}

json enc_matrix(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(format_double(m(r, c)));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix dec_matrix(const json& j) {
  const Eigen::Index rows = get_index(j, "rows"), cols = get_index(j, "cols");
  const json& data = field(j, "data");
  if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols)
    schema_fail("matrix data does not match its shape");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!data[k].is_string()) schema_fail("matrix entry is not a number string");
      m(r, c) = parse_double(data[k++].get<std::string>());
    }
  return m;
}

json enc_vectors(const std::vector<Vector>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back(enc_matrix(v));
  return a;
}

std::vector<Vector> dec_vectors(const json& j) {
  if (!j.is_array()) schema_fail("expected an array of vectors");
  std::vector<Vector> out;
  for (const auto& e : j) {
    const Matrix m = dec_matrix(e);
    if (m.cols() != 1) schema_fail("expected a column vector");
    out.push_back(m);
  }
  return out;
}

json enc_block(const FunctionBlock& b) {
  json layers = json::array();
  for (const auto& l : b.layers) {
    json heads = json::array();
    for (const auto& h : l.heads) heads.push_back({{"w_k", enc_matrix(h.w_k)}, {"w_q", enc_matrix(h.w_q)}, {"w_v", enc_matrix(h.w_v)}});
    layers.push_back({{"lambda", format_double(l.lambda)},
                      {"heads", heads},
                      {"w1", enc_matrix(l.w1)},
                      {"b1", enc_matrix(l.b1)},
                      {"w2", enc_matrix(l.w2)},
                      {"b2", enc_matrix(l.b2)}});
  }
  std::string cells;
  for (Eigen::Index r = 0; r < b.mask.cells.rows(); ++r)
    for (Eigen::Index c = 0; c < b.mask.cells.cols(); ++c) cells += b.mask.cells(r, c) ? '1' : '0';
  return {{"name", b.name},
          {"layout", {{"rows", b.layout.rows}, {"cols", b.layout.cols}, {"max_cols", b.layout.max_cols}}},
          {"mask", {{"rows", b.mask.cells.rows()}, {"cols", b.mask.cells.cols()}, {"cells", cells}}},
          {"budget", format_double(b.budget)},
          {"layers", layers}};
}

FunctionBlock dec_block(const json& j) {
  FunctionBlock b;
  const json& name = field(j, "name");
  if (!name.is_string()) schema_fail("block name is not a string");
  b.name = name.get<std::string>();
  const json& lay = field(j, "layout");
  b.layout = {get_index(lay, "rows"), get_index(lay, "cols"), get_index(lay, "max_cols")};
  const json& mask = field(j, "mask");
  const Eigen::Index mr = get_index(mask, "rows"), mc = get_index(mask, "cols");
  const json& cells = field(mask, "cells");
  if (mr < 0 || mc < 0 || !cells.is_string() || static_cast<Eigen::Index>(cells.get<std::string>().size()) != mr * mc)
    schema_fail("mask cells do not match the mask shape");
  const std::string cs = cells.get<std::string>();
  b.mask.cells.resize(mr, mc);
  for (Eigen::Index r = 0; r < mr; ++r)
    for (Eigen::Index c = 0; c < mc; ++c) {
      const char ch = cs[static_cast<std::size_t>(r * mc + c)];
      if (ch != '0' && ch != '1') schema_fail("mask cells must be 0 or 1");
      b.mask.cells(r, c) = ch == '1';
    }
  b.budget = get_double(j, "budget");
  const json& layers = field(j, "layers");
  if (!layers.is_array()) schema_fail("layers is not an array");
  for (const auto& lj : layers) {
    TransformerLayer l;
    l.lambda = get_double(lj, "lambda");
    const json& heads = field(lj, "heads");
    if (!heads.is_array()) schema_fail("heads is not an array");
    for (const auto& hj : heads)
      l.heads.push_back({dec_matrix(field(hj, "w_k")), dec_matrix(field(hj, "w_q")), dec_matrix(field(hj, "w_v"))});
    l.w1 = dec_matrix(field(lj, "w1"));
    l.b1 = dec_matrix(field(lj, "b1"));
    l.w2 = dec_matrix(field(lj, "w2"));
    l.b2 = dec_matrix(field(lj, "b2"));
    b.layers.push_back(std::move(l));
  }
  try {
    validate_block(b);
  } catch (const Error& e) {
    schema_fail(std::string("block does not validate: ") + e.what());
  }
  return b;
}

json enc_table(const FunctionTable& t) {
  json rows = json::array();
  for (const auto& row : t.atoms) {
    json r = json::array();
    for (const auto& a : row)
      r.push_back({{"gamma", format_double(a.gamma)}, {"a", enc_matrix(a.a)}, {"b", format_double(a.b)}, {"tau", format_double(a.tau)}});
    rows.push_back(r);
  }
  return {{"dim", t.dim}, {"box", format_double(t.box)}, {"barron_C", format_double(t.barron_C)}, {"atoms", rows}};
}

FunctionTable dec_table(const json& j) {
  FunctionTable t;
  t.dim = get_index(j, "dim");
  t.box = get_double(j, "box");
  t.barron_C = get_double(j, "barron_C");
  const json& rows = field(j, "atoms");
  if (!rows.is_array()) schema_fail("atoms is not an array");
  for (const auto& rj : rows) {
    if (!rj.is_array()) schema_fail("atom row is not an array");
    std::vector<SigmoidAtom> row;
    for (const auto& aj : rj) {
      const Matrix a = dec_matrix(field(aj, "a"));
      if (a.cols() != 1) schema_fail("atom direction must be a column");
      row.push_back({get_double(aj, "gamma"), a, get_double(aj, "b"), get_double(aj, "tau")});
    }
    t.atoms.push_back(std::move(row));
  }
  try {
    validate_table(t);
  } catch (const Error& e) {
    schema_fail(std::string("table does not validate: ") + e.what());
  }
  return t;
}

std::string wrap(const char* kind, json value) {
  json doc = {{"schema", kSchema}, {"kind", kind}, {"value", std::move(value)}};
  return doc.dump(1) + "\n";
}

json unwrap(const std::string& text, const char* kind) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    schema_fail(std::string("not valid JSON: ") + e.what());
  }
  const json& schema = field(doc, "schema");
  const std::string found = schema.is_string() ? schema.get<std::string>() : schema.dump();
  if (found != kSchema) schema_fail(std::string("expected schema ") + kSchema + ", found " + found);
  const json& k = field(doc, "kind");
  if (kind && (!k.is_string() || k.get<std::string>() != kind))
    schema_fail(std::string("expected a ") + kind + " document, found " + k.dump());
  return field(doc, "value");
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& s) {
  if (s.empty()) schema_fail("empty number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) schema_fail("bad number '" + s + "'");
  return v;
}

std::string to_json(const Matrix& m) { return wrap("matrix", enc_matrix(m)); }
std::string to_json(const FunctionBlock& block) { return wrap("block", enc_block(block)); }
std::string to_json(const CotPrompt& p) {
  json chains = json::array();
  for (const auto& c : p.chains) chains.push_back(enc_vectors(c));
  return wrap("prompt", {{"chains", chains}, {"test", enc_vectors(p.test)}});
}
std::string to_json(const FunctionTable& t) { return wrap("table", enc_table(t)); }
std::string to_json(const VerificationReport& r) {
  return wrap("report", {{"block", r.block},
                         {"cases", r.cases},
                         {"max_error", format_double(r.max_error)},
                         {"budget", format_double(r.budget)},
                         {"pass", r.pass},
                         {"worst_row", r.worst_row},
                         {"worst_col", r.worst_col},
                         {"wall_time_s", format_double(r.wall_time_s)}});
}

Matrix matrix_from_json(const std::string& text) { return dec_matrix(unwrap(text, "matrix")); }
FunctionBlock block_from_json(const std::string& text) { return dec_block(unwrap(text, "block")); }
CotPrompt prompt_from_json(const std::string& text) {
  const json v = unwrap(text, "prompt");
  CotPrompt p;
  const json& chains = field(v, "chains");
  if (!chains.is_array()) schema_fail("chains is not an array");
  for (const auto& c : chains) p.chains.push_back(dec_vectors(c));
  p.test = dec_vectors(field(v, "test"));
  return p;
}
FunctionTable table_from_json(const std::string& text) { return dec_table(unwrap(text, "table")); }

std::string document_kind(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    schema_fail(std::string("not valid JSON: ") + e.what());
  }
  unwrap(text, nullptr);
  const json& k = field(doc, "kind");
  if (!k.is_string()) schema_fail("kind is not a string");
  return k.get<std::string>();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::InvalidInput, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::InvalidInput, "cannot write " + path);
  out << text;
  require(static_cast<bool>(out), ErrorKind::InvalidInput, "write to " + path + " failed");
}

}  // namespace weightsmith
