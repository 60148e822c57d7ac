#include "fes/meshio.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace fes {

using nlohmann::ordered_json;

namespace {

Rational json_rational(const ordered_json& v)
{
  if (v.is_number_integer()) return Rational(v.get<long>());
  if (v.is_string()) return parse_rational(v.get<std::string>());
  throw MeshParseError("rational must be an integer or a \"p/q\" string");
}

void reject_unknown(const ordered_json& j,
                    const std::vector<std::string>& allowed, const char* where)
{
  for (const auto& [key, val] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw MeshParseError(std::string("unknown key \"") + key + "\" in " +
                           where);
  }
}

MeshOrders orders_from_json(const ordered_json& j)
{
  reject_unknown(j, {"default", "per_cell", "system"}, "orders");
  MeshOrders orders;
  if (j.contains("default")) orders.default_order = j.at("default").get<int>();
  if (j.contains("per_cell"))
    for (const auto& [key, val] : j.at("per_cell").items())
      orders.per_cell[key] = val.get<int>();
  if (j.contains("system")) {
    orders.system = j.at("system").get<std::string>();
    if (orders.system != "trimmed" && orders.system != "polynomial")
      throw MeshParseError("orders.system must be trimmed or polynomial");
  }
  return orders;
}

ordered_json rational_to_json(const Rational& r)
{
  if (r.get_den() == 1 && r.get_num().fits_slong_p())
    return ordered_json(r.get_num().get_si());
  return ordered_json(r.get_str());
}

}  // namespace

MeshFile parse_mesh(const std::string& json_text)
{
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw MeshParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw MeshParseError("mesh file must be a JSON object");
  reject_unknown(j, {"dimension", "vertices", "simplices", "cells", "orders"},
                 "mesh");
  if (!j.contains("dimension") || !j.contains("vertices") ||
      !j.contains("simplices"))
    throw MeshParseError("mesh needs dimension, vertices and simplices");

  const int d = j.at("dimension").get<int>();
  if (d < 1 || d > 8) throw MeshParseError("unsupported ambient dimension");

  std::vector<VecQ> vertices;
  for (const auto& row : j.at("vertices")) {
    if (!row.is_array() || static_cast<int>(row.size()) != d)
      throw MeshParseError("vertex row of wrong length");
    VecQ v(d);
    for (int i = 0; i < d; ++i) v(i) = json_rational(row[static_cast<size_t>(i)]);
    vertices.push_back(std::move(v));
  }

  std::vector<std::vector<int>> tops;
  for (const auto& row : j.at("simplices")) {
    if (!row.is_array() || row.empty())
      throw MeshParseError("simplex row must be a nonempty array");
    tops.push_back(row.get<std::vector<int>>());
  }

  std::vector<AgglomerationSpec> cells;
  if (j.contains("cells")) {
    for (const auto& c : j.at("cells")) {
      reject_unknown(c, {"id", "simplices"}, "cells");
      AgglomerationSpec spec;
      spec.id = c.at("id").get<std::string>();
      spec.simplices = c.at("simplices").get<std::vector<int>>();
      cells.push_back(std::move(spec));
    }
  }

  MeshFile out{Complex::with_cells(d, std::move(vertices), tops, cells), {}};
  if (j.contains("orders")) out.orders = orders_from_json(j.at("orders"));
  return out;
}

MeshFile read_mesh(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw MeshParseError("cannot open mesh file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_mesh(ss.str());
}

MeshOrders parse_orders(const std::string& json_text)
{
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw MeshParseError(std::string("invalid JSON: ") + e.what());
  }
  return orders_from_json(j);
}

MeshOrders read_orders(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw MeshParseError("cannot open orders file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_orders(ss.str());
}

std::string mesh_to_json(const Complex& cx)
{
  ordered_json j;
  j["dimension"] = cx.ambient_dim();
  ordered_json verts = ordered_json::array();
  for (int v = 0; v < cx.num_vertices(); ++v) {
    ordered_json row = ordered_json::array();
    for (int i = 0; i < cx.ambient_dim(); ++i)
      row.push_back(rational_to_json(cx.vertex(v)(i)));
    verts.push_back(std::move(row));
  }
  j["vertices"] = std::move(verts);

  // Top simplices: those without cofaces.
  ordered_json tops = ordered_json::array();
  std::vector<char> has_coface(static_cast<size_t>(cx.num_simplices()), 0);
  for (int s = 0; s < cx.num_simplices(); ++s)
    for (const auto& [f, c] : cx.simplex_facets(s))
      has_coface[static_cast<size_t>(f)] = 1;
  for (int s = 0; s < cx.num_simplices(); ++s)
    if (!has_coface[static_cast<size_t>(s)]) tops.push_back(cx.simplex(s).verts);
  j["simplices"] = std::move(tops);

  // Cell supports use internal simplex ids.  Re-ingestion regenerates the
  // face closure deterministically (sorted by dimension then vertex
  // tuple), so the ids are stable across a round trip.
  if (!cx.is_pure_simplicial()) {
    ordered_json cells = ordered_json::array();
    for (int ci = 0; ci < cx.num_cells(); ++ci) {
      const Cell& c = cx.cell(ci);
      ordered_json jc;
      jc["id"] = c.id;
      ordered_json supp = ordered_json::array();
      for (const auto& [s, sgn] : c.support) supp.push_back(s);
      jc["simplices"] = std::move(supp);
      cells.push_back(std::move(jc));
    }
    j["cells"] = std::move(cells);
  }
  return j.dump(2) + "\n";
}

void write_mesh(const Complex& cx, const std::string& path)
{
  std::ofstream out(path);
  if (!out) throw MeshParseError("cannot open output file: " + path);
  out << mesh_to_json(cx);
}

}  // namespace fes
