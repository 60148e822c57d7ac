// Mesh file ingestion and export.
//
// Format (JSON):
//   {
//     "dimension": d,
//     "vertices":  [[rat, ...], ...],          rationals as "p/q" or ints
//     "simplices": [[vid, ...], ...],          top-dimensional only
//     "cells":     [{"id": str, "simplices": [sid, ...]}, ...]   (optional)
//     "orders":    {"default": int, "per_cell": {id: int}}       (optional)
//   }
// Unknown keys are rejected.

#ifndef FES_MESHIO_HPP
#define FES_MESHIO_HPP

#include <optional>
#include <string>

#include "fes/complex.hpp"

namespace fes {

struct MeshParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MeshOrders {
  int default_order = 1;
  std::map<std::string, int> per_cell;
  /// "trimmed" (default) or "polynomial": the latter selects the full
  /// polynomial system with degree order(T) - k, which can genuinely fail
  /// the compatibility checks.
  std::string system = "trimmed";

  int order_of(const std::string& cell_id) const
  {
    auto it = per_cell.find(cell_id);
    return it == per_cell.end() ? default_order : it->second;
  }
};

struct MeshFile {
  Complex complex;
  std::optional<MeshOrders> orders;
};

MeshFile parse_mesh(const std::string& json_text);
MeshFile read_mesh(const std::string& path);

MeshOrders parse_orders(const std::string& json_text);
MeshOrders read_orders(const std::string& path);

/// Serialized mesh; agglomerated cells are emitted under "cells".
std::string mesh_to_json(const Complex& cx);
void write_mesh(const Complex& cx, const std::string& path);

}  // namespace fes

#endif
