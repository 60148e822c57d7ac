// Regenerates the bundled fixture meshes under fixtures/.

#include <iostream>

#include "fes/meshio.hpp"
#include "fes/tensor.hpp"
#include "../tests/fixtures.hpp"

using namespace fes;

int main(int argc, char** argv)
{
  std::string dir = argc > 1 ? argv[1] : "fixtures";
  auto emit = [&](const Complex& cx, const std::string& name) {
    write_mesh(cx, dir + "/" + name + ".json");
    std::cout << name << ": " << cx.num_cells() << " cells\n";
  };
  emit(fixtures::triangle(), "triangle");
  emit(fixtures::two_triangles(), "two_triangles");
  emit(fixtures::square_cell(), "square_cell");
  emit(fixtures::tetrahedron(), "tetrahedron");
  emit(fixtures::tetra_boundary(), "tetra_boundary");
  emit(fixtures::annulus(), "annulus");
  emit(fixtures::square_grid(2), "square8");
  emit(fixtures::square_grid(4), "square_h4");
  emit(fixtures::square_grid(8), "square_h8");
  emit(fixtures::square_grid(16), "square_h16");
  emit(fixtures::interval(), "interval");
  emit(fixtures::interval2(), "interval2");
  emit(fixtures::square_boundary(), "square_boundary");
  // cylinder surface: interval x square boundary, exported as the product
  auto pc = product_complex(fixtures::interval(), fixtures::square_boundary());
  emit(pc.complex, "cylinder_product");
  return 0;
}
