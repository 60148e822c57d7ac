// Product complexes and tensor-product element systems.
//
// Each product of simplices is carried by its staircase triangulation;
// product cells are agglomerations oriented by the product orientation, so
// incidence numbers follow the graded Leibniz convention.

#ifndef FES_TENSOR_HPP
#define FES_TENSOR_HPP

#include "fes/mirror.hpp"
#include "fes/system.hpp"

namespace fes {

struct NotFaithfulInputs : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProductComplex {
  Complex complex;
  /// Product cell index by (U-cell, V-cell) indices, and back.
  std::map<std::pair<int, int>, int> cell_of;
  std::map<int, std::pair<int, int>> factors_of;
  int u_ambient = 0;  // coordinate split point
};

ProductComplex product_complex(const Complex& u, const Complex& v);

/// Tensor system C^k(U x V) = sum_l A^l(U) tensor B^{k-l}(V), with bases
/// given by wedge products of projection pullbacks.
ElementSystem tensor_system(const ProductComplex& pc, const Complex& u,
                            const Complex& v, const ElementSystem& a,
                            const ElementSystem& b);

struct TensorCheckReport {
  bool kernel_identity = false;   // kernel product identity
  bool global_dims = false;       // global dimension product
  bool extensions = false;        // tensor extensions (with the inclusion-exclusion count)
  bool mayer_vietoris = false;    // exactness of the Mayer-Vietoris sequence by rank
  bool local_exactness = false;   // tensor local exactness
  std::string detail;
  bool all() const
  {
    return kernel_identity && global_dims && extensions && mayer_vietoris &&
           local_exactness;
  }
};

TensorCheckReport tensor_dimension_checks(const ProductComplex& pc,
                                          const Complex& u, const Complex& v,
                                          const ElementSystem& a,
                                          const ElementSystem& b,
                                          const ElementSystem& c);

/// Tensor mirrors from wedge-kind factor mirrors.  Requires both
/// factor systems to admit extensions and both mirror systems to be
/// faithful (NotFaithfulInputs otherwise).
MirrorSystem tensor_mirrors(const ProductComplex& pc, const Complex& u,
                            const Complex& v, const ElementSystem& a,
                            const ElementSystem& b, const MirrorSystem& z,
                            const MirrorSystem& y);

}  // namespace fes

#endif
