#include "fes/exact_linalg.hpp"

// Template instantiations used across the library.
namespace fes {

template MatQ rref<MatQ>(MatQ, std::vector<Eigen::Index>*);
template Eigen::Index rank<MatQ>(const MatQ&);
template MatQ nullspace<MatQ>(const MatQ&);
template MatD rref<MatD>(MatD, std::vector<Eigen::Index>*);
template Eigen::Index rank<MatD>(const MatD&);
template MatD nullspace<MatD>(const MatD&);

}  // namespace fes
