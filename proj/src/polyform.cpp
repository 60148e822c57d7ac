#include "fes/polyform.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace fes {

std::vector<int> mask_indices(AltMask m)
{
  std::vector<int> idx;
  for (int i = 0; m != 0; ++i, m >>= 1)
    if (m & 1u) idx.push_back(i);
  return idx;
}

AltMask mask_from_indices(const std::vector<int>& idx)
{
  AltMask m = 0;
  for (int i : idx) {
    AltMask bit = AltMask(1) << i;
    if (m & bit) throw std::invalid_argument("repeated alternating index");
    m |= bit;
  }
  return m;
}

int PolyForm::poly_degree() const
{
  int deg = -1;
  for (const auto& [key, c] : terms_) {
    int t = 0;
    for (int e : key.mono) t += e;
    deg = std::max(deg, t);
  }
  return deg;
}

void PolyForm::add_term(AltMask mask, Monomial mono, const Rational& c)
{
  if (c == 0) return;
  if (mask_size(mask) != degree_)
    throw DegreeMismatch("alternating index size != form degree");
  if (static_cast<int>(mono.size()) != dim_)
    throw DimensionMismatch("monomial length != ambient dimension");
  TermKey key{mask, std::move(mono)};
  auto it = terms_.find(key);
  if (it == terms_.end()) {
    terms_.emplace(std::move(key), c);
  } else {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

Rational PolyForm::coeff(AltMask mask, const Monomial& mono) const
{
  auto it = terms_.find(TermKey{mask, mono});
  return it == terms_.end() ? Rational(0) : it->second;
}

PolyForm& PolyForm::operator+=(const PolyForm& o)
{
  if (is_zero() && terms_.empty() && dim_ == 0) {
    *this = o;
    return *this;
  }
  if (o.is_zero()) return *this;
  if (dim_ != o.dim_ || degree_ != o.degree_)
    throw DimensionMismatch("form sum: shape mismatch");
  for (const auto& [key, c] : o.terms_) add_term(key.mask, key.mono, c);
  return *this;
}

PolyForm& PolyForm::operator-=(const PolyForm& o)
{
  if (o.is_zero()) return *this;
  if (dim_ != o.dim_ || degree_ != o.degree_)
    throw DimensionMismatch("form difference: shape mismatch");
  for (const auto& [key, c] : o.terms_) add_term(key.mask, key.mono, -c);
  return *this;
}

PolyForm& PolyForm::operator*=(const Rational& c)
{
  if (c == 0) {
    terms_.clear();
    return *this;
  }
  for (auto& [key, v] : terms_) v *= c;
  return *this;
}

PolyForm PolyForm::component(AltMask mask) const
{
  PolyForm out(dim_, 0);
  for (const auto& [key, c] : terms_)
    if (key.mask == mask) out.add_term(0, key.mono, c);
  return out;
}

template <typename Vec, typename Scalar>
static std::map<AltMask, Scalar> evaluate_impl(
    const std::map<TermKey, Rational>& terms, int dim, const Vec& x)
{
  if (static_cast<int>(x.size()) != dim)
    throw DimensionMismatch("evaluate: wrong point dimension");
  std::map<AltMask, Scalar> out;
  for (const auto& [key, c] : terms) {
    Scalar v = static_cast<Scalar>(0);
    if constexpr (std::is_same_v<Scalar, double>)
      v = c.get_d();
    else
      v = c;
    for (int i = 0; i < dim; ++i)
      for (int e = 0; e < key.mono[i]; ++e) v *= x(i);
    auto [it, fresh] = out.try_emplace(key.mask, v);
    if (!fresh) it->second += v;
  }
  return out;
}

std::map<AltMask, double> PolyForm::evaluate(const VecD& x) const
{
  return evaluate_impl<VecD, double>(terms_, dim_, x);
}

std::map<AltMask, Rational> PolyForm::evaluate(const VecQ& x) const
{
  return evaluate_impl<VecQ, Rational>(terms_, dim_, x);
}

std::string PolyForm::str() const
{
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [key, c] : terms_) {
    if (!first) os << " + ";
    first = false;
    os << c.get_str();
    for (int i = 0; i < dim_; ++i)
      if (key.mono[i] > 0) os << " x" << i << "^" << key.mono[i];
    for (int i : mask_indices(key.mask)) os << " dx" << i;
  }
  return os.str();
}

AffineEmbed AffineEmbed::identity(int d)
{
  return AffineEmbed{MatQ::Identity(d, d), VecQ::Zero(d)};
}

AffineEmbed AffineEmbed::simplex_chart(const MatQ& verts)
{
  const Eigen::Index m = verts.cols() - 1;
  MatQ lin(verts.rows(), m);
  for (Eigen::Index j = 0; j < m; ++j)
    lin.col(j) = verts.col(j + 1) - verts.col(0);
  return AffineEmbed{lin, verts.col(0)};
}

AffineEmbed AffineEmbed::compose(const AffineEmbed& inner) const
{
  if (inner.target_dim() != source_dim())
    throw DimensionMismatch("embed composition: shape mismatch");
  return AffineEmbed{linear * inner.linear, linear * inner.offset + offset};
}

VecQ AffineEmbed::apply(const VecQ& x) const { return linear * x + offset; }

PolyForm zero_form(int dim, int degree) { return PolyForm(dim, degree); }

PolyForm constant_form(int dim, AltMask mask, const Rational& c)
{
  PolyForm u(dim, mask_size(mask));
  u.add_term(mask, Monomial(dim, 0), c);
  return u;
}

PolyForm monomial_form(int dim, AltMask mask, Monomial mono, const Rational& c)
{
  PolyForm u(dim, mask_size(mask));
  u.add_term(mask, std::move(mono), c);
  return u;
}

// Sign of dx_j ^ dx_I as a reordering into dx_{I + j}; zero if j in I.
static int insert_sign(int j, AltMask I)
{
  if (I & (AltMask(1) << j)) return 0;
  int below = __builtin_popcount(I & ((AltMask(1) << j) - 1u));
  return (below % 2 == 0) ? 1 : -1;
}

PolyForm d(const PolyForm& u)
{
  if (u.degree() == u.dim()) return PolyForm(u.dim(), u.dim() == 0 ? 0 : u.degree());
  PolyForm out(u.dim(), u.degree() + 1);
  for (const auto& [key, c] : u.terms()) {
    for (int j = 0; j < u.dim(); ++j) {
      if (key.mono[j] == 0) continue;
      int s = insert_sign(j, key.mask);
      if (s == 0) continue;
      Monomial m = key.mono;
      Rational coeff = c * m[j];
      m[j] -= 1;
      out.add_term(key.mask | (AltMask(1) << j), std::move(m), s * coeff);
    }
  }
  return out;
}

// Sign of dx_I ^ dx_J relative to dx_{I u J}; masks must be disjoint.
static int merge_sign(AltMask I, AltMask J)
{
  int sign = 1;
  for (int j : mask_indices(J)) {
    int above = __builtin_popcount(I >> (j + 1));
    if (above % 2 == 1) sign = -sign;
    I |= AltMask(1) << j;
  }
  return sign;
}

PolyForm wedge(const PolyForm& u, const PolyForm& v)
{
  if (u.dim() != v.dim()) throw DimensionMismatch("wedge: dimension mismatch");
  int deg = u.degree() + v.degree();
  if (deg > u.dim()) return PolyForm(u.dim(), u.dim());
  PolyForm out(u.dim(), deg);
  for (const auto& [ku, cu] : u.terms()) {
    for (const auto& [kv, cv] : v.terms()) {
      if (ku.mask & kv.mask) continue;
      int s = merge_sign(ku.mask, kv.mask);
      Monomial m(u.dim());
      for (int i = 0; i < u.dim(); ++i) m[i] = ku.mono[i] + kv.mono[i];
      out.add_term(ku.mask | kv.mask, std::move(m), s * cu * cv);
    }
  }
  return out;
}

PolyForm koszul(const PolyForm& u)
{
  if (u.degree() == 0)
    throw DegreeMismatch("koszul: zero-degree form");
  PolyForm out(u.dim(), u.degree() - 1);
  for (const auto& [key, c] : u.terms()) {
    auto idx = mask_indices(key.mask);
    for (size_t r = 0; r < idx.size(); ++r) {
      Monomial m = key.mono;
      m[idx[r]] += 1;
      AltMask reduced = key.mask & ~(AltMask(1) << idx[r]);
      Rational coeff = (r % 2 == 0) ? c : -c;
      out.add_term(reduced, std::move(m), coeff);
    }
  }
  return out;
}

// Expand prod_i (offset_i + sum_j linear_ij t_j)^{alpha_i} as a polynomial map.
static std::map<Monomial, Rational> pullback_monomial(const AffineEmbed& phi,
                                                      const Monomial& alpha)
{
  const int s = phi.source_dim();
  std::map<Monomial, Rational> acc;
  acc[Monomial(s, 0)] = Rational(1);
  for (int i = 0; i < phi.target_dim(); ++i) {
    for (int rep = 0; rep < alpha[i]; ++rep) {
      std::map<Monomial, Rational> next;
      for (const auto& [mono, c] : acc) {
        if (phi.offset(i) != 0) {
          auto [it, fresh] = next.try_emplace(mono, c * phi.offset(i));
          if (!fresh) it->second += c * phi.offset(i);
        }
        for (int j = 0; j < s; ++j) {
          if (phi.linear(i, j) == 0) continue;
          Monomial m = mono;
          m[j] += 1;
          Rational v = c * phi.linear(i, j);
          auto [it, fresh] = next.try_emplace(std::move(m), v);
          if (!fresh) it->second += v;
        }
      }
      // Prune cancellations.
      for (auto it = next.begin(); it != next.end();)
        it = (it->second == 0) ? next.erase(it) : std::next(it);
      acc = std::move(next);
    }
  }
  return acc;
}

// Minor determinant of phi.linear with rows I, columns J.
static Rational embed_minor(const MatQ& lin, const std::vector<int>& rows,
                            const std::vector<int>& cols)
{
  const int k = static_cast<int>(rows.size());
  MatQ sub(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) sub(a, b) = lin(rows[a], cols[b]);
  return determinant(sub);
}

static void increasing_subsets(int n, int k, std::vector<std::vector<int>>& out)
{
  std::vector<int> cur(k);
  for (int i = 0; i < k; ++i) cur[i] = i;
  if (k > n) return;
  if (k == 0) {
    out.push_back({});
    return;
  }
  while (true) {
    out.push_back(cur);
    int i = k - 1;
    while (i >= 0 && cur[i] == n - k + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int j = i + 1; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
}

PolyForm pullback(const AffineEmbed& phi, const PolyForm& u)
{
  if (phi.target_dim() != u.dim())
    throw DimensionMismatch("pullback: embed target != form space");
  const int s = phi.source_dim();
  const int k = u.degree();
  if (k > s) return PolyForm(s, s);
  PolyForm out(s, k);
  std::vector<std::vector<int>> subsets;
  increasing_subsets(s, k, subsets);
  for (const auto& [key, c] : u.terms()) {
    auto rows = mask_indices(key.mask);
    auto poly = pullback_monomial(phi, key.mono);
    for (const auto& J : subsets) {
      Rational minor =
          (k == 0) ? Rational(1) : embed_minor(phi.linear, rows, J);
      if (minor == 0) continue;
      AltMask jm = mask_from_indices(J);
      for (const auto& [mono, pc] : poly) out.add_term(jm, mono, c * pc * minor);
    }
  }
  return out;
}

Rational integrate_std(const PolyForm& u)
{
  if (u.degree() != u.dim())
    throw DegreeMismatch("integrate_std: form degree != chart dimension");
  const int m = u.dim();
  if (m == 0) {
    // 0-form on a point: the value itself.
    Rational v(0);
    for (const auto& [key, c] : u.terms()) v += c;
    return v;
  }
  const AltMask top = (AltMask(1) << m) - 1u;
  Rational total(0);
  for (const auto& [key, c] : u.terms()) {
    if (key.mask != top) continue;
    // Dirichlet integral: int t^alpha dt = alpha! / (|alpha| + m)!.
    Rational num(1);
    long tot = 0;
    for (int e : key.mono) {
      num *= factorial(static_cast<unsigned>(e));
      tot += e;
    }
    total += c * num / factorial(static_cast<unsigned>(tot + m));
  }
  return total;
}

Rational integrate_simplex(const PolyForm& u, const MatQ& verts)
{
  if (static_cast<int>(verts.cols()) != u.degree() + 1)
    throw DegreeMismatch("integrate_simplex: degree != simplex dimension");
  return integrate_std(pullback(AffineEmbed::simplex_chart(verts), u));
}

static std::vector<Monomial> monomials_up_to(int p, int d)
{
  std::vector<Monomial> out;
  Monomial cur(d, 0);
  // Graded lexicographic enumeration.
  for (int deg = 0; deg <= p; ++deg) {
    std::vector<Monomial> level;
    std::function<void(int, int, Monomial&)> rec = [&](int pos, int left,
                                                       Monomial& m) {
      if (pos == d - 1) {
        m[pos] = left;
        level.push_back(m);
        return;
      }
      for (int e = left; e >= 0; --e) {
        m[pos] = e;
        rec(pos + 1, left - e, m);
      }
      m[pos] = 0;
    };
    if (d == 0) {
      if (deg == 0) out.push_back(Monomial{});
      continue;
    }
    Monomial m(d, 0);
    rec(0, deg, m);
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

std::vector<PolyForm> full_poly_basis(int p, int k, int d)
{
  if (p < 0 || k < 0 || k > d) return {};
  std::vector<std::vector<int>> subsets;
  increasing_subsets(d, k, subsets);
  std::vector<PolyForm> out;
  for (const auto& mono : monomials_up_to(p, d))
    for (const auto& J : subsets)
      out.push_back(monomial_form(d, mask_from_indices(J), mono, Rational(1)));
  return out;
}

Rational full_poly_dimension(int p, int k, int d)
{
  return binomial(p + d, d) * binomial(d, k);
}

Rational trimmed_dimension(int p, int k, int d)
{
  return binomial(p + d, p + k) * binomial(p + k - 1, k);
}

std::vector<PolyForm> trimmed_basis(int p, int k, int d)
{
  if (p < 1) throw std::invalid_argument("trimmed_basis: p >= 1 required");
  if (k < 0 || k > d) return {};
  std::vector<PolyForm> gens = full_poly_basis(p - 1, k, d);
  if (k < d)
    for (const auto& g : full_poly_basis(p - 1, k + 1, d))
      gens.push_back(koszul(g));
  auto keys = collect_keys(gens);
  MatQ coeffs = coeff_matrix(gens, keys);
  auto keep = independent_columns(coeffs);
  std::vector<PolyForm> out;
  out.reserve(keep.size());
  for (auto j : keep) out.push_back(gens[static_cast<size_t>(j)]);
  return out;
}

PolyForm barycentric(int m, int i)
{
  PolyForm lam(m, 0);
  if (i == 0) {
    lam.add_term(0, Monomial(m, 0), Rational(1));
    for (int j = 0; j < m; ++j) {
      Monomial mono(m, 0);
      mono[j] = 1;
      lam.add_term(0, std::move(mono), Rational(-1));
    }
  } else {
    Monomial mono(m, 0);
    mono[i - 1] = 1;
    lam.add_term(0, std::move(mono), Rational(1));
  }
  return lam;
}

static PolyForm d_barycentric(int m, int i)
{
  PolyForm out(m, 1);
  if (i == 0) {
    for (int j = 0; j < m; ++j)
      out.add_term(AltMask(1) << j, Monomial(m, 0), Rational(-1));
  } else {
    out.add_term(AltMask(1) << (i - 1), Monomial(m, 0), Rational(1));
  }
  return out;
}

PolyForm whitney_form(int m, const std::vector<int>& sigma)
{
  const int k = static_cast<int>(sigma.size()) - 1;
  if (k < 0 || k > m) throw DegreeMismatch("whitney_form: bad subsimplex");
  for (int v : sigma)
    if (v < 0 || v > m)
      throw std::invalid_argument("whitney_form: vertex out of range");
  PolyForm out(m, k);
  for (int i = 0; i <= k; ++i) {
    PolyForm part = barycentric(m, sigma[i]);
    for (int j = 0; j <= k; ++j) {
      if (j == i) continue;
      part = wedge(part, d_barycentric(m, sigma[j]));
    }
    if (i % 2 == 1) part *= Rational(-1);
    out += part;
  }
  out *= factorial(static_cast<unsigned>(k));
  return out;
}

std::vector<TermKey> collect_keys(const std::vector<PolyForm>& forms)
{
  std::map<TermKey, char> seen;
  for (const auto& f : forms)
    for (const auto& [key, c] : f.terms()) seen.emplace(key, 0);
  std::vector<TermKey> keys;
  keys.reserve(seen.size());
  for (const auto& [key, c] : seen) keys.push_back(key);
  return keys;
}

MatQ coeff_matrix(const std::vector<PolyForm>& forms,
                  const std::vector<TermKey>& keys)
{
  MatQ out = MatQ::Zero(static_cast<Eigen::Index>(keys.size()),
                        static_cast<Eigen::Index>(forms.size()));
  std::map<TermKey, Eigen::Index> where;
  for (size_t i = 0; i < keys.size(); ++i)
    where.emplace(keys[i], static_cast<Eigen::Index>(i));
  for (size_t j = 0; j < forms.size(); ++j)
    for (const auto& [key, c] : forms[j].terms()) {
      auto it = where.find(key);
      if (it == where.end())
        throw std::invalid_argument("coeff_matrix: key not in basis");
      out(it->second, static_cast<Eigen::Index>(j)) = c;
    }
  return out;
}

PolyForm form_from_coeffs(int dim, int degree,
                          const std::vector<TermKey>& keys, const VecQ& c)
{
  PolyForm out(dim, degree);
  for (Eigen::Index i = 0; i < c.size(); ++i)
    if (c(i) != 0) out.add_term(keys[static_cast<size_t>(i)].mask,
                                keys[static_cast<size_t>(i)].mono, c(i));
  return out;
}

Rational alt_inner(const MatQ& ginv, AltMask I, AltMask J)
{
  auto ri = mask_indices(I);
  auto rj = mask_indices(J);
  if (ri.size() != rj.size()) return Rational(0);
  if (ri.empty()) return Rational(1);
  return embed_minor(ginv, ri, rj);
}

PolyForm pointwise_inner(const PolyForm& u, const PolyForm& v,
                         const MatQ& ginv)
{
  if (u.dim() != v.dim() || u.degree() != v.degree())
    throw DimensionMismatch("pointwise_inner: shape mismatch");
  PolyForm out(u.dim(), 0);
  for (const auto& [ku, cu] : u.terms())
    for (const auto& [kv, cv] : v.terms()) {
      Rational g = alt_inner(ginv, ku.mask, kv.mask);
      if (g == 0) continue;
      Monomial m(u.dim());
      for (int i = 0; i < u.dim(); ++i) m[i] = ku.mono[i] + kv.mono[i];
      out.add_term(0, std::move(m), cu * cv * g);
    }
  return out;
}

}  // namespace fes
