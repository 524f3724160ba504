#include "vemflow/forms.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

#include "vemflow/errors.hpp"

namespace vemflow {

void StabilizationRecipe::validate() const {
  if (variant == StabilizationVariant::DRecipe && !(sigma > 0.0))
    throw ConfigError("D-recipe safety parameter sigma must be positive");
}

std::string to_string(StabilizationVariant v) { return v == StabilizationVariant::Dofi ? "dofi" : "drecipe"; }

StabilizationVariant parse_stabilization(const std::string& name) {
  if (name == "dofi") return StabilizationVariant::Dofi;
  if (name == "drecipe") return StabilizationVariant::DRecipe;
  throw ConfigError("unknown stabilization '" + name + "' (expected dofi or drecipe)");
}

Discretization::Discretization(Mesh mesh, int k) : mesh_(std::move(mesh)), k_(k) {
  require_supported_degree(k);
  dofs_ = DofMap(mesh_, k);
  const int n = mesh_.num_cells();
  ops_.resize(n);
  quad_.resize(n);
  mono_.resize(n);
  qbasis_.resize(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (int c = 0; c < n; ++c) {
    ops_[c] = build_element_operators(LocalElement::from_mesh(mesh_, c, k));
    quad_[c] = quadrature_points(mesh_, c, 2 * k + 2);
    const MonomialBasis b = ops_[c].element.basis(k + 1);
    Matrix m(quad_[c].size(), b.size());
    for (std::size_t q = 0; q < quad_[c].size(); ++q) m.row(q) = b.values(quad_[c][q].x).transpose();
    mono_[c] = std::move(m);
    const int nk = poly_dim(k);
    qbasis_[c] = ops_[c].element.area() * ops_[c].mass.topLeftCorner(nk, nk).inverse();
  }
}

Vector Discretization::local_z(int cell, const Vector& global) const {
  const auto& map = dofs_.z_dofs(cell);
  Vector out(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) out(i) = global(map[i]);
  return out;
}

Vector Discretization::local_v(int cell, const Vector& global) const {
  const auto& map = dofs_.v_dofs(cell);
  const auto& sign = dofs_.v_signs(cell);
  Vector out(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) out(i) = sign[i] * global(map[i]);
  return out;
}

Vector Discretization::local_q(int cell, const Vector& global) const {
  const auto& map = dofs_.q_dofs(cell);
  Vector out(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) out(i) = global(map[i]);
  return out;
}

CellFunction at_time(const CellField& f, double t) {
  return [f, t](int cell, const Vec2& x) { return f(cell, x, t); };
}

Matrix stabilization_matrix(StabilizedForm form, const StabilizationRecipe& recipe,
                            const StabilizationContext& ctx, int size) {
  recipe.validate();
  const bool scaled = form != StabilizedForm::Diffusion;
  const double area_factor = scaled ? ctx.area : 1.0;
  if (recipe.variant == StabilizationVariant::Dofi) return area_factor * Matrix::Identity(size, size);
  if (ctx.consistency_diagonal.size() != size)
    throw InvalidInput("D-recipe stabilization needs the consistency diagonal");
  Vector d(size);
  for (int j = 0; j < size; ++j)
    d(j) = std::max(ctx.consistency_diagonal(j) / area_factor, recipe.sigma * ctx.nu);
  return area_factor * Matrix(d.asDiagonal());
}

double stabilization_scale(const StabilizationRecipe& recipe, double nu) {
  return recipe.variant == StabilizationVariant::Dofi ? nu : 1.0;
}

namespace {

// Quadrature data of one cell with the projected basis functions evaluated.
struct CellEval {
  Vector w;        // quadrature weights
  Matrix pz;       // Pi0_{k+1} of Z basis functions, nq x nZ
  Matrix gx, gy;   // Pi0_k grad of Z basis functions
  Matrix vx, vy;   // vector Pi0_k of V basis functions
};

CellEval evaluate_cell(const Discretization& d, int cell, bool scalar, bool grad, bool vec) {
  const ElementOperators& ops = d.ops(cell);
  const auto& quad = d.quadrature(cell);
  const Matrix& mono = d.monomials_at_quadrature(cell);
  const int nk = poly_dim(d.k());
  CellEval e;
  e.w.resize(quad.size());
  for (std::size_t q = 0; q < quad.size(); ++q) e.w(q) = quad[q].w;
  if (scalar) e.pz = mono * ops.pi0;
  if (grad) {
    e.gx = mono.leftCols(nk) * ops.pi0_grad.topRows(nk);
    e.gy = mono.leftCols(nk) * ops.pi0_grad.bottomRows(nk);
  }
  if (vec) {
    e.vx = mono.leftCols(nk) * ops.pi0_vec.topRows(nk);
    e.vy = mono.leftCols(nk) * ops.pi0_vec.bottomRows(nk);
  }
  return e;
}

// (I - D Pi)^T W (I - D Pi), scaled.
Matrix stabilize(const Matrix& dofs_of_monomials, const Matrix& projector, const Matrix& w, double scale) {
  const Matrix ker = Matrix::Identity(projector.cols(), projector.cols()) - dofs_of_monomials * projector;
  return scale * (ker.transpose() * w * ker);
}

template <class LocalFn>
std::vector<Matrix> local_matrices(const Discretization& d, LocalFn fn) {
  std::vector<Matrix> out(d.num_cells());
  // Exceptions cannot cross the OpenMP region; capture the first one.
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 16)
  for (int c = 0; c < d.num_cells(); ++c) {
    try {
      out[c] = fn(c);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

SparseMatrix assemble_zz(const Discretization& d, const std::vector<Matrix>& local) {
  std::vector<Triplet> t;
  for (int c = 0; c < d.num_cells(); ++c) {
    const auto& map = d.dofs().z_dofs(c);
    for (std::size_t i = 0; i < map.size(); ++i)
      for (std::size_t j = 0; j < map.size(); ++j) t.emplace_back(map[i], map[j], local[c](i, j));
  }
  SparseMatrix m(d.dofs().num_z(), d.dofs().num_z());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

double mobility_inverse(const MobilityLaw& law, double c, const Vec2& x) {
  const double a = law.a(c, x);
  if (!(a >= law.lower && a <= law.upper)) {
    std::ostringstream msg;
    msg << "mobility " << a << " outside declared bounds [" << law.lower << ", " << law.upper << "]";
    throw InvalidCoefficient(msg.str());
  }
  return 1.0 / a;
}

}  // namespace

double cell_mean(const Discretization& d, int cell, const SpaceField& f) {
  double s = 0.0;
  for (const auto& qp : d.quadrature(cell)) s += qp.w * f(qp.x);
  return s / d.ops(cell).element.area();
}

Vec2 cell_mean_velocity(const Discretization& d, int cell, const Vector& U) {
  const ElementOperators& ops = d.ops(cell);
  const int nk = poly_dim(d.k());
  const Vector coeff = ops.pi0_vec * d.local_v(cell, U);
  const Vector integrals = ops.mass.row(0).head(nk).transpose();
  return Vec2(coeff.head(nk).dot(integrals), coeff.tail(nk).dot(integrals)) / ops.element.area();
}

double cell_mean_concentration(const Discretization& d, int cell, const Vector& C) {
  const ElementOperators& ops = d.ops(cell);
  const Vector coeff = ops.pi0 * d.local_z(cell, C);
  return coeff.dot(ops.mass.row(0).transpose()) / ops.element.area();
}

LocalForm local_mass_concentration(const Discretization& d, int cell, const SpaceField& phi,
                                   const StabilizationRecipe& recipe) {
  const ElementOperators& ops = d.ops(cell);
  const CellEval e = evaluate_cell(d, cell, true, false, false);
  const auto& quad = d.quadrature(cell);
  Vector wphi(quad.size());
  for (std::size_t q = 0; q < quad.size(); ++q) {
    const double p = phi(quad[q].x);
    if (!(p > 0.0)) throw InvalidCoefficient("non-positive porosity sample");
    wphi(q) = e.w(q) * p;
  }
  LocalForm out;
  out.consistency = e.pz.transpose() * wphi.asDiagonal() * e.pz;
  StabilizationContext ctx;
  ctx.nu = std::abs(wphi.sum() / ops.element.area());
  ctx.area = ops.element.area();
  ctx.consistency_diagonal = out.consistency.diagonal();
  const Matrix w = stabilization_matrix(StabilizedForm::Mass, recipe, ctx, out.consistency.rows());
  out.stabilization = stabilize(ops.z_dofs_of_monomials, ops.pi0, w, stabilization_scale(recipe, ctx.nu));
  return out;
}

LocalForm local_diffusion(const Discretization& d, int cell, const Vector& U, const SpaceField& phi,
                          const Dispersion& disp, const StabilizationRecipe& recipe) {
  const ElementOperators& ops = d.ops(cell);
  const CellEval e = evaluate_cell(d, cell, false, true, true);
  const Vector uloc = d.local_v(cell, U);
  const Vector ux = e.vx * uloc;
  const Vector uy = e.vy * uloc;
  const auto& quad = d.quadrature(cell);
  const int nq = static_cast<int>(quad.size());
  Vector d11(nq), d12(nq), d22(nq);
  double phi_int = 0.0;
  for (int q = 0; q < nq; ++q) {
    const double p = phi(quad[q].x);
    if (!(p > 0.0)) throw InvalidCoefficient("non-positive porosity sample");
    phi_int += e.w(q) * p;
    const Mat2 dt = diffusion_tensor(Vec2(ux(q), uy(q)), p, disp.d_m, disp.d_l, disp.d_t);
    d11(q) = e.w(q) * dt(0, 0);
    d12(q) = e.w(q) * dt(0, 1);
    d22(q) = e.w(q) * dt(1, 1);
  }
  LocalForm out;
  const Matrix cross = e.gx.transpose() * d12.asDiagonal() * e.gy;
  out.consistency = e.gx.transpose() * d11.asDiagonal() * e.gx + cross + cross.transpose() +
                    e.gy.transpose() * d22.asDiagonal() * e.gy;
  const double area = ops.element.area();
  const double nu_m = std::abs(phi_int / area);
  StabilizationContext ctx;
  ctx.nu = nu_m * (disp.d_m + disp.d_t * cell_mean_velocity(d, cell, U).norm());
  ctx.area = area;
  ctx.consistency_diagonal = out.consistency.diagonal();
  const Matrix w = stabilization_matrix(StabilizedForm::Diffusion, recipe, ctx, out.consistency.rows());
  out.stabilization = stabilize(ops.z_dofs_of_monomials, ops.pinabla, w, stabilization_scale(recipe, ctx.nu));
  return out;
}

Matrix local_convection(const Discretization& d, int cell, const Vector& U, const CellFunction& q_plus,
                        const CellFunction& q_minus) {
  const CellEval e = evaluate_cell(d, cell, true, true, true);
  const Vector uloc = d.local_v(cell, U);
  const Vector ux = e.vx * uloc;
  const Vector uy = e.vy * uloc;
  const auto& quad = d.quadrature(cell);
  Vector wq(quad.size());
  for (std::size_t q = 0; q < quad.size(); ++q) {
    const double qp = q_plus(cell, quad[q].x);
    const double qm = q_minus(cell, quad[q].x);
    if (qp < 0.0 || qm < 0.0) throw InvalidCoefficient("negative source density sample");
    wq(q) = e.w(q) * (qp + qm);
  }
  // t1(i, j) = (Pi U . Pi grad phi_j, Pi phi_i)
  const Matrix transport = (e.w.cwiseProduct(ux)).asDiagonal() * e.gx + (e.w.cwiseProduct(uy)).asDiagonal() * e.gy;
  const Matrix t1 = e.pz.transpose() * transport;
  const Matrix t2 = e.pz.transpose() * wq.asDiagonal() * e.pz;
  return 0.5 * (t1 + t2 - t1.transpose());
}

LocalForm local_darcy_mass(const Discretization& d, int cell, const Vector& C, const MobilityLaw& a,
                           const StabilizationRecipe& recipe) {
  const ElementOperators& ops = d.ops(cell);
  const CellEval e = evaluate_cell(d, cell, true, false, true);
  const Vector c = e.pz * d.local_z(cell, C);
  const auto& quad = d.quadrature(cell);
  Vector wa(quad.size());
  for (std::size_t q = 0; q < quad.size(); ++q) wa(q) = e.w(q) * mobility_inverse(a, c(q), quad[q].x);
  LocalForm out;
  out.consistency = e.vx.transpose() * wa.asDiagonal() * e.vx + e.vy.transpose() * wa.asDiagonal() * e.vy;
  const double area = ops.element.area();
  StabilizationContext ctx;
  ctx.nu = std::abs(1.0 / a.a(cell_mean_concentration(d, cell, C), ops.element.centroid()));
  ctx.area = area;
  ctx.consistency_diagonal = out.consistency.diagonal();
  const Matrix w = stabilization_matrix(StabilizedForm::Darcy, recipe, ctx, out.consistency.rows());
  out.stabilization = stabilize(ops.v_dofs_of_monomials, ops.pi0_vec, w, stabilization_scale(recipe, ctx.nu));
  return out;
}

SparseMatrix assemble_mass_concentration(const Discretization& d, const SpaceField& phi,
                                         const StabilizationRecipe& recipe) {
  return assemble_zz(d, local_matrices(d, [&](int c) { return local_mass_concentration(d, c, phi, recipe).total(); }));
}

SparseMatrix assemble_diffusion(const Discretization& d, const Vector& U, const SpaceField& phi,
                                const Dispersion& disp, const StabilizationRecipe& recipe) {
  return assemble_zz(d, local_matrices(d, [&](int c) { return local_diffusion(d, c, U, phi, disp, recipe).total(); }));
}

SparseMatrix assemble_convection(const Discretization& d, const Vector& U, const CellFunction& q_plus,
                                 const CellFunction& q_minus) {
  return assemble_zz(d, local_matrices(d, [&](int c) { return local_convection(d, c, U, q_plus, q_minus); }));
}

SparseMatrix assemble_darcy_mass(const Discretization& d, const Vector& C, const MobilityLaw& a,
                                 const StabilizationRecipe& recipe) {
  const auto local = local_matrices(d, [&](int c) { return local_darcy_mass(d, c, C, a, recipe).total(); });
  std::vector<Triplet> t;
  for (int c = 0; c < d.num_cells(); ++c) {
    const auto& map = d.dofs().v_dofs(c);
    const auto& sign = d.dofs().v_signs(c);
    for (std::size_t i = 0; i < map.size(); ++i)
      for (std::size_t j = 0; j < map.size(); ++j) t.emplace_back(map[i], map[j], sign[i] * sign[j] * local[c](i, j));
  }
  SparseMatrix m(d.dofs().num_v(), d.dofs().num_v());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

SparseMatrix assemble_divergence(const Discretization& d) {
  std::vector<Triplet> t;
  for (int c = 0; c < d.num_cells(); ++c) {
    const ElementOperators& ops = d.ops(c);
    const auto& rows = d.dofs().q_dofs(c);
    const auto& cols = d.dofs().v_dofs(c);
    const auto& sign = d.dofs().v_signs(c);
    const Matrix local = -ops.element.area() * ops.divergence;
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols.size(); ++j)
        if (local(i, j) != 0.0) t.emplace_back(rows[i], cols[j], sign[j] * local(i, j));
  }
  SparseMatrix m(d.dofs().num_q(), d.dofs().num_v());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

Vector rhs_load(const Discretization& d, const CellFunction& f) {
  Vector out = Vector::Zero(d.dofs().num_z());
  if (!f) return out;
  for (int c = 0; c < d.num_cells(); ++c) {
    const CellEval e = evaluate_cell(d, c, true, false, false);
    const auto& quad = d.quadrature(c);
    Vector wf(quad.size());
    for (std::size_t q = 0; q < quad.size(); ++q) wf(q) = e.w(q) * f(c, quad[q].x);
    const Vector local = e.pz.transpose() * wf;
    const auto& map = d.dofs().z_dofs(c);
    for (std::size_t i = 0; i < map.size(); ++i) out(map[i]) += local(i);
  }
  return out;
}

Vector rhs_concentration(const Discretization& d, const CellFunction& q_plus, const CellFunction& c_hat) {
  return rhs_load(d, [&](int c, const Vec2& x) { return q_plus(c, x) * c_hat(c, x); });
}

Vector rhs_gravity(const Discretization& d, const GravityLaw& gamma, const Vector& C) {
  Vector out = Vector::Zero(d.dofs().num_v());
  if (!gamma) return out;
  for (int c = 0; c < d.num_cells(); ++c) {
    const CellEval e = evaluate_cell(d, c, true, false, true);
    const Vector cq = e.pz * d.local_z(c, C);
    const auto& quad = d.quadrature(c);
    Vector gx(quad.size()), gy(quad.size());
    for (std::size_t q = 0; q < quad.size(); ++q) {
      const Vec2 g = gamma(cq(q), quad[q].x);
      gx(q) = e.w(q) * g.x();
      gy(q) = e.w(q) * g.y();
    }
    const Vector local = e.vx.transpose() * gx + e.vy.transpose() * gy;
    const auto& map = d.dofs().v_dofs(c);
    const auto& sign = d.dofs().v_signs(c);
    for (std::size_t i = 0; i < map.size(); ++i) out(map[i]) += sign[i] * local(i);
  }
  return out;
}

Vector rhs_mass(const Discretization& d, const CellFunction& G) {
  Vector out = Vector::Zero(d.dofs().num_q());
  const int nk = poly_dim(d.k());
  for (int c = 0; c < d.num_cells(); ++c) {
    const auto& quad = d.quadrature(c);
    const Matrix psi = d.monomials_at_quadrature(c).leftCols(nk) * d.pressure_basis(c);
    Vector wg(quad.size());
    for (std::size_t q = 0; q < quad.size(); ++q) wg(q) = quad[q].w * G(c, quad[q].x);
    const Vector local = psi.transpose() * wg;
    const auto& map = d.dofs().q_dofs(c);
    for (std::size_t i = 0; i < map.size(); ++i) out(map[i]) += local(i);
  }
  return out;
}

void write_coo(std::ostream& out, const SparseMatrix& m) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::setprecision(17);
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) s << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  out << s.str();
}

}  // namespace vemflow
