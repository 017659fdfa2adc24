#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <vector>

#include "dyncool/errors.hpp"
#include "dyncool/integrator.hpp"
#include "dyncool/moments.hpp"
#include "dyncool/params.hpp"
#include "dyncool/schedule.hpp"

namespace dyncool {

// Truncation of the two-mode Fock space: cavity levels n < na, mechanical
// levels m < nb, and total excitation n + m <= cap.
struct FockDims {
  std::size_t na = 12;
  std::size_t nb = 12;
  std::size_t cap = 22;

  static FockDims box(std::size_t na, std::size_t nb) { return {na, nb, na + nb - 2}; }
  static FockDims capped(std::size_t c) { return {c + 1, c + 1, c}; }
  FockDims doubled() const { return {2 * na, 2 * nb, 2 * cap}; }

  void validate() const {
    if (na < 2 || nb < 2) throw ConfigError("Fock cutoffs must be >= 2 per mode");
    if (cap < 1) throw ConfigError("Fock total-excitation cap must be >= 1");
  }
  bool operator==(const FockDims&) const = default;
};

// Excitation cap for the capped basis n + m <= cap. The joint occupation is
// modelled as geometric with mean n_th plus the counter-rotating pair
// population, and the cap is the smallest one whose tail contribution to the
// mean falls below `tail`. Both modes share it, since the swap moves the
// whole mechanical distribution into the cavity.
inline std::size_t default_cutoff(double n_th, double G = 0.0, double tail = 1e-7) {
  if (!(n_th >= 0.0)) throw ConfigError("n_th must be >= 0");
  if (!(G >= 0.0) || !(G < 0.5)) throw ConfigError("cutoff rule needs 0 <= G < 0.5");
  const double mean = n_th + 1.1 * G / (1.0 - 4.0 * G * G);
  const double r = mean / (mean + 1.0);
  std::size_t c = 10;
  while (std::pow(r, static_cast<double>(c)) * (static_cast<double>(c) + 1.0 / (1.0 - r)) >= tail)
    ++c;
  return c;
}

inline FockDims default_dims(double n_th, double G = 0.0) {
  return FockDims::capped(default_cutoff(n_th, G));
}

class FockBasis {
 public:
  explicit FockBasis(const FockDims& d) : dims_(d) {
    d.validate();
    lookup_.assign(d.na * d.nb, -1);
    for (std::size_t n = 0; n < d.na; ++n)
      for (std::size_t m = 0; m < d.nb; ++m) {
        if (n + m > d.cap) continue;
        lookup_[n * d.nb + m] = static_cast<long>(n_.size());
        n_.push_back(n);
        m_.push_back(m);
        const std::size_t p = (n + m) % 2;
        block_[p].push_back(n_.size() - 1);
      }
    pos_.resize(n_.size());
    for (int p = 0; p < 2; ++p)
      for (std::size_t k = 0; k < block_[p].size(); ++k) pos_[block_[p][k]] = k;
  }

  const FockDims& dims() const { return dims_; }
  std::size_t size() const { return n_.size(); }
  std::size_t n(std::size_t i) const { return n_[i]; }
  std::size_t m(std::size_t i) const { return m_[i]; }
  std::size_t total(std::size_t i) const { return n_[i] + m_[i]; }

  // Index of |n, m>, or -1 outside the truncation.
  long index(long n, long m) const {
    if (n < 0 || m < 0 || n >= static_cast<long>(dims_.na) || m >= static_cast<long>(dims_.nb))
      return -1;
    return lookup_[static_cast<std::size_t>(n) * dims_.nb + static_cast<std::size_t>(m)];
  }

  // States with even (0) or odd (1) total excitation number.
  const std::vector<std::size_t>& block(int parity) const { return block_[parity]; }
  std::size_t position(std::size_t i) const { return pos_[i]; }

  // True for states on the truncation boundary of either mode.
  bool on_boundary(std::size_t i) const {
    return n_[i] + m_[i] == dims_.cap || n_[i] + 1 == dims_.na || m_[i] + 1 == dims_.nb;
  }

 private:
  FockDims dims_;
  std::vector<std::size_t> n_, m_;
  std::vector<long> lookup_;
  std::vector<std::size_t> block_[2];
  std::vector<std::size_t> pos_;
};

struct DensityMatrix {
  FockDims dims;
  Eigen::MatrixXcd data;
};

using SparseC = Eigen::SparseMatrix<std::complex<double>>;

namespace detail {

// Matrix of the ladder operator |n+dn, m+dm><n, m| * coef(n, m) within the
// truncation.
template <class Coef>
SparseC ladder(const FockBasis& basis, long dn, long dm, Coef coef) {
  std::vector<Eigen::Triplet<std::complex<double>>> trip;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const long n = static_cast<long>(basis.n(i)), m = static_cast<long>(basis.m(i));
    const long j = basis.index(n + dn, m + dm);
    if (j < 0) continue;
    const double c = coef(n, m);
    if (c != 0.0) trip.emplace_back(static_cast<int>(j), static_cast<int>(i), c);
  }
  const auto d = static_cast<Eigen::Index>(basis.size());
  SparseC op(d, d);
  op.setFromTriplets(trip.begin(), trip.end());
  return op;
}

inline double sq(long x) { return std::sqrt(static_cast<double>(x)); }

// <O> = sum_i rho(i, j(i)) <j(i)|O|i> for O moving |n,m> to |n+dn, m+dm>.
template <class Coef>
std::complex<double> expect_ladder(const FockBasis& basis, const Eigen::MatrixXcd& rho, long dn,
                                   long dm, Coef coef) {
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const long n = static_cast<long>(basis.n(i)), m = static_cast<long>(basis.m(i));
    const long j = basis.index(n + dn, m + dm);
    if (j < 0) continue;
    acc += rho(static_cast<Eigen::Index>(i), j) * coef(n, m);
  }
  return acc;
}

}  // namespace detail

// The six second moments Tr(rho O).
inline MomentState moments_from_rho(const FockBasis& basis, const Eigen::MatrixXcd& rho) {
  using detail::sq;
  MomentState s;
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const double p = rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
    na += p * static_cast<double>(basis.n(i));
    nb += p * static_cast<double>(basis.m(i));
  }
  s.N_a = na;
  s.N_b = nb;
  // a^dag b : |n,m> -> |n+1, m-1>
  s.c_ab_dag = detail::expect_ladder(basis, rho, 1, -1, [](long n, long m) { return sq(n + 1) * sq(m); });
  s.c_ab = detail::expect_ladder(basis, rho, -1, -1, [](long n, long m) { return sq(n) * sq(m); });
  s.c_aa = detail::expect_ladder(basis, rho, -2, 0, [](long n, long) { return sq(n) * sq(n - 1); });
  s.c_bb = detail::expect_ladder(basis, rho, 0, -2, [](long, long m) { return sq(m) * sq(m - 1); });
  return s;
}

inline MomentState moments_from_rho(const DensityMatrix& rho) {
  return moments_from_rho(FockBasis(rho.dims), rho.data);
}

// Cavity vacuum times a Bose-Einstein mechanical state, renormalized on the
// truncation. Throws PhysicsError if the highest kept mechanical level holds
// 1e-6 or more of the population.
inline DensityMatrix thermal_vacuum_state(double n_th, const FockDims& dims) {
  if (!(n_th >= 0.0)) throw ConfigError("n_th must be >= 0");
  const FockBasis basis(dims);
  const double r = n_th / (n_th + 1.0);
  const std::size_t mmax = std::min(dims.nb - 1, dims.cap);
  std::vector<double> p(mmax + 1);
  double z = 0.0;
  for (std::size_t m = 0; m <= mmax; ++m) z += (p[m] = std::pow(r, static_cast<double>(m)));
  for (double& x : p) x /= z;
  if (p[mmax] >= 1e-6) {
    std::size_t need = mmax;
    while ((1.0 - r) * std::pow(r, static_cast<double>(need)) >= 1e-6) ++need;
    std::ostringstream os;
    os << "mechanical cutoff too small for n_th = " << n_th << ": top level population " << p[mmax]
       << " >= 1e-6; use a mechanical cutoff of at least " << need + 1;
    throw PhysicsError(os.str());
  }
  DensityMatrix rho{dims, Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(basis.size()),
                                                 static_cast<Eigen::Index>(basis.size()))};
  for (std::size_t m = 0; m <= mmax; ++m) {
    const long i = basis.index(0, static_cast<long>(m));
    rho.data(i, i) = p[m];
  }
  return rho;
}

struct FockOperators {
  SparseC a, b, H;
};

inline FockOperators build_operators(const SystemParams& p, const FockBasis& basis) {
  using detail::sq;
  FockOperators ops;
  ops.a = detail::ladder(basis, -1, 0, [](long n, long) { return sq(n); });
  ops.b = detail::ladder(basis, 0, -1, [](long, long m) { return sq(m); });
  // Coupling terms built element-wise so the truncated H stays Hermitian.
  const SparseC adag_b = detail::ladder(basis, 1, -1, [](long n, long m) { return sq(n + 1) * sq(m); });
  const SparseC adag_bdag =
      detail::ladder(basis, 1, 1, [](long n, long m) { return sq(n + 1) * sq(m + 1); });
  const SparseC num = detail::ladder(basis, 0, 0, [&](long n, long m) {
    return -p.delta_prime * static_cast<double>(n) + p.omega_m * static_cast<double>(m);
  });
  SparseC coupling = adag_b + adag_bdag;
  SparseC coupling_h = SparseC(coupling.adjoint());
  ops.H = num + p.G * (coupling + coupling_h);
  return ops;
}

using Liouvillian = std::function<Eigen::MatrixXcd(const Eigen::MatrixXcd&)>;

// rho -> -i[H, rho] + kappa D[a] + gamma (n_th+1) D[b] + gamma n_th D[b^dag],
// in the lab frame and valid for any (not necessarily Hermitian) matrix.
inline Liouvillian build_liouvillian_applier(const SystemParams& p, double kappa_now,
                                             const FockDims& dims) {
  const FockBasis basis(dims);
  const auto ops = build_operators(p, basis);
  const std::complex<double> i(0.0, 1.0);
  struct Jump {
    SparseC L, Ld, LdL;
    double rate;
  };
  std::vector<Jump> jumps;
  auto add = [&](const SparseC& L, double rate) {
    if (rate == 0.0) return;
    SparseC Ld = SparseC(L.adjoint());
    SparseC LdL = Ld * L;
    jumps.push_back({L, Ld, LdL, rate});
  };
  add(ops.a, kappa_now);
  add(ops.b, p.gamma * (p.n_th + 1.0));
  add(SparseC(ops.b.adjoint()), p.gamma * p.n_th);
  const SparseC H = ops.H;
  return [H, jumps, i](const Eigen::MatrixXcd& rho) {
    Eigen::MatrixXcd out = -i * (H * rho) + i * (rho * H);
    for (const auto& j : jumps) {
      const Eigen::MatrixXcd Lr = j.L * rho;
      const Eigen::MatrixXcd LrLd = Lr * j.Ld;
      out += j.rate * (LrLd - 0.5 * (j.LdL * rho) - 0.5 * (rho * j.LdL));
    }
    return out;
  };
}

struct FockEvolveOptions {
  double t_end = 50.0;
  double sample_dt = 1.0;
  OdeTolerances tol{1e-9, 1e-12};
  bool check_positivity = true;
  double tail_limit = 1e-6;
};

struct FockSample {
  double t = 0.0;
  MomentState moments;
  double trace = 1.0;
  double hermiticity = 0.0;  // max |rho - rho^dag|
  double tail = 0.0;         // population on the truncation boundary
  double min_eigenvalue = std::numeric_limits<double>::quiet_NaN();
};

struct FockTrajectory {
  FockDims dims;
  std::vector<FockSample> samples;
  OdeStats stats;

  std::vector<double> times() const {
    std::vector<double> v;
    for (const auto& s : samples) v.push_back(s.t);
    return v;
  }
  std::vector<double> phonons() const {
    std::vector<double> v;
    for (const auto& s : samples) v.push_back(s.moments.N_b);
    return v;
  }
};

using DensityObserver = std::function<void(double, const DensityMatrix&)>;

namespace detail {

// Master-equation right-hand side on the two parity blocks of rho in the
// frame rotating at omega_f on both modes. In that frame a^dag b is static
// and a^dag b^dag carries exp(2 i omega_f t).
class BlockedLiouvillian {
 public:
  BlockedLiouvillian(const SystemParams& p, const FockBasis& basis)
      : p_(p), basis_(basis), wf_(p.omega_m) {
    using detail::sq;
    for (int q = 0; q < 2; ++q) {
      const auto& blk = basis.block(q);
      const auto d = static_cast<Eigen::Index>(blk.size());
      dim_[q] = blk.size();
      h0_[q].resize(d);
      gam_a_[q].resize(d);
      gam_b_[q].resize(d);
      gam_bd_[q].resize(d);
      std::vector<Eigen::Triplet<std::complex<double>>> ts, tu;
      for (std::size_t k = 0; k < blk.size(); ++k) {
        const std::size_t i = blk[k];
        const long n = static_cast<long>(basis.n(i)), m = static_cast<long>(basis.m(i));
        h0_[q](static_cast<Eigen::Index>(k)) =
            (-p.delta_prime - wf_) * static_cast<double>(n) + (p.omega_m - wf_) * static_cast<double>(m);
        // Diagonal of L^dag L for the truncated operators.
        gam_a_[q](static_cast<Eigen::Index>(k)) = static_cast<double>(n);
        gam_b_[q](static_cast<Eigen::Index>(k)) = static_cast<double>(m);
        gam_bd_[q](static_cast<Eigen::Index>(k)) =
            basis.index(n, m + 1) >= 0 ? static_cast<double>(m + 1) : 0.0;
        // a^dag b and its adjoint (same block).
        if (long j = basis.index(n + 1, m - 1); j >= 0) {
          const auto r = static_cast<int>(basis.position(static_cast<std::size_t>(j)));
          const double c = sq(n + 1) * sq(m);
          ts.emplace_back(r, static_cast<int>(k), c);
          ts.emplace_back(static_cast<int>(k), r, c);
        }
        if (long j = basis.index(n + 1, m + 1); j >= 0) {
          const auto r = static_cast<int>(basis.position(static_cast<std::size_t>(j)));
          tu.emplace_back(r, static_cast<int>(k), sq(n + 1) * sq(m + 1));
        }
        // Jump gather maps into block q from block 1-q.
        auto gather = [&](long nn, long mm, double c, std::vector<std::pair<long, double>>& g) {
          const long j = basis.index(nn, mm);
          if (j < 0) g.emplace_back(-1, 0.0);
          else g.emplace_back(static_cast<long>(basis.position(static_cast<std::size_t>(j))), c);
        };
        gather(n + 1, m, sq(n + 1), ga_[q]);
        gather(n, m + 1, sq(m + 1), gb_[q]);
        gather(n, m - 1, sq(m), gbd_[q]);
      }
      S_[q].resize(d, d);
      S_[q].setFromTriplets(ts.begin(), ts.end());
      U_[q].resize(d, d);
      U_[q].setFromTriplets(tu.begin(), tu.end());
      Ud_[q] = SparseC(U_[q].adjoint());
      build_csr(q);
    }
    std::size_t nnz = std::max(csr_[0].kind.size(), csr_[1].kind.size());
    val_.resize(nnz);
    kd_.resize(std::max(dim_[0], dim_[1]));
  }

  std::size_t real_size() const { return 2 * (dim_[0] * dim_[0] + dim_[1] * dim_[1]); }
  std::size_t dim(int q) const { return dim_[q]; }
  double frame_frequency() const { return wf_; }
  std::size_t offset(int q) const { return q == 0 ? 0 : 2 * dim_[0] * dim_[0]; }

  using CMap = Eigen::Map<Eigen::MatrixXcd>;
  using CCMap = Eigen::Map<const Eigen::MatrixXcd>;

  CCMap view(std::span<const double> y, int q) const {
    const auto d = static_cast<Eigen::Index>(dim_[q]);
    return CCMap(reinterpret_cast<const std::complex<double>*>(y.data() + offset(q)), d, d);
  }
  CMap view(std::span<double> y, int q) const {
    const auto d = static_cast<Eigen::Index>(dim_[q]);
    return CMap(reinterpret_cast<std::complex<double>*>(y.data() + offset(q)), d, d);
  }

  // Only the Hermitian part of rho is propagated: X = K Herm(rho) and
  // drho = -i (X - X^dag) + jumps(Herm(rho)). An anti-Hermitian rounding
  // residue in the state is then inert instead of being amplified by the
  // strong jump terms during a pulse.
  void operator()(double t, double kappa, std::span<const double> y, std::span<double> dy) {
    const std::complex<double> up = std::polar(1.0, 2.0 * wf_ * t);
    const std::complex<double> phase[3] = {p_.G, p_.G * up, p_.G * std::conj(up)};
    const double rb = p_.gamma * (p_.n_th + 1.0), rbd = p_.gamma * p_.n_th;
    for (int q = 0; q < 2; ++q) hermitian_part(view(y, q), herm_[q]);
    for (int q = 0; q < 2; ++q) {
      const Eigen::MatrixXcd& rho = herm_[q];
      auto out = view(dy, q);
      const auto d = static_cast<Eigen::Index>(dim_[q]);
      const auto& csr = csr_[q];
      for (std::size_t k = 0; k < csr.kind.size(); ++k) val_[k] = csr.kind_coef[k] * phase[csr.kind[k]];
      // K = H_I - (i/2) sum L^dag L
      for (Eigen::Index k = 0; k < d; ++k)
        kd_[static_cast<std::size_t>(k)] = std::complex<double>(
            h0_[q](k),
            -0.5 * (kappa * gam_a_[q](k) + rb * gam_b_[q](k) + rbd * gam_bd_[q](k)));
      X_.resize(d, d);
      for (Eigen::Index c = 0; c < d; ++c) {
        const std::complex<double>* rc = rho.data() + c * d;
        std::complex<double>* xc = X_.data() + c * d;
        for (Eigen::Index r = 0; r < d; ++r) {
          std::complex<double> acc = kd_[static_cast<std::size_t>(r)] * rc[r];
          for (int k = csr.row[static_cast<std::size_t>(r)]; k < csr.row[static_cast<std::size_t>(r) + 1]; ++k)
            acc += val_[static_cast<std::size_t>(k)] * rc[csr.col[static_cast<std::size_t>(k)]];
          xc[r] = acc;
        }
      }
      // -i X + i X^dag, tiled for the transposed read
      constexpr Eigen::Index T = 32;
      for (Eigen::Index c0 = 0; c0 < d; c0 += T)
        for (Eigen::Index r0 = 0; r0 < d; r0 += T)
          for (Eigen::Index c = c0; c < std::min(d, c0 + T); ++c)
            for (Eigen::Index r = r0; r < std::min(d, r0 + T); ++r) {
              const std::complex<double> v = X_(r, c) - std::conj(X_(c, r));
              out(r, c) = std::complex<double>(v.imag(), -v.real());
            }

      const Eigen::MatrixXcd& src = herm_[1 - q];
      add_jump(out, src, ga_[q], kappa, d);
      add_jump(out, src, gb_[q], rb, d);
      add_jump(out, src, gbd_[q], rbd, d);
    }
  }

  // Assembles the lab-frame density matrix on the full basis.
  Eigen::MatrixXcd lab_matrix(double t, std::span<const double> y) const {
    const auto D = static_cast<Eigen::Index>(basis_.size());
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(D, D);
    for (int q = 0; q < 2; ++q) {
      const auto blk = view(y, q);
      const auto& idx = basis_.block(q);
      for (std::size_t c = 0; c < idx.size(); ++c)
        for (std::size_t r = 0; r < idx.size(); ++r) {
          const double dN = static_cast<double>(basis_.total(idx[r])) -
                            static_cast<double>(basis_.total(idx[c]));
          rho(static_cast<Eigen::Index>(idx[r]), static_cast<Eigen::Index>(idx[c])) =
              std::polar(1.0, -wf_ * dN * t) *
              blk(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
    }
    return rho;
  }

  // Loads a full-basis matrix into the block vector. Entries coupling the
  // two parity sectors must vanish.
  void load(const Eigen::MatrixXcd& rho, std::span<double> y) const {
    for (std::size_t r = 0; r < basis_.size(); ++r)
      for (std::size_t c = 0; c < basis_.size(); ++c) {
        const auto v = rho(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        const int qr = static_cast<int>(basis_.total(r) % 2), qc = static_cast<int>(basis_.total(c) % 2);
        if (qr != qc) {
          if (std::abs(v) > 1e-14)
            throw ConfigError("initial density matrix mixes even and odd total excitation");
          continue;
        }
        auto blk = view(y, qr);
        blk(static_cast<Eigen::Index>(basis_.position(r)),
            static_cast<Eigen::Index>(basis_.position(c))) = v;
      }
  }

 private:
  // Coupling part of K per row: entries of S (kind 0), U (kind 1, phase
  // e^{2i w t}) and U^dag (kind 2, phase e^{-2i w t}).
  struct Csr {
    std::vector<int> row, col;
    std::vector<int> kind;
    std::vector<double> kind_coef;  // real matrix element
  };

  void build_csr(int q) {
    const auto d = static_cast<Eigen::Index>(dim_[q]);
    std::vector<std::vector<std::pair<int, int>>> rows(static_cast<std::size_t>(d));
    const SparseC* mats[3] = {&S_[q], &U_[q], &Ud_[q]};
    std::vector<std::vector<double>> rc(static_cast<std::size_t>(d));
    for (int kind = 0; kind < 3; ++kind) {
      const SparseC& M = *mats[kind];
      for (Eigen::Index c = 0; c < M.outerSize(); ++c)
        for (SparseC::InnerIterator it(M, c); it; ++it) {
          rows[static_cast<std::size_t>(it.row())].emplace_back(static_cast<int>(it.col()), kind);
          rc[static_cast<std::size_t>(it.row())].push_back(it.value().real());
        }
    }
    Csr& csr = csr_[q];
    csr.row.assign(1, 0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t k = 0; k < rows[r].size(); ++k) {
        csr.col.push_back(rows[r][k].first);
        csr.kind.push_back(rows[r][k].second);
        csr.kind_coef.push_back(rc[r][k]);
      }
      csr.row.push_back(static_cast<int>(csr.col.size()));
    }
  }

  template <class In>
  static void hermitian_part(const In& in, Eigen::MatrixXcd& out) {
    const Eigen::Index d = in.rows();
    out.resize(d, d);
    constexpr Eigen::Index T = 32;
    for (Eigen::Index c0 = 0; c0 < d; c0 += T)
      for (Eigen::Index r0 = 0; r0 < d; r0 += T)
        for (Eigen::Index c = c0; c < std::min(d, c0 + T); ++c)
          for (Eigen::Index r = r0; r < std::min(d, r0 + T); ++r)
            out(r, c) = 0.5 * (in(r, c) + std::conj(in(c, r)));
  }

  template <class Out>
  static void add_jump(Out& out, const Eigen::MatrixXcd& src,
                       const std::vector<std::pair<long, double>>& g, double rate, Eigen::Index d) {
    if (rate == 0.0) return;
    for (Eigen::Index c = 0; c < d; ++c) {
      const auto [sc, cc] = g[static_cast<std::size_t>(c)];
      if (sc < 0) continue;
      const double wc = rate * cc;
      const std::complex<double>* col = src.data() + sc * src.rows();
      for (Eigen::Index r = 0; r < d; ++r) {
        const auto [sr, cr] = g[static_cast<std::size_t>(r)];
        if (sr < 0) continue;
        out(r, c) += (wc * cr) * col[sr];
      }
    }
  }

  SystemParams p_;
  const FockBasis& basis_;
  double wf_;
  std::size_t dim_[2]{};
  Eigen::VectorXd h0_[2], gam_a_[2], gam_b_[2], gam_bd_[2];
  SparseC S_[2], U_[2], Ud_[2];
  std::vector<std::pair<long, double>> ga_[2], gb_[2], gbd_[2];
  Csr csr_[2];
  std::vector<std::complex<double>> val_, kd_;
  Eigen::MatrixXcd X_, herm_[2];
};

}  // namespace detail

// Integrates the truncated master equation under kappa(t), restarting at
// every schedule edge, and checks the density-matrix invariants at each
// sample (trace, hermiticity, optional positivity, truncation tail).
inline FockTrajectory evolve_density(const SystemParams& params, const PulseSchedule& schedule,
                                     const DensityMatrix& rho0, const FockEvolveOptions& opt,
                                     const DensityObserver& observer = {}) {
  params.validate();
  require_stable(params);
  schedule.validate();
  if (!(opt.t_end >= 0.0)) throw ConfigError("t_end must be >= 0");
  const FockBasis basis(rho0.dims);
  if (rho0.data.rows() != static_cast<Eigen::Index>(basis.size()) ||
      rho0.data.cols() != rho0.data.rows())
    throw ConfigError("density matrix size does not match its dims");

  FockTrajectory out;
  out.dims = rho0.dims;
  if (opt.t_end == 0.0) return out;

  detail::BlockedLiouvillian L(params, basis);
  std::vector<double> y(L.real_size(), 0.0);
  L.load(rho0.data, y);

  auto record = [&](double t, std::span<const double> yv) {
    const Eigen::MatrixXcd rho = L.lab_matrix(t, yv);
    FockSample s;
    s.t = t;
    s.moments = moments_from_rho(basis, rho);
    s.trace = rho.trace().real();
    s.hermiticity = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    double tail_a = 0.0, tail_b = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
      if (!basis.on_boundary(i)) continue;
      const double pop = rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
      const double tot = static_cast<double>(std::max<std::size_t>(basis.total(i), 1));
      tail_a += pop * static_cast<double>(basis.n(i)) / tot;
      tail_b += pop * static_cast<double>(basis.m(i)) / tot;
    }
    s.tail = tail_a + tail_b;
    std::ostringstream where;
    where << " at t = " << t;
    if (std::abs(s.trace - 1.0) > 1e-8)
      throw NumericalError("density matrix trace drifted to " + std::to_string(s.trace) + where.str());
    if (s.hermiticity > 1e-10) throw NumericalError("density matrix lost hermiticity (" + std::to_string(s.hermiticity) + ", trace " + std::to_string(s.trace) + ")" + where.str());
    if (s.tail >= opt.tail_limit) {
      std::ostringstream os;
      os << "Fock cutoff unsafe: " << (tail_a >= tail_b ? "cavity" : "mechanical")
         << " mode holds population " << s.tail << " on the truncation boundary" << where.str()
         << "; increase the cutoff";
      throw PhysicsError(os.str());
    }
    if (opt.check_positivity) {
      double lo = std::numeric_limits<double>::infinity();
      for (int q = 0; q < 2; ++q) {
        const auto d = static_cast<Eigen::Index>(L.dim(q));
        if (d == 0) continue;
        const Eigen::MatrixXcd blk = L.view(yv, q);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(blk, Eigen::EigenvaluesOnly);
        lo = std::min(lo, es.eigenvalues().minCoeff());
      }
      s.min_eigenvalue = lo;
      if (lo < -1e-7) {
        std::ostringstream os;
        os << "density matrix lost positivity (min eigenvalue " << lo << ")" << where.str();
        throw NumericalError(os.str());
      }
    }
    out.samples.push_back(s);
    if (observer) observer(t, DensityMatrix{basis.dims(), rho});
  };

  const auto grid = sample_grid(opt.t_end, opt.sample_dt, schedule.edges());
  const auto breaks = segment_breakpoints(schedule, opt.t_end);
  record(0.0, y);
  DormandPrince54 stepper(y.size(), opt.tol);
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k], b = breaks[k + 1];
    const double kappa = schedule.kappa_at(a);
    auto rhs = [&](double t, std::span<const double> yv, std::span<double> dy) { L(t, kappa, yv, dy); };
    auto first = std::upper_bound(grid.begin(), grid.end(), a);
    auto last = std::upper_bound(grid.begin(), grid.end(), b + 1e-12);
    std::span<const double> outs(&*first, static_cast<std::size_t>(last - first));
    stepper.integrate(rhs, a, b, std::span<double>(y), outs, record);
  }
  out.stats = stepper.stats();
  return out;
}

// CSV of diagonal populations, one row per sample: t followed by p(n, m) for
// every basis state in basis order.
inline void write_population_csv(std::ostream& os, const FockBasis& basis,
                                 const std::vector<std::pair<double, Eigen::VectorXd>>& rows) {
  os << "t";
  for (std::size_t i = 0; i < basis.size(); ++i) os << ",p_" << basis.n(i) << "_" << basis.m(i);
  os << '\n';
  char buf[64];
  for (const auto& [t, pop] : rows) {
    std::snprintf(buf, sizeof buf, "%.12g", t);
    os << buf;
    for (Eigen::Index i = 0; i < pop.size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.12g", pop(i));
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace dyncool
