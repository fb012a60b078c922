#pragma once

#include "dctmpc/conic.hpp"

namespace dctmpc::conic::detail {

// Cone layout used by the solver: [nonneg (nonlinear rows first) | SOC blocks | PSD blocks (svec)].
struct Layout {
  int nonneg = 0;
  std::vector<int> q;
  std::vector<int> s;
  std::vector<int> q_off, s_off;
  int size = 0;
  int degree = 0;

  Layout() = default;
  Layout(int nonneg_rows, const std::vector<int>& q, const std::vector<int>& s);
};

int svec_size(int p);
Vec svec(const Mat& M);
Mat smat(const Eigen::Ref<const Vec>& v, int p);

Vec identity(const Layout& L);
// Jordan product u o v.
Vec jprod(const Layout& L, const Vec& u, const Vec& v);
// Solves lambda o x = r for lambda in the interior (PSD blocks of lambda diagonal).
Vec jdiv(const Layout& L, const Vec& lambda, const Vec& r);
// Largest step a with lambda + a d in the cone (PSD blocks of lambda diagonal); +inf if unbounded.
double max_step(const Layout& L, const Vec& lambda, const Vec& d);
// Smallest "eigenvalue" per block, minimised over blocks.
double min_eig(const Layout& L, const Vec& u);
// Adds t*e to every block whose minimum eigenvalue is below floor so that it becomes >= floor.
void shift_into(const Layout& L, Vec& u, double floor);

struct SocScale {
  double beta;
  Vec v;
};

struct PsdScale {
  Mat R, Rinv;
};

// Nesterov-Todd scaling W with W z = W^{-T} s = lambda.
struct Scaling {
  Vec d;  // nonneg: W = diag(d)
  std::vector<SocScale> soc;
  std::vector<PsdScale> psd;
  Vec lambda;
};

bool compute_scaling(const Layout& L, const Vec& s, const Vec& z, Scaling& W);

enum class Op { W, Wt, Winv, Wit };
Vec apply(const Layout& L, const Scaling& W, Op op, const Vec& u);
// Dense matrix of W^{-T} restricted to an SOC or PSD block.
Mat soc_wit(const SocScale& sc, int q);
Mat psd_wit(const PsdScale& sc, int p);

}  // namespace dctmpc::conic::detail
