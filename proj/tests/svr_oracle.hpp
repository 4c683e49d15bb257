#pragma once

// Brute-force dense QP oracle for the epsilon-insensitive regression dual:
// projected pairwise coordinate ascent on the 2n (alpha_hat, alpha)
// variables under the box and the single equality constraint. Test-only and
// independent of the library's SMO path.

#include "rulkit/svr.hpp"

#include <algorithm>
#include <cmath>

namespace svr_oracle {

struct OracleResult {
  rulkit::VecX beta;
  double bias = 0.0;
  double objective = 0.0;
};

inline OracleResult solve_oracle(const rulkit::svr::SvrTrainingSet& set,
                                 double C, double eps, double sigma) {
  using rulkit::MatX;
  using rulkit::VecX;
  const int n = set.size();
  MatX k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      k(i, j) = rulkit::svr::rbf_kernel(set.features[i], set.features[j],
                                        sigma);

  VecX hat = VecX::Zero(n), reg = VecX::Zero(n);
  VecX kb = VecX::Zero(n);  // K * (hat - reg)

  auto var = [&](int u) -> double& { return u < n ? hat[u] : reg[u - n]; };
  auto csign = [&](int u) { return u < n ? 1.0 : -1.0; };
  auto grad = [&](int u) {
    const int g = u < n ? u : u - n;
    return u < n ? set.targets[g] - eps - kb[g]
                 : -set.targets[g] - eps + kb[g];
  };

  for (int sweep = 0; sweep < 20000; ++sweep) {
    double best_gain = 0.0;
    for (int u = 0; u < 2 * n; ++u) {
      for (int v = u + 1; v < 2 * n; ++v) {
        const int gu = u < n ? u : u - n;
        const int gv = v < n ? v : v - n;
        const double du = csign(v), dv = -csign(u);
        const double su = u < n ? 1.0 : -1.0;
        const double sv = v < n ? 1.0 : -1.0;
        const double huu = -k(gu, gu);
        const double hvv = -k(gv, gv);
        const double huv = -su * sv * k(gu, gv);
        const double q = du * du * huu + 2.0 * du * dv * huv + dv * dv * hvv;
        const double slope = grad(u) * du + grad(v) * dv;

        double t;
        if (q < -1e-300) {
          t = -slope / q;
        } else {
          t = slope > 0.0 ? 1e300 : (slope < 0.0 ? -1e300 : 0.0);
        }
        auto clip = [&](double coord, double dir, double tt) {
          if (dir > 0.0) return std::min(tt, (C - coord) / dir);
          if (dir < 0.0) return std::min(tt, (0.0 - coord) / dir);
          return tt;
        };
        if (t > 0.0) {
          t = clip(var(u), du, t);
          t = clip(var(v), dv, t);
          t = std::max(t, 0.0);
        } else {
          t = -clip(var(u), -du, -t);
          t = -clip(var(v), -dv, -t);
          t = std::min(t, 0.0);
        }
        const double gain = t * slope + 0.5 * t * t * q;
        if (gain > 1e-15) {
          var(u) += t * du;
          var(v) += t * dv;
          kb += (su * t * du) * k.col(gu) + (sv * t * dv) * k.col(gv);
          best_gain = std::max(best_gain, gain);
        }
      }
    }
    if (best_gain < 1e-13) break;
  }

  OracleResult r;
  r.beta = hat - reg;
  r.objective = 0.0;
  for (int g = 0; g < n; ++g)
    r.objective += set.targets[g] * r.beta[g] - eps * (hat[g] + reg[g]) -
                   0.5 * r.beta[g] * kb[g];

  // bias: average of on-tube conditions over unbounded vectors, else the
  // midpoint of the feasible interval. Classified by the net coefficient:
  // at eps = 0 a sample may end with both split variables positive.
  double sum = 0.0;
  int count = 0;
  const double slack = 1e-9 * std::max(1.0, C);
  for (int g = 0; g < n; ++g) {
    if (r.beta[g] > slack && r.beta[g] < C - slack) {
      sum += set.targets[g] - kb[g] - eps;
      ++count;
    } else if (r.beta[g] < -slack && r.beta[g] > -C + slack) {
      sum += set.targets[g] - kb[g] + eps;
      ++count;
    }
  }
  if (count > 0) {
    r.bias = sum / count;
  } else {
    double lo = -1e300, hi = 1e300;
    for (int g = 0; g < n; ++g) {
      const double base = set.targets[g] - kb[g];
      if (std::abs(r.beta[g]) <= slack) {
        lo = std::max(lo, base - eps);
        hi = std::min(hi, base + eps);
      } else if (r.beta[g] >= C - slack) {
        hi = std::min(hi, base - eps);
      } else if (r.beta[g] <= -C + slack) {
        lo = std::max(lo, base + eps);
      }
    }
    r.bias = 0.5 * (lo + hi);
  }
  return r;
}

inline double oracle_predict(const OracleResult& o,
                             const rulkit::svr::SvrTrainingSet& set,
                             const rulkit::svr::WindowFeature& x,
                             double sigma) {
  double f = o.bias;
  for (int g = 0; g < set.size(); ++g)
    f += o.beta[g] * rulkit::svr::rbf_kernel(x, set.features[g], sigma);
  return f;
}

}  // namespace svr_oracle
