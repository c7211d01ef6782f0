#include "srlab/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "srlab/errors.hpp"

namespace srlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mse_at(const Expr& e, const Dataset& data, std::span<const double> c) {
  double acc = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    double yhat = evaluate(e, data.row(i), c);
    if (!std::isfinite(yhat)) return kInf;
    double r = yhat - data.targets[i];
    acc += r * r;
  }
  return acc / double(data.rows());
}

// central differences, step scaled per coordinate; non-finite -> empty
bool gradient_at(const Expr& e, const Dataset& data, std::vector<double>& c,
                 double fd_scale, std::vector<double>& g) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    double h = fd_scale * std::max(1.0, std::fabs(c[i]));
    double saved = c[i];
    c[i] = saved + h;
    double fp = mse_at(e, data, c);
    c[i] = saved - h;
    double fm = mse_at(e, data, c);
    c[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) return false;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return true;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

struct StartOutcome {
  std::vector<double> constants;
  double loss = kInf;
  bool converged = false;
};

// BFGS on the inverse Hessian with Armijo backtracking. Every accepted step
// decreases the loss, so the outcome never falls behind its starting point.
StartOutcome minimize_from(const Expr& e, const Dataset& data,
                           std::vector<double> c, const FitConfig& cfg) {
  const std::size_t m = c.size();
  StartOutcome out;
  double f = mse_at(e, data, c);
  if (!std::isfinite(f)) return out;  // dead start

  std::vector<double> g(m), g_next(m), p(m), c_next(m), s(m), y(m);
  if (!gradient_at(e, data, c, cfg.fd_scale, g)) {
    out.constants = std::move(c);
    out.loss = f;
    return out;
  }

  // inverse Hessian estimate, dense; constant counts are tiny (<= 6)
  std::vector<double> H(m * m, 0.0);
  auto reset_h = [&] {
    std::fill(H.begin(), H.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) H[i * m + i] = 1.0;
  };
  reset_h();

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (norm2(g) <= cfg.grad_tol) {
      out.converged = true;
      break;
    }
    // p = -H g
    double gp = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += H[i * m + j] * g[j];
      p[i] = -acc;
    }
    for (std::size_t i = 0; i < m; ++i) gp += g[i] * p[i];
    if (gp >= 0.0) {  // stale curvature; fall back to steepest descent
      reset_h();
      for (std::size_t i = 0; i < m; ++i) p[i] = -g[i];
      gp = -norm2(g) * norm2(g);
    }

    double t = 1.0;
    double f_next = kInf;
    bool stepped = false;
    for (int half = 0; half < 40; ++half) {
      for (std::size_t i = 0; i < m; ++i) c_next[i] = c[i] + t * p[i];
      f_next = mse_at(e, data, c_next);
      if (std::isfinite(f_next) && f_next <= f + 1e-4 * t * gp) {
        stepped = true;
        break;
      }
      t *= 0.5;
    }
    if (!stepped) break;  // no acceptable step along p

    if (!gradient_at(e, data, c_next, cfg.fd_scale, g_next)) {
      c = std::move(c_next);
      f = f_next;
      break;  // landed somewhere the gradient is not finite; keep the point
    }

    double sy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      s[i] = c_next[i] - c[i];
      y[i] = g_next[i] - g[i];
      sy += s[i] * y[i];
    }
    if (sy > 1e-12) {
      // H <- (I - r s y^T) H (I - r y s^T) + r s s^T,   r = 1/sy
      double r = 1.0 / sy;
      std::vector<double> Hy(m, 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) Hy[i] += H[i * m + j] * y[j];
      double yHy = 0.0;
      for (std::size_t i = 0; i < m; ++i) yHy += y[i] * Hy[i];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
          H[i * m + j] += -r * (Hy[i] * s[j] + s[i] * Hy[j]) +
                          r * r * yHy * s[i] * s[j] + r * s[i] * s[j];
    } else {
      reset_h();
    }
    c = c_next;
    g = g_next;
    f = f_next;
    if (norm2(g) <= cfg.grad_tol) {
      out.converged = true;
      break;
    }
  }

  out.constants = std::move(c);
  out.loss = f;
  return out;
}

}  // namespace

FitResult fit_constants(const Expr& skeleton, const Dataset& data,
                        const FitConfig& cfg, Rng& rng) {
  const int m = skeleton.placeholder_count();
  FitResult result;
  if (m == 0) {
    double f = mse_at(skeleton, data, {});
    if (!std::isfinite(f))
      throw NonFiniteEverywhere("constant-free candidate never finite");
    result.loss = f;
    result.converged = true;
    return result;
  }

  double best_loss = kInf;
  bool any_finite = false;
  for (int start = 0; start < cfg.restarts; ++start) {
    std::vector<double> c0(std::size_t(m), 1.0);
    if (start > 0)
      for (double& v : c0) v = rng.uniform(cfg.start_lo, cfg.start_hi);
    StartOutcome o = minimize_from(skeleton, data, std::move(c0), cfg);
    ++result.restarts_used;
    if (!std::isfinite(o.loss)) continue;
    any_finite = true;
    if (o.loss < best_loss) {  // strict: ties keep the earlier start
      best_loss = o.loss;
      result.constants = std::move(o.constants);
      result.converged = o.converged;
    }
    if (best_loss <= 1e-16) break;  // exact fit; further starts are noise
  }
  if (!any_finite)
    throw NonFiniteEverywhere("all fit starts produced non-finite loss");
  result.loss = best_loss;
  return result;
}

FitResult fit_constants(const TokenSeq& seq, const Dataset& data,
                        const FitConfig& cfg, Rng& rng) {
  return fit_constants(deserialize(seq), data, cfg, rng);
}

double r2(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size())
    throw std::invalid_argument("r2 needs aligned vectors");
  const std::size_t n = y.size();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= double(n);
  double ss_tot = 0.0, ss_res = 0.0;
  bool finite = true;
  for (std::size_t i = 0; i < n; ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    if (!std::isfinite(yhat[i])) finite = false;
    double r = y[i] - yhat[i];
    ss_res += r * r;
  }
  if (ss_tot == 0.0) throw DegenerateTarget("targets have zero variance");
  if (!finite) return -kInf;
  return 1.0 - ss_res / ss_tot;
}

double r2_or_worst(std::span<const double> y, std::span<const double> yhat) {
  try {
    return r2(y, yhat);
  } catch (const DegenerateTarget&) {
    for (std::size_t i = 0; i < y.size(); ++i)
      if (!(yhat[i] == y[i])) return -kInf;  // NaN compares false: worst
    return 1.0;
  }
}

double nmse(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size())
    throw std::invalid_argument("nmse needs aligned vectors");
  const std::size_t n = y.size();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= double(n);
  double var = 0.0, mse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    var += (y[i] - mean) * (y[i] - mean);
    double r = y[i] - yhat[i];
    mse += r * r;
  }
  var /= double(n);
  mse /= double(n);
  return mse / (var + 1e-9);
}

std::vector<double> predict(const Expr& e, const Dataset& data,
                            std::span<const double> constants) {
  std::vector<double> out(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i)
    out[i] = constants.empty() && !e.has_placeholder()
                 ? evaluate(e, data.row(i))
                 : evaluate(e, data.row(i), constants);
  return out;
}

}  // namespace srlab
