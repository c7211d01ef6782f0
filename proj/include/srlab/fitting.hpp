#pragma once

#include <span>
#include <vector>

#include "srlab/dataset.hpp"
#include "srlab/expr.hpp"
#include "srlab/rng.hpp"
#include "srlab/token.hpp"

namespace srlab {

struct FitConfig {
  int restarts = 10;       // start 0 is all-ones, the rest uniform draws
  int max_iters = 100;     // quasi-Newton iterations per start
  double grad_tol = 1e-8;  // stop when the gradient 2-norm falls below this
  double fd_scale = 1e-6;  // FD step is fd_scale * max(1, |c_i|) per coordinate
  double start_lo = -10.0; // random start interval
  double start_hi = 10.0;
};

struct FitResult {
  std::vector<double> constants;  // serialization order
  double loss = 0.0;              // MSE at the returned constants
  bool converged = false;         // gradient tolerance reached on the winner
  int restarts_used = 0;
};

// Fills a sequence's C slots by minimizing MSE against the dataset with a
// BFGS update and central finite differences, restarted from several points;
// the best final loss wins, ties broken by start index. Zero placeholders is
// a plain evaluation. Throws NonFiniteEverywhere when no start ever attains
// a finite loss, MalformedSequence on a bad sequence.
FitResult fit_constants(const TokenSeq& seq, const Dataset& data,
                        const FitConfig& cfg, Rng& rng);
FitResult fit_constants(const Expr& skeleton, const Dataset& data,
                        const FitConfig& cfg, Rng& rng);

// Coefficient of determination, 1 - SS_res/SS_tot; at most 1, any non-finite
// prediction makes it -inf. Throws DegenerateTarget when Var(y) == 0.
double r2(std::span<const double> y, std::span<const double> yhat);

// The ranking view of r2: DegenerateTarget becomes 1 when the fit is exact
// and -inf otherwise, so callers can always order candidates.
double r2_or_worst(std::span<const double> y, std::span<const double> yhat);

// MSE normalized by target variance with an epsilon guard:
//   nmse = mse / (var(y) + 1e-9)
double nmse(std::span<const double> y, std::span<const double> yhat);

// predictions of e (with constants resolved) over every dataset row
std::vector<double> predict(const Expr& e, const Dataset& data,
                            std::span<const double> constants = {});

}  // namespace srlab
