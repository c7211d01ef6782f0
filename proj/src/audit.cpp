#include "srlab/audit.hpp"

#include <stdexcept>
#include <utility>

#include "srlab/errors.hpp"
#include "srlab/fitting.hpp"

namespace srlab {

bool is_reproduction(const Expr& e, const Corpus& corpus,
                     ReproductionMode mode, KeyMode key_mode,
                     bool* strip_failed) {
  if (strip_failed != nullptr) *strip_failed = false;
  if (mode == ReproductionMode::WithConstants)
    return corpus.contains_structural(structural_key(e));

  Expr templ;
  try {
    templ = strip_constants(e);
  } catch (const IrreducibleConstant&) {
    if (strip_failed != nullptr) *strip_failed = true;
    return false;
  }
  const std::string key = canonical_key(templ, key_mode);
  return key_mode == KeyMode::Commutative
             ? corpus.contains_template_commutative(key)
             : corpus.contains_template(key);
}

std::vector<Expr> build_not_included(const GenConfig& cfg,
                                     const Corpus& corpus, int count, Rng& rng,
                                     long attempt_ceiling) {
  if (count < 0) throw std::invalid_argument("test-set size must be >= 0");
  if (attempt_ceiling < 0) attempt_ceiling = 200L * count + 1000;

  std::vector<Expr> out;
  out.reserve(std::size_t(count));
  long attempts = 0;
  while (int(out.size()) < count) {
    if (++attempts > attempt_ceiling)
      throw AttemptCeiling("could not find enough out-of-corpus expressions");
    Expr e = sample_expression(rng, cfg);
    // generator decorations always strip, so the template key is total here
    if (corpus.contains_template(canonical_key(strip_constants(e)))) continue;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Expr> build_baseline(const GenConfig& cfg, int count, Rng& rng) {
  if (count < 0) throw std::invalid_argument("test-set size must be >= 0");
  std::vector<Expr> out;
  out.reserve(std::size_t(count));
  for (int i = 0; i < count; ++i) out.push_back(sample_expression(rng, cfg));
  return out;
}

AuditReport audit_run(const std::vector<Prediction>& predictions,
                      const Corpus& corpus,
                      const std::vector<Dataset>& eval_data,
                      KeyMode key_mode) {
  if (predictions.size() != eval_data.size())
    throw LengthMismatch("each prediction needs its own evaluation dataset");

  AuditReport report;
  report.rows.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Prediction& pred = predictions[i];

    AuditRow row;
    row.novel_template =
        !is_reproduction(pred.expr, corpus, ReproductionMode::Template,
                         key_mode, &row.strip_failed);
    row.novel_with_constants = !is_reproduction(
        pred.expr, corpus, ReproductionMode::WithConstants, key_mode);
    row.r2_eval = r2_or_worst(eval_data[i].targets,
                              predict(pred.expr, eval_data[i], pred.constants));
    for (std::size_t t = 0; t < kAuditThresholds.size(); ++t)
      row.passes[t] = row.r2_eval > kAuditThresholds[t];
    report.rows.push_back(row);
  }

  if (report.rows.empty()) return report;

  const double scale = 100.0 / double(report.rows.size());
  std::array<long, 7> pass_counts{};
  long novel = 0, novel_wc = 0;
  long nov_acc = 0, nov_inacc = 0, rep_acc = 0, rep_inacc = 0;
  for (const AuditRow& row : report.rows) {
    for (std::size_t t = 0; t < row.passes.size(); ++t)
      if (row.passes[t]) ++pass_counts[t];
    if (row.novel_template) ++novel;
    if (row.novel_with_constants) ++novel_wc;
    const bool accurate = row.r2_eval > kAccurateR2;
    if (row.novel_template)
      ++(accurate ? nov_acc : nov_inacc);
    else
      ++(accurate ? rep_acc : rep_inacc);
  }
  for (std::size_t t = 0; t < pass_counts.size(); ++t)
    report.pass_pct[t] = scale * double(pass_counts[t]);
  report.novelty_pct = scale * double(novel);
  report.novelty_with_constants_pct = scale * double(novel_wc);
  report.novel_accurate_pct = scale * double(nov_acc);
  report.novel_inaccurate_pct = scale * double(nov_inacc);
  report.reproduced_accurate_pct = scale * double(rep_acc);
  report.reproduced_inaccurate_pct = scale * double(rep_inacc);
  return report;
}

}  // namespace srlab
