// Python face of the laboratory: token lists in, plain dicts and lists out.
// Expressions travel as prefix token texts with constants out-of-band, the
// same shapes the JSONL artifacts use.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "srlab/audit.hpp"
#include "srlab/datagen.hpp"
#include "srlab/decoding.hpp"
#include "srlab/fitting.hpp"
#include "srlab/gvs.hpp"
#include "srlab/policy.hpp"
#include "srlab/serialization.hpp"
#include "srlab/theory.hpp"

namespace py = pybind11;
using namespace srlab;

namespace {

using Rows = std::vector<std::vector<double>>;

Dataset make_dataset(const Rows& xs, const std::vector<double>& y) {
  if (xs.empty() || xs.size() != y.size())
    throw std::invalid_argument("xs and y must be non-empty and aligned");
  Dataset d;
  d.dim = int(xs[0].size());
  d.targets = y;
  d.xs.reserve(xs.size() * xs[0].size());
  for (const std::vector<double>& row : xs) {
    if (int(row.size()) != d.dim)
      throw std::invalid_argument("xs rows must share one width");
    d.xs.insert(d.xs.end(), row.begin(), row.end());
  }
  return d;
}

Vocabulary make_vocab(const std::string& name, int dim) {
  Vocabulary v;
  if (name == "full") {
    v = Vocabulary::full();
  } else if (name == "simplified") {
    v = Vocabulary::simplified();
  } else {
    throw std::invalid_argument("vocab must be 'full' or 'simplified'");
  }
  if (dim > 0) v.dim = dim;
  return v;
}

py::object json_to_py(const Json& j) {
  switch (j.type()) {
    case Json::value_t::null:
      return py::none();
    case Json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case Json::value_t::number_integer:
      return py::int_(j.get<std::int64_t>());
    case Json::value_t::number_unsigned:
      return py::int_(j.get<std::uint64_t>());
    case Json::value_t::number_float:
      return py::float_(j.get<double>());
    case Json::value_t::string:
      return py::str(j.get<std::string>());
    case Json::value_t::array: {
      py::list out;
      for (const Json& item : j) out.append(json_to_py(item));
      return out;
    }
    case Json::value_t::object: {
      py::dict out;
      for (auto it = j.begin(); it != j.end(); ++it)
        out[py::str(it.key())] = json_to_py(it.value());
      return out;
    }
    default:
      throw std::invalid_argument("unsupported json value");
  }
}

py::dict prediction_to_dict(const Prediction& p) {
  return py::dict(json_to_py(prediction_to_json(p)));
}

MctsConfig make_mcts(int rollouts, int k_max, int beam_size, double c_puct,
                     double lambda, int max_len, int simulation_budget) {
  MctsConfig mc;
  mc.rollouts = rollouts;
  mc.k_max = k_max;
  mc.beam_size = beam_size;
  mc.c_puct = c_puct;
  mc.lambda = lambda;
  mc.max_len = max_len;
  mc.simulation_budget = simulation_budget;
  return mc;
}

}  // namespace

PYBIND11_MODULE(_srlab, m) {
  m.doc() =
      "symbolic-regression laboratory: expression sampling, memory policies, "
      "decoding strategies and their audits";

  m.def("version", [] { return std::string(kSrlabVersion); });

  // --- expression tools --------------------------------------------------------
  m.def(
      "deficit",
      [](const std::vector<std::string>& tokens) {
        return prefix_deficit(tokens_from_texts(tokens));
      },
      py::arg("tokens"),
      "arity deficit of a prefix serialization (0 means complete)");

  m.def(
      "is_complete",
      [](const std::vector<std::string>& tokens) {
        return is_complete_serialization(tokens_from_texts(tokens));
      },
      py::arg("tokens"));

  m.def(
      "evaluate",
      [](const std::vector<std::string>& tokens,
         const std::vector<double>& constants, const Rows& xs) {
        Expr e = deserialize(tokens_from_texts(tokens), constants);
        std::vector<double> y(xs.size(), 0.0);
        Dataset d = make_dataset(xs, y);
        return predict(e, d);
      },
      py::arg("tokens"), py::arg("constants"), py::arg("xs"),
      "evaluate the expression on every row of xs");

  m.def(
      "strip_template",
      [](const std::vector<std::string>& tokens) {
        Expr t = strip_constants(deserialize(tokens_from_texts(tokens)));
        return texts_from_tokens(serialize(t));
      },
      py::arg("tokens"), "drop injected constants, keeping the template");

  m.def(
      "template_key",
      [](const std::vector<std::string>& tokens, bool commutative) {
        return canonical_key(deserialize(tokens_from_texts(tokens)),
                             commutative ? KeyMode::Commutative
                                         : KeyMode::Strict);
      },
      py::arg("tokens"), py::arg("commutative") = false,
      "template identity of an expression (constants stripped)");

  // --- sampling and fitting -----------------------------------------------------
  m.def(
      "sample_corpus",
      [](int count, std::uint64_t seed, const std::string& vocab, int dim) {
        GenConfig cfg;
        cfg.vocab = make_vocab(vocab, dim);
        Rng rng(seed);
        Corpus corpus = build_corpus(cfg, count, rng);
        std::vector<std::vector<std::string>> out;
        out.reserve(corpus.size());
        for (const Expr& t : corpus.templates())
          out.push_back(texts_from_tokens(serialize(t)));
        return out;
      },
      py::arg("count"), py::arg("seed") = 0, py::arg("vocab") = "full",
      py::arg("dim") = 0, "draw a deduplicated template corpus");

  m.def(
      "fit",
      [](const std::vector<std::string>& tokens, const Rows& xs,
         const std::vector<double>& y, std::uint64_t seed, int restarts,
         int max_iters) {
        Dataset d = make_dataset(xs, y);
        FitConfig cfg;
        cfg.restarts = restarts;
        cfg.max_iters = max_iters;
        Rng rng(seed);
        FitResult fr = fit_constants(tokens_from_texts(tokens), d, cfg, rng);
        Expr e = deserialize(tokens_from_texts(tokens));
        py::dict out;
        out["constants"] = fr.constants;
        out["loss"] = fr.loss;
        out["r2"] = r2_or_worst(d.targets, predict(e, d, fr.constants));
        return out;
      },
      py::arg("tokens"), py::arg("xs"), py::arg("y"), py::arg("seed") = 0,
      py::arg("restarts") = 10, py::arg("max_iters") = 100,
      "fit the C placeholders of a serialized expression to data");

  m.def(
      "is_reproduction",
      [](const std::vector<std::string>& tokens,
         const std::vector<std::vector<std::string>>& corpus,
         bool with_constants, bool commutative) {
        std::vector<Expr> templates;
        templates.reserve(corpus.size());
        for (const std::vector<std::string>& t : corpus)
          templates.push_back(deserialize(tokens_from_texts(t)));
        Corpus c(std::move(templates));
        return is_reproduction(
            deserialize(tokens_from_texts(tokens)), c,
            with_constants ? ReproductionMode::WithConstants
                           : ReproductionMode::Template,
            commutative ? KeyMode::Commutative : KeyMode::Strict);
      },
      py::arg("tokens"), py::arg("corpus"), py::arg("with_constants") = false,
      py::arg("commutative") = false,
      "whether the expression's identity already exists in the corpus");

  // --- memory policy and decoders -------------------------------------------------
  py::class_<MemoryPolicy>(m, "MemoryPolicy",
                           "trie over template serializations; alpha > 0 "
                           "smooths mass onto unseen continuations")
      .def(py::init([](const std::vector<std::vector<std::string>>& templates,
                       double alpha, const std::string& vocab, int dim,
                       bool dataset_aware) {
             std::vector<TokenSeq> seqs;
             seqs.reserve(templates.size());
             for (const std::vector<std::string>& t : templates)
               seqs.push_back(tokens_from_texts(t));
             return MemoryPolicy(make_vocab(vocab, dim), std::move(seqs),
                                 alpha, dataset_aware);
           }),
           py::arg("templates"), py::arg("alpha") = 0.0,
           py::arg("vocab") = "full", py::arg("dim") = 0,
           py::arg("dataset_aware") = true)
      .def_property_readonly("alpha", &MemoryPolicy::alpha)
      .def_property_readonly("template_count", &MemoryPolicy::template_count)
      .def(
          "next_token_dist",
          [](const MemoryPolicy& p, const std::vector<std::string>& prefix,
             const std::optional<Rows>& xs,
             const std::optional<std::vector<double>>& y) {
            std::optional<Dataset> d;
            if (xs && y) d = make_dataset(*xs, *y);
            auto dist = p.next_token_dist(tokens_from_texts(prefix),
                                          d ? &*d : nullptr);
            py::list out;
            for (const TokenProb& tp : dist)
              out.append(py::make_tuple(token_text(tp.token), tp.prob));
            return out;
          },
          py::arg("prefix"), py::arg("xs") = std::nullopt,
          py::arg("y") = std::nullopt,
          "(token, probability) pairs legal after the prefix")
      .def(
          "beam",
          [](const MemoryPolicy& p, const Rows& xs,
             const std::vector<double>& y, int beam_size, int max_len,
             std::uint64_t seed) {
            Dataset d = make_dataset(xs, y);
            BeamConfig cfg;
            cfg.beam_size = beam_size;
            cfg.max_len = max_len;
            Rng rng(seed);
            return prediction_to_dict(beam_decode(p, d, cfg, rng));
          },
          py::arg("xs"), py::arg("y"), py::arg("beam_size") = 5,
          py::arg("max_len") = 60, py::arg("seed") = 0)
      .def(
          "mcts",
          [](const MemoryPolicy& p, const Rows& xs,
             const std::vector<double>& y, int rollouts, int k_max,
             int beam_size, double c_puct, double lambda, int max_len,
             int simulation_budget, std::uint64_t seed) {
            Dataset d = make_dataset(xs, y);
            Rng rng(seed);
            return prediction_to_dict(
                mcts_decode(p, d,
                            make_mcts(rollouts, k_max, beam_size, c_puct,
                                      lambda, max_len, simulation_budget),
                            rng));
          },
          py::arg("xs"), py::arg("y"), py::arg("rollouts") = 3,
          py::arg("k_max") = 3, py::arg("beam_size") = 1,
          py::arg("c_puct") = 1.0, py::arg("lambda") = 0.01,
          py::arg("max_len") = 60, py::arg("simulation_budget") = 0,
          py::arg("seed") = 0)
      .def(
          "gvs",
          [](const MemoryPolicy& p, const Rows& xs,
             const std::vector<double>& y, int iterations, int beam_size,
             int top_k, int rand_k, double z_thres, int l_max, int max_len,
             std::uint64_t seed, bool replay) {
            Dataset d = make_dataset(xs, y);
            GvsConfig cfg;
            cfg.iterations = iterations;
            cfg.top_k = top_k;
            cfg.rand_k = rand_k;
            cfg.z_thres = z_thres;
            cfg.l_max = l_max;
            cfg.sampler.vocab = p.vocabulary();
            cfg.beam.beam_size = beam_size;
            cfg.beam.max_len = max_len;
            Rng rng(seed);
            std::vector<GvsReplayRow> rows;
            Prediction pred =
                run_gvs(p, d, cfg, rng, replay ? &rows : nullptr);
            py::dict out = prediction_to_dict(pred);
            if (replay) {
              py::list log;
              for (const GvsReplayRow& row : rows)
                log.append(json_to_py(replay_row_to_json(row)));
              out["replay"] = log;
            }
            return out;
          },
          py::arg("xs"), py::arg("y"), py::arg("iterations") = 30,
          py::arg("beam_size") = 5, py::arg("top_k") = 39,
          py::arg("rand_k") = 9, py::arg("z_thres") = 0.213,
          py::arg("l_max") = 9, py::arg("max_len") = 60, py::arg("seed") = 0,
          py::arg("replay") = false);

  // --- executable theory ----------------------------------------------------------
  m.def(
      "check_reduction",
      [](const std::string& formula, std::uint64_t seed) {
        BoolFormula f = parse_formula(formula);
        Rng rng(seed);
        return json_to_py(reduction_verdict_to_json(f, check_reduction(f, rng)));
      },
      py::arg("formula"), py::arg("seed") = 0,
      "encode a boolean formula as a last-token instance and grade the "
      "solver's verdict");

  m.def(
      "pac_simulate",
      [](int universe, int per_round, int depth0, int targets, double beta,
         double delta, int trials, std::uint64_t seed) {
        PacConfig cfg;
        cfg.universe = universe;
        cfg.per_round = per_round;
        cfg.depth0 = depth0;
        cfg.targets = targets;
        cfg.beta = beta;
        cfg.delta = delta;
        cfg.trials = trials;
        cfg.seed = seed;
        return json_to_py(pac_stats_to_json(cfg, pac_simulate(cfg)));
      },
      py::arg("universe") = 100, py::arg("per_round") = 5,
      py::arg("depth0") = 3, py::arg("targets") = 8, py::arg("beta") = 0.3,
      py::arg("delta") = 0.1, py::arg("trials") = 10000, py::arg("seed") = 0,
      "Monte Carlo failure rate of the self-verification round scheme");
}
