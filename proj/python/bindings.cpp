#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <vector>

#include "triplenc/checks.hpp"
#include "triplenc/corpus.hpp"
#include "triplenc/error.hpp"
#include "triplenc/eval.hpp"
#include "triplenc/inference.hpp"
#include "triplenc/store.hpp"
#include "triplenc/targets.hpp"
#include "triplenc/trainer.hpp"

namespace py = pybind11;
using namespace triplenc;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Vector to_vector(const FloatArray& a) {
    if (a.ndim() != 1) {
        throw py::value_error("expected a 1-d array");
    }
    return {a.data(), a.data() + a.size()};
}

std::vector<Vector> to_rows(const FloatArray& a) {
    if (a.ndim() != 2) {
        throw py::value_error("expected a 2-d array");
    }
    std::vector<Vector> rows;
    const auto cols = static_cast<std::size_t>(a.shape(1));
    for (py::ssize_t r = 0; r < a.shape(0); ++r) {
        const float* p = a.data(r, 0);
        rows.emplace_back(p, p + cols);
    }
    return rows;
}

Matrix to_matrix(const FloatArray& a) {
    if (a.ndim() != 2) {
        throw py::value_error("expected a 2-d array");
    }
    return {static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
            std::vector<float>(a.data(), a.data() + a.size())};
}

py::array_t<float> to_array(std::span<const float> v) {
    py::array_t<float> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::array_t<double> to_array(const std::vector<double>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

template <class E>
E parse_enum(std::optional<E> parsed, const std::string& text, const char* what) {
    if (!parsed) {
        throw py::value_error(std::string("unknown ") + what + ": " + text);
    }
    return *parsed;
}

py::dict seq_result(const SeqEvalResult& r) {
    py::list depths;
    for (const auto& d : r.depths) {
        py::dict row;
        row["depth"] = d.depth;
        row["avg_rank"] = d.avg_rank;
        row["avg_norm_rank"] = d.avg_norm_rank;
        row["n_items"] = d.n_items;
        row["pool_size"] = d.pool_size;
        depths.append(row);
    }
    py::dict out;
    out["avg_rank"] = r.avg_rank;
    out["avg_norm_rank"] = r.avg_norm_rank;
    out["n_items"] = r.items.size();
    out["pairs_scored"] = r.pairs_scored;
    out["depths"] = depths;
    return out;
}

py::dict check_dict(const checks::CheckResult& r) {
    py::dict d;
    d["name"] = r.name;
    d["passed"] = r.passed;
    d["detail"] = r.detail;
    d["seconds"] = r.seconds;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Triple-encoder scoring engine";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<EmptyDialog>(m, "EmptyDialog", base.ptr());
    py::register_exception<BadMagic>(m, "BadMagic", base.ptr());
    py::register_exception<ManifestMismatch>(m, "ManifestMismatch", base.ptr());
    py::register_exception<InvalidConfig>(m, "InvalidConfig", base.ptr());
    py::register_exception<EmptyCorpus>(m, "EmptyCorpus", base.ptr());
    py::register_exception<InsufficientContext>(m, "InsufficientContext", base.ptr());
    py::register_exception<DimMismatch>(m, "DimMismatch", base.ptr());
    py::register_exception<ZeroNorm>(m, "ZeroNorm", base.ptr());
    py::register_exception<OutOfWindow>(m, "OutOfWindow", base.ptr());
    py::register_exception<OrderViolation>(m, "OrderViolation", base.ptr());

    m.def("ccl_target", &ccl_target, py::arg("i"), py::arg("k"), py::arg("w"));
    m.def("c3l_target", &c3l_target, py::arg("i"), py::arg("j"), py::arg("k"), py::arg("w"));
    m.def(
        "cosine",
        [](const FloatArray& u, const FloatArray& v) { return cosine(to_vector(u), to_vector(v)); },
        py::arg("u"), py::arg("v"));
    m.def(
        "mean_pool",
        [](const FloatArray& u, const FloatArray& v) {
            return to_array(mean_pool(to_vector(u), to_vector(v)));
        },
        py::arg("u"), py::arg("v"));

    py::class_<Corpus>(m, "Corpus")
        .def(py::init<>())
        .def("add_dialog",
             [](Corpus& c, const std::vector<std::string>& d) { c.add_dialog(d); })
        .def_property_readonly("vocab", &Corpus::vocab)
        .def_property_readonly("dialogs",
                               [](const Corpus& c) {
                                   std::vector<std::vector<std::string>> out;
                                   for (const auto& d : c.dialogs()) {
                                       auto& row = out.emplace_back();
                                       for (auto id : d) {
                                           row.push_back(c.text(id));
                                       }
                                   }
                                   return out;
                               })
        .def("__len__", &Corpus::size);
    m.def("load_corpus", &load_corpus, py::arg("path"));
    m.def("save_corpus", &save_corpus, py::arg("path"), py::arg("corpus"));
    m.def(
        "gen_synthetic_corpus",
        [](const std::string& structure, std::size_t vocab_size, std::size_t dialog_count,
           std::size_t dialog_len, std::uint64_t seed) {
            SyntheticCorpusConfig cfg;
            cfg.structure = parse_enum(parse_structure(structure), structure, "structure");
            cfg.vocab_size = vocab_size;
            cfg.dialog_count = dialog_count;
            cfg.dialog_len = dialog_len;
            cfg.seed = seed;
            return gen_synthetic_corpus(cfg);
        },
        py::arg("structure") = "markov", py::arg("vocab_size") = 20,
        py::arg("dialog_count") = 500, py::arg("dialog_len") = 6, py::arg("seed") = 0);

    py::class_<EncoderParams>(m, "EncoderParams")
        .def_property_readonly("dim", &EncoderParams::dim)
        .def_property_readonly("vocab", &EncoderParams::vocab)
        .def_property_readonly("parity_enabled", &EncoderParams::parity_enabled)
        .def("slots",
             [](const EncoderParams& p) {
                 std::vector<std::pair<std::string, std::string>> out;
                 for (const auto& s : p.slots()) {
                     out.emplace_back(name(s.space), name(s.parity));
                 }
                 return out;
             })
        .def(
            "encode",
            [](const EncoderParams& p, const std::string& space, const std::string& utterance,
               int distance) {
                const auto s = parse_enum(parse_subspace(space), space, "subspace");
                return to_array(p.encode(s, p.require(utterance), distance));
            },
            py::arg("space"), py::arg("utterance"), py::arg("distance") = 1)
        .def("__eq__", [](const EncoderParams& a, const EncoderParams& b) { return a == b; });
    m.def("load_store", &load_store, py::arg("path"));
    m.def("save_store", &save_store, py::arg("path"), py::arg("params"));

    m.def(
        "train",
        [](const Corpus& corpus, const std::string& stage, std::size_t dim, int w, double lr,
           std::size_t epochs, std::size_t pretrain_epochs, std::size_t batch_size,
           std::uint64_t seed, bool parity, bool hard_positive, const std::string& optimizer,
           const Corpus* validation) {
            TrainConfig cfg;
            cfg.stage = parse_enum(parse_stage(stage), stage, "stage");
            cfg.dim = dim;
            cfg.w = w;
            cfg.learning_rate = lr;
            cfg.epochs = epochs;
            cfg.pretrain_epochs = pretrain_epochs;
            cfg.batch_size = batch_size;
            cfg.seed = seed;
            cfg.parity = parity;
            cfg.target_mode = hard_positive ? TargetMode::HardPositive : TargetMode::Curved;
            if (optimizer == "adam") {
                cfg.optimizer = Optimizer::Adam;
            } else if (optimizer != "sgd") {
                throw py::value_error("unknown optimizer: " + optimizer);
            }
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(corpus, cfg, validation);
            }
            return py::make_tuple(std::move(r.params), r.train_loss, r.validation_loss,
                                  r.best_epoch);
        },
        py::arg("corpus"), py::arg("stage") = "c3l", py::arg("dim") = 16, py::arg("w") = 5,
        py::arg("lr") = 0.05, py::arg("epochs") = 200, py::arg("pretrain_epochs") = 0,
        py::arg("batch_size") = 32, py::arg("seed") = 0, py::arg("parity") = true,
        py::arg("hard_positive") = false, py::arg("optimizer") = "sgd",
        py::arg("validation") = nullptr);

    py::class_<CandidateSet, std::shared_ptr<CandidateSet>>(m, "CandidateSet")
        .def(py::init([](const FloatArray& after, std::vector<std::string> labels) {
                 return std::make_shared<CandidateSet>(to_matrix(after), std::move(labels));
             }),
             py::arg("after"), py::arg("labels"))
        .def("__len__", &CandidateSet::size)
        .def_property_readonly("labels", &CandidateSet::labels);

    py::class_<DialogState>(m, "DialogState")
        .def(py::init([](std::shared_ptr<CandidateSet> c, bool keep_pair_scores) {
                 return DialogState(std::move(c), {.parity = false,
                                                   .keep_pair_scores = keep_pair_scores});
             }),
             py::arg("candidates"), py::arg("keep_pair_scores") = false)
        .def(
            "push_utterance",
            [](DialogState& s, const FloatArray& b1, const FloatArray& b2) {
                s.push_utterance(to_vector(b1), to_vector(b2));
            },
            py::arg("b1"), py::arg("b2"))
        .def_property_readonly("turn", &DialogState::turn)
        .def_property_readonly("pairs_materialized", &DialogState::pairs_materialized)
        .def_property_readonly("last_new_pairs", &DialogState::last_new_pairs)
        .def("score_triple_avg", [](const DialogState& s) { return to_array(s.score_triple_avg()); })
        .def("score_last_l",
             [](const DialogState& s, std::size_t l) { return to_array(s.score_last_l(l)); })
        .def("score_maxsim", [](const DialogState& s) { return to_array(s.score_maxsim()); });

    m.def(
        "score_bi",
        [](const FloatArray& history, const CandidateSet& c) {
            return to_array(score_bi(to_rows(history), c));
        },
        py::arg("history"), py::arg("candidates"));
    m.def(
        "score_triple_full",
        [](const FloatArray& b1, const FloatArray& b2, const CandidateSet& c) {
            return to_array(score_triple_full(to_rows(b1), to_rows(b2), c));
        },
        py::arg("b1_history"), py::arg("b2_history"), py::arg("candidates"));
    m.def(
        "score_planning_triple",
        [](const FloatArray& cand, const FloatArray& ctx, const FloatArray& goal) {
            return score_planning_triple(to_vector(cand), to_rows(ctx), to_vector(goal));
        },
        py::arg("candidate_b2"), py::arg("context_b1"), py::arg("goal_a"));

    m.def("rank_true", [](const std::vector<double>& s, std::size_t t) { return rank_true(s, t); },
          py::arg("scores"), py::arg("true_index"));
    m.def("normalized_rank", &normalized_rank, py::arg("rank"), py::arg("pool_size"));
    m.def(
        "eval_sequence_modeling",
        [](const Corpus& test, const EncoderParams& params, const std::string& variant,
           std::size_t l, std::optional<int> max_distance) {
            SeqEvalConfig cfg;
            cfg.scorer.variant = parse_enum(parse_variant(variant), variant, "variant");
            cfg.scorer.l = l;
            cfg.scorer.max_distance = max_distance;
            SeqEvalResult r;
            {
                py::gil_scoped_release release;
                r = eval_sequence_modeling(test, params, cfg);
            }
            return seq_result(r);
        },
        py::arg("test"), py::arg("params"), py::arg("variant") = "triple-avg", py::arg("l") = 1,
        py::arg("max_distance") = std::nullopt);

    m.def(
        "run_bench",
        [](std::size_t turns, std::size_t candidates, std::size_t dim, std::uint64_t seed) {
            std::vector<py::dict> rows;
            for (const auto& r : run_bench(turns, candidates, dim, seed)) {
                py::dict d;
                d["turn"] = r.turn;
                d["relative_growth"] = r.relative_growth;
                d["total_states"] = r.total_states;
                d["push_seconds"] = r.push_seconds;
                rows.push_back(d);
            }
            return rows;
        },
        py::arg("turns"), py::arg("candidates") = 100, py::arg("dim") = 16, py::arg("seed") = 0);

    m.def(
        "run_oracle_suites",
        [](std::uint64_t seed) {
            std::vector<checks::CheckResult> results;
            {
                py::gil_scoped_release release;
                results = checks::run_oracle_suites(seed);
            }
            std::vector<py::dict> out;
            for (const auto& r : results) {
                out.push_back(check_dict(r));
            }
            return out;
        },
        py::arg("seed") = 0);
}
