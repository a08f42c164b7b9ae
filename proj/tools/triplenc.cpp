// Command-line front end: synthetic data, training, evaluation, benchmarking and oracle checks.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "triplenc/checks.hpp"
#include "triplenc/corpus.hpp"
#include "triplenc/error.hpp"
#include "triplenc/eval.hpp"
#include "triplenc/inference.hpp"
#include "triplenc/store.hpp"
#include "triplenc/targets.hpp"
#include "triplenc/trainer.hpp"

namespace {

using namespace triplenc;

// Output goes to `path`, or standard output for "" and "-".
class Sink {
  public:
    explicit Sink(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) {
                throw IoError("cannot write " + path);
            }
        }
    }
    std::ostream& get() { return file_ ? *file_ : std::cout; }

  private:
    std::unique_ptr<std::ofstream> file_;
};

const std::map<std::string, Stage> kStages{{"ccl-pretrain", Stage::CclPretrain},
                                           {"c3l", Stage::C3l},
                                           {"c3l-from-scratch", Stage::C3lFromScratch}};
const std::map<std::string, TargetMode> kTargets{{"curved", TargetMode::Curved},
                                                 {"hard-positive", TargetMode::HardPositive}};
const std::map<std::string, Optimizer> kOptimizers{{"sgd", Optimizer::Sgd},
                                                   {"adam", Optimizer::Adam}};
const std::map<std::string, Variant> kVariants{{"bi", Variant::Bi},
                                               {"triple-avg", Variant::TripleAvg},
                                               {"triple-last-l", Variant::TripleLastL},
                                               {"maxsim", Variant::MaxSim}};
const std::map<std::string, Planner> kPlanners{{"bi", Planner::Bi}, {"triple", Planner::Triple}};
const std::map<std::string, CorpusStructure> kStructures{
    {"markov", CorpusStructure::Markov}, {"xor-cooccurrence", CorpusStructure::XorCooccurrence}};
const std::map<std::string, AdditivityMode> kModes{{"bi", AdditivityMode::Bi},
                                                   {"triple", AdditivityMode::Triple}};
const std::map<std::string, Subspace> kSpaces{{"B", Subspace::Before}, {"B2", Subspace::Before2}};

std::map<std::string, ComponentScorer> component_names() {
    std::map<std::string, ComponentScorer> m;
    for (auto c : {ComponentScorer::Triple, ComponentScorer::TriplePlusBiB2,
                   ComponentScorer::DirectNeighbors, ComponentScorer::BiB1PlusBiB2,
                   ComponentScorer::MeanB2Only, ComponentScorer::BiB2, ComponentScorer::MeanB1Only}) {
        m.emplace(std::string(name(c)), c);
    }
    return m;
}

struct GenSynthArgs {
    SyntheticCorpusConfig cfg;
    std::string out;
};

struct TrainArgs {
    TrainConfig cfg;
    std::string corpus;
    std::string out;
    std::string validation;
    std::string dump_examples;
    std::string loss_csv;
    bool no_parity = false;
};

struct EvalSeqArgs {
    std::string store;
    std::string corpus;
    SeqEvalConfig cfg;
    int max_distance = 0;
    std::string component;
    std::string bi_space;
    bool no_parity = false;
    std::string csv;
    std::string json;
};

struct EvalPlanArgs {
    std::string store;
    std::string corpus;
    PlanEvalConfig cfg;
    std::string candidates_file;
    std::string bi_space;
    std::string json;
};

struct AdditivityArgs {
    std::string store;
    std::string corpus;
    std::size_t context_len = 2;
    AdditivityMode mode = AdditivityMode::Triple;
    std::string bi_space;
    std::size_t samples = 20;
    std::uint64_t seed = 0;
    std::string csv;
};

struct BenchArgs {
    std::size_t turns = 5;
    std::size_t candidates = 100;
    std::size_t dim = 16;
    std::uint64_t seed = 0;
    std::size_t repeats = 1;
    bool parity = false;
    std::string csv;
};

struct VerifyArgs {
    std::uint64_t seed = 0;
    bool full = false;
};

int run_gen_synth(const GenSynthArgs& a) {
    const auto corpus = gen_synthetic_corpus(a.cfg);
    Sink sink(a.out);
    write_corpus(sink.get(), corpus);
    return 0;
}

int run_train(TrainArgs a) {
    a.cfg.parity = !a.no_parity;
    validate(a.cfg);
    const auto corpus = load_corpus(a.corpus);
    std::optional<Corpus> validation;
    if (!a.validation.empty()) {
        validation = load_corpus(a.validation);
    }
    if (!a.dump_examples.empty()) {
        std::vector<Example> examples;
        const bool pairs = a.cfg.stage != Stage::C3lFromScratch;
        const bool triples = a.cfg.stage != Stage::CclPretrain;
        if (pairs) {
            const auto p = build_pair_examples(corpus, a.cfg, 0);
            examples.insert(examples.end(), p.begin(), p.end());
        }
        if (triples) {
            const auto t = build_triple_examples(corpus, a.cfg, 0);
            examples.insert(examples.end(), t.begin(), t.end());
        }
        Sink sink(a.dump_examples);
        write_examples(sink.get(), examples);
    }
    const auto result = train(corpus, a.cfg, validation ? &*validation : nullptr);
    save_store(a.out, result.params);
    if (!a.loss_csv.empty()) {
        Sink sink(a.loss_csv);
        sink.get() << "epoch,train_loss" << (validation ? ",validation_loss" : "") << '\n';
        for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
            sink.get() << e + 1 << ',' << result.train_loss[e];
            if (validation) {
                sink.get() << ',' << result.validation_loss.at(e);
            }
            sink.get() << '\n';
        }
    }
    std::cerr << "trained " << name(a.cfg.stage) << " for " << result.train_loss.size()
              << " epochs; final loss " << result.train_loss.back();
    if (validation) {
        std::cerr << "; best validation epoch " << result.best_epoch;
    }
    std::cerr << '\n';
    return 0;
}

std::optional<Subspace> space_flag(const std::string& s) {
    if (s.empty()) {
        return std::nullopt;
    }
    return kSpaces.at(s);
}

int run_eval_seq(EvalSeqArgs a) {
    if (a.max_distance > 0) {
        a.cfg.scorer.max_distance = a.max_distance;
    }
    if (!a.component.empty()) {
        a.cfg.component = parse_component(a.component);
    }
    a.cfg.bi_space = space_flag(a.bi_space);
    a.cfg.scorer.parity_enabled = !a.no_parity;
    const auto params = load_store(a.store);
    const auto corpus = load_corpus(a.corpus);
    const auto result = eval_sequence_modeling(corpus, params, a.cfg);
    Sink csv(a.csv);
    write_depth_csv(csv.get(), result);
    if (!a.json.empty()) {
        Sink json(a.json);
        write_summary_json(json.get(), result, a.cfg);
    }
    return 0;
}

int run_eval_plan(EvalPlanArgs a) {
    a.cfg.bi_space = space_flag(a.bi_space);
    if (!a.candidates_file.empty()) {
        a.cfg.external_candidates = load_candidates_file(a.candidates_file);
    }
    const auto params = load_store(a.store);
    const auto corpus = load_corpus(a.corpus);
    const auto result = eval_planning(corpus, params, a.cfg);
    nlohmann::json hits = nlohmann::json::object();
    for (const auto& [k, h] : result.hits) {
        hits["hits@" + std::to_string(k)] = h;
    }
    const nlohmann::json j = {{"planner", std::string(name(a.cfg.planner))},
                              {"history_len", a.cfg.history_len},
                              {"goal_distance", a.cfg.goal_distance},
                              {"n_items", result.n_items},
                              {"n_skipped", result.n_skipped},
                              {"hits", hits}};
    Sink sink(a.json);
    sink.get() << j.dump(2) << '\n';
    return 0;
}

int run_additivity(const AdditivityArgs& a) {
    const auto params = load_store(a.store);
    const auto corpus = load_corpus(a.corpus);
    const auto rows = additivity_analysis(corpus, params, a.context_len, a.mode,
                                          space_flag(a.bi_space), a.samples, a.seed);
    Sink sink(a.csv);
    sink.get() << "position,correct,random,gap,n_items\n";
    for (const auto& r : rows) {
        sink.get() << r.position << ',' << r.correct << ',' << r.random << ',' << r.gap << ','
                   << r.n_items << '\n';
    }
    return 0;
}

int run_bench_cmd(const BenchArgs& a) {
    const auto rows = run_bench(a.turns, a.candidates, a.dim, a.seed, a.parity, a.repeats);
    Sink sink(a.csv);
    write_bench_csv(sink.get(), rows);
    return 0;
}

int run_verify(const VerifyArgs& a) {
    auto results = checks::run_oracle_suites(a.seed);
    if (a.full) {
        const auto runs = checks::run_xor_experiment({});
        results.push_back(checks::check_cooccurrence_separation(runs));
        results.push_back(checks::check_bi_transfer(runs));
        results.push_back(checks::check_additivity(runs));
    }
    bool ok = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS" : "FAIL") << "  " << r.name << "  (" << r.detail << ")\n";
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Triple-encoder sequence scoring: training, evaluation and oracle checks"};
    app.require_subcommand(1);

    GenSynthArgs gs;
    auto* gen = app.add_subcommand("gen-synth", "Write a synthetic corpus as JSONL");
    gen->add_option("--structure", gs.cfg.structure, "markov | xor-cooccurrence")
        ->transform(CLI::CheckedTransformer(kStructures, CLI::ignore_case));
    gen->add_option("--vocab", gs.cfg.vocab_size, "Vocabulary size");
    gen->add_option("--dialogs", gs.cfg.dialog_count, "Number of dialogs");
    gen->add_option("--len", gs.cfg.dialog_len, "Turns per dialog");
    gen->add_option("--seed", gs.cfg.seed, "Random seed");
    gen->add_option("-o,--out", gs.out, "Output file (default: stdout)");

    TrainArgs tr;
    auto* trn = app.add_subcommand("train", "Train lookup-table encoders and write a store");
    trn->add_option("--corpus", tr.corpus, "Training corpus (JSONL)")->required();
    trn->add_option("-o,--out", tr.out, "Output store directory")->required();
    trn->add_option("--stage", tr.cfg.stage, "ccl-pretrain | c3l | c3l-from-scratch")
        ->transform(CLI::CheckedTransformer(kStages, CLI::ignore_case));
    trn->add_option("--targets", tr.cfg.target_mode, "curved | hard-positive")
        ->transform(CLI::CheckedTransformer(kTargets, CLI::ignore_case));
    trn->add_option("--w", tr.cfg.w, "Training window size");
    trn->add_option("--dim", tr.cfg.dim, "Embedding dimension");
    trn->add_option("--seed", tr.cfg.seed, "Random seed");
    trn->add_option("--epochs", tr.cfg.epochs, "Epochs per phase");
    trn->add_option("--pretrain-epochs", tr.cfg.pretrain_epochs,
                    "Bi-encoder epochs before the triple phase (0: same as --epochs)");
    trn->add_option("--lr", tr.cfg.learning_rate, "Learning rate");
    trn->add_option("--batch", tr.cfg.batch_size, "Batch size");
    trn->add_option("--optimizer", tr.cfg.optimizer, "sgd | adam")
        ->transform(CLI::CheckedTransformer(kOptimizers, CLI::ignore_case));
    trn->add_flag("--no-parity", tr.no_parity, "Disable odd/even turn-distance tables");
    trn->add_flag("--bi-pos-triple-neg", tr.cfg.bi_pos_triple_neg,
                  "Triple phase uses pair positives with triple negatives");
    trn->add_option("--validation", tr.validation, "Validation corpus for model selection");
    trn->add_option("--dump-examples", tr.dump_examples, "Write epoch-0 examples as TSV");
    trn->add_option("--loss-csv", tr.loss_csv, "Write the per-epoch loss trace");

    EvalSeqArgs es;
    const auto components = component_names();
    auto* seq = app.add_subcommand("eval-seq", "Rank true next utterances per context depth");
    seq->add_option("--store", es.store, "Embedding store directory")->required();
    seq->add_option("--corpus", es.corpus, "Test corpus (JSONL)")->required();
    seq->add_option("--variant", es.cfg.scorer.variant, "bi | triple-avg | triple-last-l | maxsim")
        ->transform(CLI::CheckedTransformer(kVariants, CLI::ignore_case));
    seq->add_option("--l", es.cfg.scorer.l, "Rows kept by triple-last-l")->check(CLI::PositiveNumber);
    seq->add_option("--max-distance", es.max_distance,
                    "Drop pairs whose earlier element is this many turns away or more")
        ->check(CLI::PositiveNumber);
    seq->add_option("--component-scorer", es.component, "Component-analysis scorer")
        ->check(CLI::IsMember(components));
    seq->add_option("--bi-space", es.bi_space, "Before space for bi scoring (B or B2)")
        ->check(CLI::IsMember(kSpaces));
    seq->add_option("--min-depth", es.cfg.min_depth, "Smallest context length evaluated");
    seq->add_flag("--no-parity", es.no_parity, "Ignore parity tables at scoring time");
    seq->add_option("--csv", es.csv, "Per-depth CSV output (default: stdout)");
    seq->add_option("--json", es.json, "JSON summary output");

    EvalPlanArgs ep;
    auto* plan = app.add_subcommand("eval-plan", "Short-term planning Hits@k");
    plan->add_option("--store", ep.store, "Embedding store directory")->required();
    plan->add_option("--corpus", ep.corpus, "Test corpus (JSONL)")->required();
    plan->add_option("--history-len", ep.cfg.history_len, "Context turns before the candidate");
    plan->add_option("--goal-distance", ep.cfg.goal_distance, "Turns from candidate to goal");
    plan->add_option("--planner", ep.cfg.planner, "bi | triple")
        ->transform(CLI::CheckedTransformer(kPlanners, CLI::ignore_case));
    plan->add_option("--candidates-file", ep.candidates_file,
                     "JSONL {\"dialog\": index, \"candidates\": [...]} replacing synthetic distractors");
    plan->add_option("--distractors", ep.cfg.n_distractors, "Synthetic distractors per item");
    plan->add_option("--seed", ep.cfg.seed, "Distractor seed");
    plan->add_option("--bi-space", ep.bi_space, "Before space for the bi planner (B or B2)")
        ->check(CLI::IsMember(kSpaces));
    plan->add_option("--json", ep.json, "JSON output (default: stdout)");

    AdditivityArgs ad;
    auto* add = app.add_subcommand("analyze-additivity",
                                   "Correct-minus-random similarity per context position");
    add->add_option("--store", ad.store, "Embedding store directory")->required();
    add->add_option("--corpus", ad.corpus, "Test corpus (JSONL)")->required();
    add->add_option("--context-len", ad.context_len, "Context length analysed");
    add->add_option("--mode", ad.mode, "bi | triple")
        ->transform(CLI::CheckedTransformer(kModes, CLI::ignore_case));
    add->add_option("--bi-space", ad.bi_space, "Before space for bi mode (B or B2)")
        ->check(CLI::IsMember(kSpaces));
    add->add_option("--samples", ad.samples, "Random utterances per item");
    add->add_option("--seed", ad.seed, "Sampling seed");
    add->add_option("--csv", ad.csv, "CSV output (default: stdout)");

    BenchArgs bn;
    auto* bench = app.add_subcommand("bench", "Per-turn pair growth and push cost");
    bench->add_option("--turns", bn.turns, "Dialog length");
    bench->add_option("--candidates", bn.candidates, "Candidate set size");
    bench->add_option("--dim", bn.dim, "Embedding dimension");
    bench->add_option("--seed", bn.seed, "Random seed");
    bench->add_option("--repeats", bn.repeats, "Repetitions; the fastest time per turn is kept");
    bench->add_flag("--parity", bn.parity, "Keep both parity accumulators");
    bench->add_option("--csv", bn.csv, "CSV output (default: stdout)");

    VerifyArgs vf;
    auto* verify = app.add_subcommand("verify", "Run the oracle suites");
    verify->add_option("--seed", vf.seed, "Seed of the randomized oracles");
    verify->add_flag("--full", vf.full, "Also run the xor training experiments (minutes)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }

    try {
        if (*gen) {
            return run_gen_synth(gs);
        }
        if (*trn) {
            return run_train(tr);
        }
        if (*seq) {
            return run_eval_seq(es);
        }
        if (*plan) {
            return run_eval_plan(ep);
        }
        if (*add) {
            return run_additivity(ad);
        }
        if (*bench) {
            return run_bench_cmd(bn);
        }
        if (*verify) {
            return run_verify(vf);
        }
    } catch (const triplenc::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
