// Command-line front end for the authorship-validation pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
// Reports go to stdout; diagnostics and progress go to stderr.

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "authmail/authmail.hpp"

namespace fs = std::filesystem;
using namespace authmail;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read file: " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

/// Raw email file -> authored text, with the same cleaning the corpus gets.
std::string clean_text_from_file(const fs::path& path) {
    ParseResult parsed = parse_email(read_file(path), path.string());
    if (const auto* rej = std::get_if<Rejection>(&parsed))
        throw DataError(path.string() + ": unparseable email: " + rej->detail);
    CleanResult cleaned = clean_email(std::get<RawEmail>(parsed));
    if (const auto* rej = std::get_if<Rejection>(&cleaned))
        throw DataError(path.string() + ": rejected (" + std::string(to_string(rej->kind)) +
                        "): " + rej->detail + " — nothing authored to score");
    return std::get<CleanEmail>(cleaned).text();
}

std::vector<EmailRecord> select_by_ids(const std::vector<EmailRecord>& all,
                                       const std::vector<std::string>& ids) {
    std::unordered_map<std::string, const EmailRecord*> by_id;
    for (const auto& r : all) by_id.emplace(r.id, &r);
    std::vector<EmailRecord> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError("id '" + id + "' missing from manifest");
        out.push_back(*it->second);
    }
    return out;
}

std::vector<EmailRecord> side_records(const std::vector<EmailRecord>& all,
                                      const SplitAssignment& sa, const std::string& on) {
    if (on == "all") return all;
    if (on == "train") return select_by_ids(all, sa.train_ids);
    return select_by_ids(all, sa.test_ids);
}

enum class ModelKind { NB, CNN };

ModelKind sniff_model(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read model: " + path.string());
    char magic[4] = {};
    f.read(magic, 4);
    if (std::string_view(magic, 4) == std::string_view(nn::kCNNModelMagic, 4)) return ModelKind::CNN;
    if (std::string_view(magic, 4) == "AMNB") return ModelKind::NB;
    throw DataError(path.string() + ": not a recognized model file");
}

std::string format_verdict(const Verdict& v) {
    char buf[64];
    std::string line = "verdict=" + std::string(to_string(v.label)) + " rule=" + v.aggregation;
    if (v.cnn_score) {
        std::snprintf(buf, sizeof buf, " cnn_score=%.6f", *v.cnn_score);
        line += buf;
    }
    if (v.nb_label) line += " nb_label=" + std::to_string(*v.nb_label);
    return line;
}

struct GlobalOpts {
    std::uint64_t seed = kDefaultSeed;
    double split_ratio = kDefaultSplitRatio;
    std::string registry = "./profiles";
};

void parse_range(const std::string& text, std::uint64_t& lo, std::uint64_t& hi) {
    const auto colon = text.find(':');
    try {
        if (colon == std::string::npos) throw std::invalid_argument("no colon");
        lo = std::stoull(text.substr(0, colon));
        hi = std::stoull(text.substr(colon + 1));
    } catch (const std::exception&) {
        throw CLI::ValidationError("--range", "expected LO:HI, got '" + text + "'");
    }
    if (lo < 1 || hi < lo)
        throw CLI::ValidationError("--range", "need 1 <= LO <= HI, got '" + text + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Per-sender email authorship validation: corpus cleaning, dataset assembly,\n"
                 "Naive Bayes and character-CNN training, evaluation, and sender profiles."};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read option defaults from an INI-style file");

    GlobalOpts g;
    app.add_option("--seed", g.seed, "Seed for splits, weight init and training order")
        ->capture_default_str();
    app.add_option("--split-ratio", g.split_ratio, "Train fraction of the deterministic split")
        ->capture_default_str();
    app.add_option("--registry", g.registry, "Profile registry directory")
        ->capture_default_str();

    const std::vector<std::string> source_names{"authentic-1",      "authentic-2", "inauthentic-1",
                                                "inauthentic-2",    "inauthentic-3-bec",
                                                "external"};

    // ---- clean ------------------------------------------------------------
    auto* clean = app.add_subcommand("clean", "Clean a sender's sent folder into a manifest");
    clean->fallthrough();
    struct {
        std::string root, sender, range = "1:600", out, rejects, source = "authentic-1";
    } cl;
    clean->add_option("--root", cl.root, "Corpus root (maildir layout <root>/<sender>/sent/N.)")
        ->required();
    clean->add_option("--sender", cl.sender, "Sender folder name")->required();
    clean->add_option("--range", cl.range, "Inclusive file-number range LO:HI")
        ->capture_default_str();
    clean->add_option("--out", cl.out, "Output manifest (JSON Lines)")->required();
    clean->add_option("--rejects", cl.rejects, "Rejection report path (file_id TAB kind)");
    clean->add_option("--source", cl.source, "Source tag for the cleaned records")
        ->check(CLI::IsMember(source_names))
        ->capture_default_str();
    clean->callback([&] {
        std::uint64_t lo = 0, hi = 0;
        parse_range(cl.range, lo, hi);
        const Source src = *source_from_string(cl.source);
        const ScanResult scan = scan_sender_folder(cl.root, cl.sender, lo, hi);

        std::vector<EmailRecord> records;
        std::size_t rejected = 0;
        for (const auto& e : scan.entries) {
            if (const auto* ok = std::get_if<CleanEmail>(&e.result)) {
                if (ok->over_limit)
                    std::cerr << "warning: " << e.file_id << " cleaned length " << ok->char_len
                              << " exceeds " << kCharLenWarnLimit << " characters\n";
                EmailRecord r;
                r.id = e.file_id;
                r.text = ok->text();
                r.source = src;
                r.label = is_authentic_source(src) ? 1 : 0;
                records.push_back(std::move(r));
            } else {
                ++rejected;
            }
        }
        save_manifest(records, fs::path(cl.out));
        if (!cl.rejects.empty()) {
            std::ofstream rf(cl.rejects, std::ios::binary);
            if (!rf) throw DataError("cannot write rejection report: " + cl.rejects);
            write_rejection_report(scan.entries, rf);
        }
        std::cerr << "scanned " << scan.total_files << " files, " << scan.in_range
                  << " in range, " << scan.cleaned << " cleaned, " << rejected << " rejected\n";
    });

    // ---- build-dataset ----------------------------------------------------
    auto* build = app.add_subcommand("build-dataset", "Assemble manifests into a labeled dataset");
    build->fallthrough();
    struct {
        std::string recipe = "custom", out;
        std::vector<std::string> authentic, inauthentic;
    } bd;
    build->add_option("--recipe", bd.recipe, "Recipe name")
        ->check(CLI::IsMember({"dataset-1", "dataset-2", "dataset-3", "dataset-4", "custom"}))
        ->capture_default_str();
    build->add_option("--authentic", bd.authentic, "Manifest(s) of authentic records")
        ->expected(-1);
    build->add_option("--inauthentic", bd.inauthentic, "Manifest(s) of inauthentic records")
        ->expected(-1);
    build->add_option("--out", bd.out, "Output manifest")->required();
    build->callback([&] {
        if (bd.authentic.empty() && bd.inauthentic.empty())
            throw CLI::ValidationError("build-dataset",
                                       "need at least one --authentic or --inauthentic manifest");
        std::vector<EmailRecord> auth, inauth;
        for (const auto& p : bd.authentic) {
            auto part = load_manifest(fs::path(p));
            auth.insert(auth.end(), part.begin(), part.end());
        }
        for (const auto& p : bd.inauthentic) {
            auto part = load_manifest(fs::path(p));
            inauth.insert(inauth.end(), part.begin(), part.end());
        }
        const LabeledDataset ds = assemble(auth, inauth, *recipe_from_string(bd.recipe));
        save_manifest(ds.records, fs::path(bd.out));
        std::cerr << "wrote " << ds.records.size() << " records (" << auth.size()
                  << " authentic, " << inauth.size() << " inauthentic)\n";
    });

    // ---- train ------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Train a classifier on a manifest's train split");
    train->require_subcommand(1);
    train->fallthrough();

    auto* train_nb = train->add_subcommand("nb", "Multinomial Naive Bayes over word counts");
    train_nb->fallthrough();
    struct {
        std::string data, out;
        double alpha = 1.0;
    } tn;
    train_nb->add_option("--data", tn.data, "Dataset manifest")->required();
    train_nb->add_option("--out", tn.out, "Output model path")->required();
    train_nb->add_option("--alpha", tn.alpha, "Additive smoothing (0 = pure maximum likelihood)")
        ->capture_default_str();
    train_nb->callback([&] {
        LabeledDataset ds{load_manifest(fs::path(tn.data)), Recipe::Custom};
        const SplitAssignment sa = split(ds, g.split_ratio, g.seed);
        const auto records = select_by_ids(ds.records, sa.train_ids);
        const NBModel model = fit(records, tn.alpha);
        save_nb_model(model, fs::path(tn.out));
        std::cerr << "fit " << records.size() << " training emails, vocabulary "
                  << model.vocab.size() << ", alpha " << tn.alpha << '\n';
    });

    auto* train_cnn = train->add_subcommand("cnn", "Character-level CNN");
    train_cnn->fallthrough();
    struct {
        std::string data, out;
        nn::TrainConfig cfg;
    } tc;
    train_cnn->add_option("--data", tc.data, "Dataset manifest")->required();
    train_cnn->add_option("--out", tc.out, "Output model path")->required();
    train_cnn->add_option("--batch-size", tc.cfg.batch_size)->capture_default_str();
    train_cnn->add_option("--max-epochs", tc.cfg.max_epochs)->capture_default_str();
    train_cnn->add_option("--learning-rate", tc.cfg.learning_rate)->capture_default_str();
    train_cnn->add_option("--patience", tc.cfg.patience, "Early-stopping patience (epochs)")
        ->capture_default_str();
    train_cnn->add_option("--val-fraction", tc.cfg.val_fraction,
                          "Slice of the train split held out for early stopping")
        ->capture_default_str();
    train_cnn->callback([&] {
        LabeledDataset ds{load_manifest(fs::path(tc.data)), Recipe::Custom};
        const SplitAssignment sa = split(ds, g.split_ratio, g.seed);
        tc.cfg.seed = g.seed;
        auto model = nn::make_char_cnn<float>(nn::CharCNNHyper{}, derive_seed(g.seed, 0));
        auto [trained, hist] = nn::train_char_cnn(std::move(model), ds.records, sa, tc.cfg,
                                                  &std::cerr);
        nn::save_cnn_model(trained, fs::path(tc.out));
        std::cerr << "trained " << sa.train_ids.size() << " emails: epochs " << hist.epochs_run
                  << ", best epoch " << hist.best_epoch << ", stopped early "
                  << (hist.stopped_early ? "yes" : "no") << '\n';
    });

    // ---- eval ---------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Evaluate a model on a manifest split");
    eval->fallthrough();
    struct {
        std::string model, data, on = "test", roc_csv;
    } ev;
    eval->add_option("--model", ev.model, "Model file (either classifier)")->required();
    eval->add_option("--data", ev.data, "Dataset manifest")->required();
    eval->add_option("--on", ev.on, "Which records to evaluate")
        ->check(CLI::IsMember({"test", "train", "all"}))
        ->capture_default_str();
    eval->add_option("--roc-csv", ev.roc_csv, "Also write the ROC curve as CSV");
    eval->callback([&] {
        LabeledDataset ds{load_manifest(fs::path(ev.data)), Recipe::Custom};
        const SplitAssignment sa = split(ds, g.split_ratio, g.seed);
        const auto records = side_records(ds.records, sa, ev.on);
        if (records.empty()) throw DataError("no records to evaluate on side '" + ev.on + "'");

        std::vector<double> scores;
        scores.reserve(records.size());
        std::vector<int> actual, pred;
        for (const auto& r : records) actual.push_back(r.label);

        if (sniff_model(ev.model) == ModelKind::CNN) {
            const auto model = nn::load_cnn_model(fs::path(ev.model));
            std::vector<std::string> texts;
            texts.reserve(records.size());
            for (const auto& r : records) texts.push_back(r.text);
            scores = nn::predict_scores(model, texts);
            for (double s : scores) pred.push_back(nn::predict_label(s, model.hyper.threshold));
        } else {
            const auto model = load_nb_model(fs::path(ev.model));
            for (const auto& r : records) {
                const auto p = predict(model, r.text);
                pred.push_back(p.label);
                scores.push_back(posterior_positive(p.log_posterior));
            }
        }

        EvalReport report;
        report.conf = confusion(actual, pred);
        const bool both_classes = report.conf.tp + report.conf.fn > 0 &&
                                  report.conf.tn + report.conf.fp > 0;
        if (both_classes) report.auc = roc_auc(scores, actual);
        write_report(report, std::cout);

        if (!ev.roc_csv.empty()) {
            if (!both_classes)
                throw DataError("ROC curve needs both classes present on side '" + ev.on + "'");
            std::ofstream rf(ev.roc_csv, std::ios::binary);
            if (!rf) throw DataError("cannot write ROC CSV: " + ev.roc_csv);
            write_roc_csv(roc_curve(scores, actual), rf);
        }
    });

    // ---- score --------------------------------------------------------------
    auto* score = app.add_subcommand("score", "Score one raw email file against model files");
    score->fallthrough();
    struct {
        std::string email, cnn_model, nb_model, rule = "cnn-only";
    } sc;
    score->add_option("--email", sc.email, "Raw email file (parsed and cleaned first)")
        ->required();
    score->add_option("--cnn-model", sc.cnn_model, "Binary CNN model file");
    score->add_option("--nb-model", sc.nb_model, "Text Naive Bayes model file");
    score->add_option("--rule", sc.rule, "Aggregation rule")
        ->check(CLI::IsMember(aggregation_rules()))
        ->capture_default_str();
    score->callback([&] {
        if (sc.cnn_model.empty() && sc.nb_model.empty())
            throw CLI::ValidationError("score", "need --cnn-model and/or --nb-model");
        const std::string text = clean_text_from_file(sc.email);

        std::optional<double> cnn_score;
        std::optional<int> cnn_label, nb_label;
        if (!sc.cnn_model.empty()) {
            try {
                const auto model = nn::load_cnn_model(fs::path(sc.cnn_model));
                cnn_score = nn::predict_scores(model, {text}).at(0);
                cnn_label = nn::predict_label(*cnn_score, model.hyper.threshold);
            } catch (const DataError& e) {
                throw DataError(sc.cnn_model + ": " + e.what());
            }
        }
        if (!sc.nb_model.empty()) {
            try {
                nb_label = predict(load_nb_model(fs::path(sc.nb_model)), text).label;
            } catch (const DataError& e) {
                throw DataError(sc.nb_model + ": " + e.what());
            }
        }
        std::cout << format_verdict(aggregate_signals(cnn_score, cnn_label, nb_label, sc.rule))
                  << '\n';
    });

    // ---- top-words ----------------------------------------------------------
    auto* topw = app.add_subcommand("top-words", "Most discriminative words of an NB model");
    topw->fallthrough();
    struct {
        std::string model;
        int k = 20;
    } tw;
    topw->add_option("--model", tw.model, "Text Naive Bayes model file")->required();
    topw->add_option("-k,--top", tw.k, "How many words")->capture_default_str();
    topw->callback([&] {
        const auto model = load_nb_model(fs::path(tw.model));
        char buf[64];
        for (const auto& ws : top_discriminative_words(model, tw.k)) {
            std::snprintf(buf, sizeof buf, "%.6f", ws.score);
            std::cout << ws.word << '\t' << buf << '\n';
        }
    });

    // ---- profile ------------------------------------------------------------
    auto* profile = app.add_subcommand("profile", "Per-sender profile registry");
    profile->require_subcommand(1);
    profile->fallthrough();

    auto* preg = profile->add_subcommand("register", "Create an empty sender profile");
    preg->fallthrough();
    struct {
        std::string sender;
    } pr;
    preg->add_option("--sender", pr.sender, "Sender id")->required();
    preg->callback([&] {
        ProfileRegistry reg{fs::path(g.registry)};
        reg.register_sender(pr.sender);
        std::cout << "registered " << pr.sender << " in " << reg.root().string() << '\n';
    });

    auto* pscore = profile->add_subcommand("score", "Score a raw email against a sender profile");
    pscore->fallthrough();
    struct {
        std::string sender, email, rule;
    } ps;
    pscore->add_option("--sender", ps.sender, "Sender id")->required();
    pscore->add_option("--email", ps.email, "Raw email file")->required();
    pscore->add_option("--rule", ps.rule, "Override the profile's aggregation rule")
        ->check(CLI::IsMember(aggregation_rules()));
    pscore->callback([&] {
        ProfileRegistry reg{fs::path(g.registry)};
        const SenderProfile p = reg.load(ps.sender);
        const Verdict v = score_email(reg, p, clean_text_from_file(ps.email), ps.rule);
        std::cout << format_verdict(v) << '\n';
    });

    auto* pfb = profile->add_subcommand("feedback", "Record recipient feedback on a verdict");
    pfb->fallthrough();
    struct {
        std::string sender, email, id, reported_as, original_label;
        int verified_label = -1;
    } pf;
    pfb->add_option("--sender", pf.sender, "Sender id")->required();
    pfb->add_option("--email", pf.email, "Raw email file the feedback concerns")->required();
    pfb->add_option("--id", pf.id, "Email id (defaults to the file path)");
    pfb->add_option("--reported-as", pf.reported_as, "What the recipient reported")
        ->check(CLI::IsMember({"false_positive", "false_negative"}))
        ->required();
    pfb->add_option("--original-label", pf.original_label,
                    "Verdict the classifier gave when this email was scored")
        ->check(CLI::IsMember({"authentic", "inauthentic", "abstain", "0", "1"}))
        ->required();
    pfb->add_option("--verified-label", pf.verified_label,
                    "Human-verified true label (omit if unverified)")
        ->check(CLI::IsMember({0, 1}));
    pfb->callback([&] {
        ProfileRegistry reg{fs::path(g.registry)};
        SenderProfile p = reg.load(pf.sender);

        FeedbackItem item;
        item.email_id = pf.id.empty() ? pf.email : pf.id;
        item.reported_as = *reported_as_from_string(pf.reported_as);
        if (pf.verified_label >= 0) item.verified_label = pf.verified_label;
        item.email_text = clean_text_from_file(pf.email);

        Verdict original;
        original.label = *verdict_label_from_string(pf.original_label);
        ingest_feedback(p, item, original);
        reg.save(p);

        const auto& stored = p.feedback_queue.back();
        std::cout << "feedback recorded classifier_was_wrong="
                  << (stored.classifier_was_wrong
                          ? (*stored.classifier_was_wrong ? "yes" : "no")
                          : "unverified")
                  << " retrain_due=" << (retrain_due(p) ? "yes" : "no") << '\n';
    });

    auto* pcheck = profile->add_subcommand("retrain-check", "Report whether a retrain is due");
    pcheck->fallthrough();
    struct {
        std::string sender, emit;
    } pc;
    pcheck->add_option("--sender", pc.sender, "Sender id")->required();
    pcheck->add_option("--emit", pc.emit, "Write the retrain manifest here");
    pcheck->callback([&] {
        ProfileRegistry reg{fs::path(g.registry)};
        const SenderProfile p = reg.load(pc.sender);
        std::cout << "retrain_due=" << (retrain_due(p) ? "yes" : "no")
                  << " pending=" << p.pending_batch.size()
                  << " verified_wrong=" << verified_wrong_count(p)
                  << " threshold=" << p.retrain_threshold << '\n';
        if (!pc.emit.empty()) {
            const auto material = retrain_manifest(p);
            save_manifest(material, fs::path(pc.emit));
            std::cerr << "wrote " << material.size() << " retrain records\n";
        }
    });

    auto* pqueue = profile->add_subcommand("queue", "Queue new sent mail for the next retrain");
    pqueue->fallthrough();
    struct {
        std::string sender, manifest;
    } pq;
    pqueue->add_option("--sender", pq.sender, "Sender id")->required();
    pqueue->add_option("--manifest", pq.manifest, "Manifest of new sent mail")->required();
    pqueue->callback([&] {
        ProfileRegistry reg{fs::path(g.registry)};
        SenderProfile p = reg.load(pq.sender);
        auto records = load_manifest(fs::path(pq.manifest));
        const std::size_t added = records.size();
        add_pending(p, std::move(records));
        reg.save(p);
        std::cout << "queued " << added << " emails (pending " << p.pending_batch.size() << ")\n";
    });

    auto* pattach = profile->add_subcommand("attach", "Attach trained model files to a profile");
    pattach->fallthrough();
    struct {
        std::string sender, cnn, nb;
    } pa;
    pattach->add_option("--sender", pa.sender, "Sender id")->required();
    pattach->add_option("--cnn", pa.cnn, "Binary CNN model to install");
    pattach->add_option("--nb", pa.nb, "Text Naive Bayes model to install");
    pattach->callback([&] {
        if (pa.cnn.empty() && pa.nb.empty())
            throw CLI::ValidationError("profile attach", "need --cnn and/or --nb");
        ProfileRegistry reg{fs::path(g.registry)};
        SenderProfile p = reg.load(pa.sender);
        if (!pa.cnn.empty()) reg.attach_cnn(p, nn::load_cnn_model(fs::path(pa.cnn)));
        if (!pa.nb.empty()) reg.attach_nb(p, load_nb_model(fs::path(pa.nb)));
        p.trained_at = static_cast<std::int64_t>(std::time(nullptr));
        reg.save(p);
        std::cout << "attached models to " << pa.sender << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);  // prints help or the usage problem
        return rc == 0 ? 0 : 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
