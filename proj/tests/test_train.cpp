#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <sstream>

#include "authmail/authmail.hpp"
#include "support/synth.hpp"

using namespace authmail;
using namespace authmail::nn;

namespace {

// small-but-real training setup shared by the cases below
struct Fixture {
    std::vector<EmailRecord> records;
    SplitAssignment sa;

    explicit Fixture(std::size_t per_class, std::uint64_t seed = 3) {
        auto corpus = testsupport::easy_corpus(per_class, seed);
        std::ostringstream warn;
        auto ds = assemble(corpus.authentic, corpus.inauthentic, Recipe::Custom, warn);
        records = ds.records;
        sa = split(ds, 0.8, 42);
    }
};

TrainConfig quick_config() {
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.max_epochs = 3;
    cfg.patience = 10;
    cfg.val_fraction = 0.15;
    cfg.seed = 42;
    return cfg;
}

}  // namespace

TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.batch_size = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.val_fraction = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.val_fraction = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.max_epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.patience = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("training runs, logs every epoch, and learns the easy corpus") {
    Fixture fx(30);
    auto cfg = quick_config();
    cfg.max_epochs = 5;

    auto model = make_char_cnn<float>(CharCNNHyper{}, derive_seed(42, 0));
    std::ostringstream progress;
    auto [trained, hist] = train_char_cnn(model, fx.records, fx.sa, cfg, &progress);

    CHECK(hist.epochs_run >= 1);
    CHECK(hist.epochs_run <= cfg.max_epochs);
    CHECK(hist.train_loss.size() == static_cast<std::size_t>(hist.epochs_run));
    CHECK(hist.val_loss.size() == static_cast<std::size_t>(hist.epochs_run));
    CHECK(hist.best_epoch >= 1);
    CHECK(hist.best_epoch <= hist.epochs_run);
    CHECK(hist.val_loss[static_cast<std::size_t>(hist.best_epoch) - 1] ==
          *std::min_element(hist.val_loss.begin(), hist.val_loss.end()));
    CHECK(!hist.stopped_early);  // patience 10 cannot trip within 5 epochs

    // progress stream carries one line per epoch
    std::string line;
    int lines = 0;
    std::istringstream in(progress.str());
    while (std::getline(in, line)) {
        CHECK(line.find("epoch") != std::string::npos);
        CHECK(line.find("train loss") != std::string::npos);
        CHECK(line.find("val loss") != std::string::npos);
        ++lines;
    }
    CHECK(lines == hist.epochs_run);

    // the styles are trivially separable; a few epochs should learn them
    CHECK(hist.train_loss.back() < hist.train_loss.front());

    std::vector<std::string> texts;
    std::vector<int> actual;
    for (const auto& r : fx.records) {
        texts.push_back(r.text);
        actual.push_back(r.label);
    }
    auto scores = predict_scores(trained, texts);
    std::vector<int> predicted;
    for (double s : scores) predicted.push_back(predict_label(s));
    CHECK(accuracy(confusion(actual, predicted)) > 0.8);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    Fixture fx(24);
    auto cfg = quick_config();

    auto m1 = make_char_cnn<float>(CharCNNHyper{}, derive_seed(42, 0));
    auto m2 = make_char_cnn<float>(CharCNNHyper{}, derive_seed(42, 0));
    auto [t1, h1] = train_char_cnn(m1, fx.records, fx.sa, cfg);
    auto [t2, h2] = train_char_cnn(m2, fx.records, fx.sa, cfg);

    CHECK(h1.train_loss == h2.train_loss);
    CHECK(h1.val_loss == h2.val_loss);
    CHECK(h1.epochs_run == h2.epochs_run);
    CHECK(h1.best_epoch == h2.best_epoch);

    std::ostringstream b1, b2;
    save_cnn_model(t1, b1);
    save_cnn_model(t2, b2);
    CHECK(b1.str() == b2.str());

    // a different seed trains a different model
    TrainConfig other = cfg;
    other.seed = 43;
    auto m3 = make_char_cnn<float>(CharCNNHyper{}, derive_seed(42, 0));
    auto [t3, h3] = train_char_cnn(m3, fx.records, fx.sa, other);
    std::ostringstream b3;
    save_cnn_model(t3, b3);
    CHECK(b1.str() != b3.str());
}

TEST_CASE("training refuses sets smaller than two batches") {
    Fixture fx(8);  // 16 records, 12 train ids
    auto cfg = quick_config();
    cfg.batch_size = 8;  // needs >= 16 training rows

    auto model = make_char_cnn<float>(CharCNNHyper{}, 1);
    try {
        train_char_cnn(model, fx.records, fx.sa, cfg);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("--batch-size") != std::string::npos);
    }
}

TEST_CASE("training fails on split ids missing from the records") {
    Fixture fx(24);
    fx.sa.train_ids.push_back("ghost/1");
    auto model = make_char_cnn<float>(CharCNNHyper{}, 1);
    CHECK_THROWS_AS(train_char_cnn(model, fx.records, fx.sa, quick_config()), DataError);
}

TEST_CASE("a diverging run stops early and restores the best weights") {
    Fixture fx(24);
    auto cfg = quick_config();
    cfg.max_epochs = 12;
    cfg.patience = 1;
    cfg.learning_rate = 15.0;  // guaranteed divergence

    auto model = make_char_cnn<float>(CharCNNHyper{}, derive_seed(42, 0));
    auto [trained, hist] = train_char_cnn(model, fx.records, fx.sa, cfg);

    CHECK(hist.stopped_early);
    CHECK(hist.epochs_run < cfg.max_epochs);
    CHECK(hist.epochs_run <= hist.best_epoch + cfg.patience);
    CHECK(hist.val_loss[static_cast<std::size_t>(hist.best_epoch) - 1] ==
          *std::min_element(hist.val_loss.begin(), hist.val_loss.end()));
}
