#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "slicebench/classifier.hpp"

using namespace slicebench;
namespace fs = std::filesystem;

namespace {

KpiRecord record(int64_t t_ms, double dl_samples, double dl_brate, double ul_samples, double ul_brate) {
    KpiRecord r;
    r.timestamp_ms = t_ms;
    r.ue_id = 0;
    r.slice_id = static_cast<int>(Slice::embb);
    r.kpi[1] = dl_samples;  // dl_n_samples
    r.kpi[3] = dl_brate;    // dl_brate
    r.kpi[7] = ul_samples;  // ul_n_samples
    r.kpi[9] = ul_brate;    // ul_brate
    r.kpi[0] = 15.0;        // radio KPIs stay populated even when idle
    return r;
}

std::vector<KpiRecord> stream_of(const std::vector<double>& dl_brates) {
    std::vector<KpiRecord> out;
    for (size_t i = 0; i < dl_brates.size(); ++i) {
        double v = dl_brates[i];
        out.push_back(record(static_cast<int64_t>(i) * 250, v > 0 ? 4.0 : 0.0, v, 0.0, 0.0));
    }
    return out;
}

Window active_window(int t_size, int hot_col, double level, TrafficClass label, double jitter = 0.0) {
    Window w;
    w.values = Eigen::MatrixXd::Zero(t_size, kNumKpiColumns);
    w.values.col(hot_col).setConstant(level + jitter);
    w.label = label;
    return w;
}

}  // namespace

TEST_CASE("sliding windows have stride one") {
    auto stream = stream_of(std::vector<double>(480, 1.0));
    REQUIRE(build_windows(stream, 64, TrafficClass::embb).size() == 417);
    REQUIRE(build_windows(stream, 4, TrafficClass::embb).size() == 477);
    auto tiny = stream_of(std::vector<double>(3, 1.0));
    REQUIRE(build_windows(tiny, 4, TrafficClass::embb).empty());
    REQUIRE_THROWS_AS(build_windows(stream, 5, TrafficClass::embb), std::invalid_argument);

    auto unsorted = stream;
    std::swap(unsorted[0].timestamp_ms, unsorted[1].timestamp_ms);
    REQUIRE_THROWS_AS(build_windows(unsorted, 4, TrafficClass::embb), std::invalid_argument);
}

TEST_CASE("all-idle windows fall into the control class") {
    // 8 idle periods, 8 active, 8 idle
    std::vector<double> pattern(24, 0.0);
    for (int i = 8; i < 16; ++i) pattern[static_cast<size_t>(i)] = 2.0;
    auto stream = stream_of(pattern);

    auto ws = build_windows(stream, 4, TrafficClass::embb);
    REQUIRE(ws.size() == 21);
    int ctrl = 0, embb = 0;
    for (const auto& w : ws) {
        if (w.label == TrafficClass::ctrl)
            ++ctrl;
        else if (w.label == TrafficClass::embb)
            ++embb;
    }
    // idle runs of length 8 give 5 all-idle windows each at T=4
    REQUIRE(ctrl == 10);
    REQUIRE(embb == 11);

    SECTION("a declared control stream keeps only its idle windows") {
        auto cs = build_windows(stream, 4, TrafficClass::ctrl);
        REQUIRE(cs.size() == 10);
        for (const auto& w : cs) REQUIRE(w.label == TrafficClass::ctrl);
    }
    SECTION("idleness considers both directions") {
        auto rec = record(0, 0.0, 0.0, 3.0, 1.5);  // uplink-only activity
        REQUIRE_FALSE(idle_period(Eigen::RowVectorXd::Map(rec.kpi.data(), kNumKpiColumns)));
    }
}

TEST_CASE("normalizer maps the training range onto the unit interval") {
    Window a = active_window(4, 3, 2.0, TrafficClass::embb);
    Window b = active_window(4, 3, 6.0, TrafficClass::embb);
    NormStats st = fit_normalizer({a, b});
    REQUIRE(st.min[3] == 2.0);
    REQUIRE(st.max[3] == 6.0);

    Window probe = active_window(4, 3, 4.0, TrafficClass::embb);
    REQUIRE(apply_normalizer(st, probe).values(0, 3) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(apply_normalizer(st, a).values(0, 3) == 0.0);
    REQUIRE(apply_normalizer(st, b).values(0, 3) == 1.0);

    SECTION("outside the range it clips") {
        REQUIRE(apply_normalizer(st, active_window(4, 3, 9.0, TrafficClass::embb)).values(0, 3) == 1.0);
        REQUIRE(apply_normalizer(st, active_window(4, 3, -1.0, TrafficClass::embb)).values(0, 3) == 0.0);
    }
    SECTION("constant features collapse to zero") {
        for (int f = 0; f < kNumKpiColumns; ++f)
            if (f != 3) REQUIRE(apply_normalizer(st, probe).values(2, f) == 0.0);
    }
    SECTION("labels pass through and empty input is rejected") {
        REQUIRE(apply_normalizer(st, probe).label == TrafficClass::embb);
        REQUIRE_THROWS_AS(fit_normalizer({}), std::invalid_argument);
    }
}

TEST_CASE("idle traffic removal drops windows with no volume") {
    Window idle = active_window(4, 0, 5.0, TrafficClass::ctrl);  // col 0 is not a volume column
    Window live = active_window(4, 3, 1.0, TrafficClass::embb);
    auto kept = itr_filter({idle, live});
    REQUIRE(kept.size() == 1);
    REQUIRE(kept[0].label == TrafficClass::embb);
    REQUIRE(itr_filter({idle, idle}).empty());
    REQUIRE_THROWS_AS(itr_filter({idle}, -0.5), std::invalid_argument);

    SECTION("the threshold is strict") {
        Window faint = active_window(4, 3, 0.4, TrafficClass::embb);
        REQUIRE(itr_filter({faint}, 0.5).empty());
        REQUIRE(itr_filter({faint}, 0.3).size() == 1);
    }
}

TEST_CASE("small windows lose more idle content than large ones on bursty traffic") {
    // mMTC-like bursts: 3 active periods at the start of every 40-period cycle.
    std::vector<double> pattern(480, 0.0);
    for (int c = 0; c < 12; ++c)
        for (int k = 0; k < 3; ++k) pattern[static_cast<size_t>(40 * c + k)] = 1.0;
    auto stream = stream_of(pattern);

    auto w4 = build_windows(stream, 4, TrafficClass::mmtc);
    auto w64 = build_windows(stream, 64, TrafficClass::mmtc);
    auto removed4 = static_cast<long>(w4.size() - itr_filter(w4).size());
    auto removed64 = static_cast<long>(w64.size() - itr_filter(w64).size());
    REQUIRE(removed4 > removed64);
    REQUIRE(removed64 == 0);  // every 64-period window spans at least one burst
}

TEST_CASE("log probabilities are a valid distribution and ties go to the first class") {
    CnnModel zero(4);  // all parameters zero -> equal scores
    Window w = active_window(4, 3, 0.7, TrafficClass::embb);
    auto [pred, lp] = classify(zero, w);
    REQUIRE(pred == TrafficClass::mmtc);  // class 0 on exact ties
    REQUIRE(lp.array().exp().sum() == Catch::Approx(1.0).margin(1e-6));
    for (int c = 0; c < kNumClasses; ++c) REQUIRE(lp[c] == Catch::Approx(std::log(0.25)).margin(1e-12));

    CnnModel seeded(8);
    seeded.init_weights(3);
    Window w8 = active_window(8, 9, 0.4, TrafficClass::urllc);
    REQUIRE(seeded.log_probs(w8.values).array().exp().sum() == Catch::Approx(1.0).margin(1e-6));
    REQUIRE_THROWS_AS(seeded.log_probs(w.values), std::invalid_argument);  // shape mismatch
}

TEST_CASE("cnn gradient matches central finite differences") {
    CnnModel model(4);
    model.init_weights(17);
    auto rng = make_rng(23, {0x9Au});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> cls(0, kNumClasses - 1);

    std::vector<Window> store;
    for (int i = 0; i < 8; ++i) {
        Window w;
        w.values = Eigen::MatrixXd::NullaryExpr(4, kNumKpiColumns, [&]() { return unit(rng); });
        w.label = static_cast<TrafficClass>(cls(rng));
        store.push_back(std::move(w));
    }
    std::vector<const Window*> batch;
    for (const auto& w : store) batch.push_back(&w);

    double loss = 0.0;
    Eigen::VectorXd grad = cnn_loss_grad(model, batch, &loss);
    REQUIRE(loss == Catch::Approx(cnn_loss(model, batch)).margin(1e-12));

    std::uniform_int_distribution<Eigen::Index> pick(0, model.params().size() - 1);
    int checked = 0;
    for (int k = 0; k < 25; ++k) {
        Eigen::Index i = pick(rng);
        double h = 1e-6 * std::max(1.0, std::abs(model.params()[i]));
        CnnModel plus = model, minus = model;
        plus.params()[i] += h;
        minus.params()[i] -= h;
        double fd = (cnn_loss(plus, batch) - cnn_loss(minus, batch)) / (2.0 * h);
        double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-10});
        REQUIRE(std::abs(fd - grad[i]) / denom < 1e-4);
        ++checked;
    }
    REQUIRE(checked >= 20);
}

TEST_CASE("training separates two linearly separable classes") {
    auto rng = make_rng(31, {0xB2u});
    std::uniform_real_distribution<double> noise(0.0, 0.05);
    std::vector<Window> train, test;
    for (int i = 0; i < 120; ++i) {
        train.push_back(active_window(4, 3, 0.8, TrafficClass::embb, noise(rng)));
        train.push_back(active_window(4, 9, 0.8, TrafficClass::urllc, noise(rng)));
    }
    for (int i = 0; i < 40; ++i) {
        test.push_back(active_window(4, 3, 0.85, TrafficClass::embb, noise(rng)));
        test.push_back(active_window(4, 9, 0.85, TrafficClass::urllc, noise(rng)));
    }

    CnnHyperparams hp;
    hp.max_epochs = 50;
    hp.early_stop_epochs = 12;
    hp.minibatch = 64;
    hp.seed = 5;
    CnnModel model = train_cnn(train, 4, hp);
    auto met = evaluate(model, test, false);
    REQUIRE(met.accuracy >= 0.99);
    REQUIRE(met.n == 80);
    REQUIRE(met.per_class[static_cast<size_t>(TrafficClass::embb)] >= 0.99);
    REQUIRE(met.per_class[static_cast<size_t>(TrafficClass::mmtc)] == -1.0);  // absent class
    REQUIRE(met.mean_inference_ms >= 0.0);
    REQUIRE(met.mean_inference_ms < 250.0);

    SECTION("confusion rows count every test window") {
        int64_t total = 0;
        for (const auto& row : met.confusion)
            for (int64_t cell : row) total += cell;
        REQUIRE(total == met.n);
    }
}

TEST_CASE("training input validation") {
    std::vector<Window> one_class(10, active_window(4, 3, 0.5, TrafficClass::embb));
    CnnHyperparams hp;
    REQUIRE_THROWS_AS(train_cnn({}, 4, hp), std::invalid_argument);
    REQUIRE_THROWS_AS(train_cnn(one_class, 4, hp), std::invalid_argument);
    std::vector<Window> wrong_shape{active_window(8, 3, 0.5, TrafficClass::embb),
                                    active_window(8, 9, 0.5, TrafficClass::urllc)};
    REQUIRE_THROWS_AS(train_cnn(wrong_shape, 4, hp), std::invalid_argument);
    CnnHyperparams bad;
    bad.val_fraction = 1.0;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("training is deterministic for a fixed seed") {
    std::vector<Window> train;
    for (int i = 0; i < 24; ++i) {
        train.push_back(active_window(4, 3, 0.6 + 0.01 * i, TrafficClass::embb));
        train.push_back(active_window(4, 9, 0.6 + 0.01 * i, TrafficClass::urllc));
    }
    CnnHyperparams hp;
    hp.max_epochs = 3;
    hp.seed = 9;
    CnnModel a = train_cnn(train, 4, hp);
    CnnModel b = train_cnn(train, 4, hp);
    REQUIRE(a.params() == b.params());
}

TEST_CASE("models survive a save and load round trip") {
    CnnModel model(8);
    model.init_weights(77);
    model.norm().min = Eigen::VectorXd::LinSpaced(kNumKpiColumns, 0.0, 1.6);
    model.norm().max = Eigen::VectorXd::LinSpaced(kNumKpiColumns, 2.0, 18.0);
    fs::path path = fs::temp_directory_path() / "sb_model.bin";
    save_model(model, path.string());
    CnnModel back = load_model(path.string());
    REQUIRE(back.t_size() == 8);
    REQUIRE(back.params() == model.params());
    REQUIRE(back.norm().min == model.norm().min);
    REQUIRE(back.norm().max == model.norm().max);
    fs::remove(path);

    SECTION("without fitted stats the flag round trips too") {
        CnnModel bare(4);
        bare.init_weights(1);
        save_model(bare, path.string());
        REQUIRE(load_model(path.string()).norm().min.size() == 0);
        fs::remove(path);
    }
    SECTION("foreign files are rejected") {
        std::ofstream out(path, std::ios::binary);
        out << "junk";
        out.close();
        REQUIRE_THROWS(load_model(path.string()));
        fs::remove(path);
    }
}

TEST_CASE("manifest loading and stratified file splits") {
    fs::path dir = fs::temp_directory_path() / "sb_manifest";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // Two tiny KPI files: one embb with two UEs, one declared ctrl.
    std::vector<KpiRecord> recs;
    for (int ue = 0; ue < 2; ++ue)
        for (int t = 0; t < 6; ++t) {
            KpiRecord r = record(t * 250, 4.0, 1.0, 0.0, 0.0);
            r.ue_id = ue;
            recs.push_back(r);
        }
    std::sort(recs.begin(), recs.end(),
              [](const KpiRecord& a, const KpiRecord& b) { return a.timestamp_ms < b.timestamp_ms; });
    write_kpi_csv(recs, (dir / "embb_000.csv").string());
    std::vector<KpiRecord> idle(6);
    for (int t = 0; t < 6; ++t) idle[static_cast<size_t>(t)].timestamp_ms = t * 250;
    write_kpi_csv(idle, (dir / "ctrl_000.csv").string());
    {
        std::ofstream out(dir / "labels.csv");
        out << "file,label\nembb_000.csv,embb\nctrl_000.csv,ctrl\n";
    }

    auto files = read_manifest(dir.string());
    REQUIRE(files.size() == 2);
    REQUIRE(files[0].label == TrafficClass::embb);
    REQUIRE(files[1].label == TrafficClass::ctrl);

    // 6 periods per UE at T=4 -> 3 windows per UE; none straddle UEs.
    REQUIRE(windows_from_file(files[0], 4).size() == 6);
    REQUIRE(windows_from_file(files[1], 4).size() == 3);

    SECTION("split is stratified per class and reproducible") {
        std::vector<LabeledFile> many;
        for (int i = 0; i < 5; ++i) {
            many.push_back({files[0].path, TrafficClass::embb});
            many.push_back({files[1].path, TrafficClass::ctrl});
        }
        auto [train, test] = split_files(many, 0.8, 11);
        auto count = [](const std::vector<LabeledFile>& v, TrafficClass c) {
            return std::count_if(v.begin(), v.end(), [&](const LabeledFile& f) { return f.label == c; });
        };
        REQUIRE(count(train, TrafficClass::embb) == 4);
        REQUIRE(count(train, TrafficClass::ctrl) == 4);
        REQUIRE(count(test, TrafficClass::embb) == 1);
        REQUIRE(count(test, TrafficClass::ctrl) == 1);
        auto [train2, test2] = split_files(many, 0.8, 11);
        REQUIRE(train2.size() == train.size());
        for (size_t i = 0; i < train.size(); ++i) REQUIRE(train2[i].path == train[i].path);
        REQUIRE_THROWS_AS(split_files(many, 0.0, 1), std::invalid_argument);
    }
    SECTION("bad manifests are rejected") {
        {
            std::ofstream out(dir / "labels.csv");
            out << "file,label\nembb_000.csv,warp\n";
        }
        REQUIRE_THROWS(read_manifest(dir.string()));
        fs::remove(dir / "labels.csv");
        REQUIRE_THROWS(read_manifest(dir.string()));
    }
    fs::remove_all(dir);
}

TEST_CASE("window reservoir caps each class") {
    WindowReservoir res(5, 3);
    for (int i = 0; i < 20; ++i) res.add(active_window(4, 3, 0.1 * i, TrafficClass::embb));
    for (int i = 0; i < 3; ++i) res.add(active_window(4, 9, 0.1 * i, TrafficClass::urllc));
    auto all = res.take();
    REQUIRE(all.size() == 8);
    int embb = 0;
    for (const auto& w : all)
        if (w.label == TrafficClass::embb) ++embb;
    REQUIRE(embb == 5);

    WindowReservoir unbounded(0, 3);
    for (int i = 0; i < 20; ++i) unbounded.add(active_window(4, 3, 0.1 * i, TrafficClass::embb));
    REQUIRE(unbounded.take().size() == 20);
}

TEST_CASE("evaluation requires surviving windows") {
    CnnModel zero(4);
    std::vector<Window> idle{active_window(4, 0, 1.0, TrafficClass::ctrl)};
    REQUIRE_THROWS_AS(evaluate(zero, idle, true), std::invalid_argument);
    REQUIRE_NOTHROW(evaluate(zero, idle, false));
}

TEST_CASE("itr gate declares idle windows ctrl") {
    CnnModel zero(4);  // uniform logits -> always predicts mmtc
    std::vector<Window> set;
    for (int i = 0; i < 3; ++i) set.push_back(active_window(4, 0, 1.0 + i, TrafficClass::ctrl));
    set.push_back(active_window(4, 1, 1.0, TrafficClass::mmtc));  // dl_n_samples hot
    auto raw = evaluate(zero, set, false);
    auto gated = evaluate(zero, set, true);
    REQUIRE(raw.accuracy == Catch::Approx(0.25));
    REQUIRE(gated.accuracy == Catch::Approx(1.0));
    REQUIRE(gated.n == 4);
    REQUIRE(gated.confusion[static_cast<size_t>(TrafficClass::ctrl)][static_cast<size_t>(TrafficClass::ctrl)] == 3);
    REQUIRE(gated.accuracy >= raw.accuracy);
}
