#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <sstream>

#include "slicebench/traffic.hpp"

using namespace slicebench;

TEST_CASE("zero duration yields empty trace") {
    for (Slice s : kSlices) REQUIRE(generate_trace(SliceProfile::defaults(s), 0.0, 7).empty());
}

TEST_CASE("URLLC default profile: 50 packets per second each way") {
    auto p = SliceProfile::defaults(Slice::urllc);

    SECTION("jitter-free grid is exact") {
        p.params["jitter_ms"] = 0.0;
        Trace t = generate_trace(p, 1.0, 1);
        std::vector<std::int64_t> dl_times;
        int ul = 0;
        for (const auto& ev : t) {
            REQUIRE(ev.bytes == 200);
            if (ev.direction == Direction::downlink)
                dl_times.push_back(ev.t_ms);
            else
                ++ul;
        }
        REQUIRE(dl_times.size() == 50);
        REQUIRE(ul == 50);
        for (size_t i = 0; i < dl_times.size(); ++i) REQUIRE(dl_times[i] == static_cast<std::int64_t>(20 * i));
    }

    SECTION("default jitter keeps counts and sizes") {
        Trace t = generate_trace(p, 1.0, 1);
        int dl = 0, ul = 0;
        for (const auto& ev : t) {
            REQUIRE(ev.bytes == 200);
            REQUIRE(ev.t_ms >= 0);
            REQUIRE(ev.t_ms < 1000);
            (ev.direction == Direction::downlink ? dl : ul)++;
        }
        REQUIRE(dl == 50);
        REQUIRE(ul == 50);
    }
}

TEST_CASE("generators are pure functions of (profile, duration, seed)") {
    for (Slice s : kSlices) {
        auto p = SliceProfile::defaults(s);
        Trace a = generate_trace(p, 30.0, 42);
        Trace b = generate_trace(p, 30.0, 42);
        REQUIRE(a == b);
        Trace c = generate_trace(p, 30.0, 43);
        if (!a.empty() || !c.empty()) REQUIRE(a != c);  // different seed, different stream
    }
}

TEST_CASE("traces are sorted, non-negative, and inside the span") {
    for (Slice s : kSlices) {
        Trace t = generate_trace(SliceProfile::defaults(s), 60.0, 5);
        for (size_t i = 0; i < t.size(); ++i) {
            REQUIRE(t[i].t_ms >= 0);
            REQUIRE(t[i].t_ms < 60000);
            REQUIRE(t[i].bytes >= 1);
            if (i) REQUIRE(t[i].t_ms >= t[i - 1].t_ms);
        }
    }
}

TEST_CASE("profile validation rejects bad parameters") {
    auto p = SliceProfile::defaults(Slice::embb);
    p.params["rate_mbps"] = -1.0;
    REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
    auto m = SliceProfile::defaults(Slice::mmtc);
    m.params["burst_pkts_min"] = 30.0;  // > max of 20
    REQUIRE_THROWS_AS(m.validate(), std::invalid_argument);
    REQUIRE_THROWS_AS(generate_trace(p, 1.0, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(generate_trace(SliceProfile::defaults(Slice::embb), -1.0, 1), std::invalid_argument);
}

TEST_CASE("chunk_trace splits and rebases") {
    Trace t;
    for (int i = 0; i < 300; ++i) t.push_back({i * 1000, 100, Direction::downlink});  // 1 event/s for 300 s

    SECTION("span inferred from last event") {
        auto chunks = chunk_trace(t, 120.0);
        REQUIRE(chunks.size() == 2);  // 300 s trace -> 2 chunks, 60 s tail dropped
        REQUIRE(chunks[0].size() == 120);
        REQUIRE(chunks[1].size() == 120);
        REQUIRE(chunks[1].front().t_ms == 0);  // rebased
        for (const auto& c : chunks)
            for (const auto& ev : c) {
                REQUIRE(ev.t_ms >= 0);
                REQUIRE(ev.t_ms < 120000);
            }
    }

    SECTION("explicit duration counts trailing silence") {
        Trace sparse{{5000, 64, Direction::uplink}};
        REQUIRE(chunk_trace(sparse, 120.0).empty());          // inferred span 5.001 s
        REQUIRE(chunk_trace(sparse, 120.0, 120.0).size() == 1);
        REQUIRE(chunk_trace(sparse, 120.0, 240.0).size() == 2);
        REQUIRE(chunk_trace(sparse, 120.0, 240.0)[1].empty());
        REQUIRE(chunk_trace({}, 120.0, 240.0).size() == 2);
    }

    SECTION("guards") {
        REQUIRE(chunk_trace({}).empty());
        REQUIRE_THROWS_AS(chunk_trace(t, 0.0), std::invalid_argument);
    }
}

TEST_CASE("arrivals_by_period buckets on half-open boundaries") {
    Trace t{{0, 100, Direction::downlink}, {249, 100, Direction::downlink}, {250, 70, Direction::uplink}};
    auto per = arrivals_by_period(t, 250);
    REQUIRE(per.size() == 2);
    REQUIRE(per[0].period_idx == 0);
    REQUIRE(per[0].dl_bytes == 200);
    REQUIRE(per[0].dl_pkts == 2);
    REQUIRE(per[0].ul_bytes == 0);
    REQUIRE(per[1].dl_bytes == 0);
    REQUIRE(per[1].ul_bytes == 70);
    REQUIRE(per[1].ul_pkts == 1);
    REQUIRE(arrivals_by_period({}).empty());
    REQUIRE_THROWS_AS(arrivals_by_period(t, 0), std::invalid_argument);
}

TEST_CASE("arrivals partition the trace bytes exactly") {
    for (Slice s : kSlices) {
        Trace t = generate_trace(SliceProfile::defaults(s), 45.0, 11);
        auto per = arrivals_by_period(t);
        std::int64_t ev_sum = 0;
        for (const auto& ev : t) ev_sum += ev.bytes;
        std::int64_t per_sum = 0;
        int pkts = 0;
        for (const auto& p : per) {
            per_sum += p.dl_bytes + p.ul_bytes;
            pkts += p.dl_pkts + p.ul_pkts;
        }
        REQUIRE(per_sum == ev_sum);
        REQUIRE(pkts == static_cast<int>(t.size()));
    }
}

TEST_CASE("trace CSV round-trips") {
    Trace t = generate_trace(SliceProfile::defaults(Slice::mmtc), 90.0, 3);
    std::ostringstream out;
    write_trace_csv(t, out);
    std::istringstream in(out.str());
    REQUIRE(read_trace_csv(in) == t);
}

TEST_CASE("trace CSV reader rejects malformed input") {
    std::istringstream bad_header("time,bytes\n");
    REQUIRE_THROWS_AS(read_trace_csv(bad_header), std::runtime_error);
    std::istringstream bad_dir("t_ms,bytes,direction\n0,100,sideways\n");
    REQUIRE_THROWS_AS(read_trace_csv(bad_dir), std::runtime_error);
    std::istringstream out_of_order("t_ms,bytes,direction\n500,100,downlink\n100,100,uplink\n");
    REQUIRE_THROWS_AS(read_trace_csv(out_of_order), std::runtime_error);
    std::istringstream ok("t_ms,bytes,direction\n0,100,dl\n5,20,ul\n");
    Trace t = read_trace_csv(ok);
    REQUIRE(t.size() == 2);
    REQUIRE(t[1].direction == Direction::uplink);
}
