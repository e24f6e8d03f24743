#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "slicebench/mdp.hpp"

using namespace slicebench;

TEST_CASE("prbs_of maps Rbs to PRBs with the short eMBB Rb") {
    REQUIRE(prbs_of(RbAllocation{1, 1}) == std::array<int, 3>{3, 3, 44});
    REQUIRE(prbs_of(RbAllocation{15, 1}) == std::array<int, 3>{45, 3, 2});
    REQUIRE(prbs_of(RbAllocation{5, 6}) == std::array<int, 3>{15, 18, 17});
    for (const auto& rbs : enumerate_allocations()) {
        auto p = prbs_of(rbs);
        REQUIRE(p[0] + p[1] + p[2] == kTotalPrbs);
    }
    REQUIRE_THROWS_AS(prbs_of(RbAllocation{0, 1}), std::invalid_argument);
    REQUIRE_THROWS_AS(prbs_of(RbAllocation{16, 1}), std::invalid_argument);
}

TEST_CASE("apply_action transfer table and masking") {
    REQUIRE(apply_action(RbAllocation{5, 5}, 0) == RbAllocation{5, 5});
    REQUIRE(apply_action(RbAllocation{5, 5}, 1) == RbAllocation{4, 6});
    REQUIRE(apply_action(RbAllocation{5, 5}, 2) == RbAllocation{4, 5});
    REQUIRE(apply_action(RbAllocation{5, 5}, 3) == RbAllocation{6, 4});
    REQUIRE(apply_action(RbAllocation{5, 5}, 4) == RbAllocation{5, 4});
    REQUIRE(apply_action(RbAllocation{5, 5}, 5) == RbAllocation{6, 5});
    REQUIRE(apply_action(RbAllocation{5, 5}, 6) == RbAllocation{5, 6});
    // masking: donor at 1 Rb keeps the allocation
    REQUIRE(apply_action(RbAllocation{1, 5}, 1) == RbAllocation{1, 5});
    REQUIRE(apply_action(RbAllocation{1, 5}, 2) == RbAllocation{1, 5});
    REQUIRE(apply_action(RbAllocation{5, 1}, 3) == RbAllocation{5, 1});
    REQUIRE(apply_action(RbAllocation{5, 1}, 4) == RbAllocation{5, 1});
    REQUIRE(apply_action(RbAllocation{15, 1}, 5) == RbAllocation{15, 1});
    REQUIRE(apply_action(RbAllocation{15, 1}, 6) == RbAllocation{15, 1});
    REQUIRE_THROWS_AS(apply_action(RbAllocation{5, 5}, 7), std::invalid_argument);
    REQUIRE_THROWS_AS(apply_action(RbAllocation{5, 5}, -1), std::invalid_argument);
}

TEST_CASE("exhaustive action algebra over all allocations") {
    const auto allocs = enumerate_allocations();
    REQUIRE(allocs.size() == 120);
    for (const auto& rbs : allocs) {
        for (int a = 0; a < kNumActions; ++a) {
            RbAllocation next = apply_action(rbs, a);
            REQUIRE(next.valid());
            REQUIRE(next.rb_mmtc + next.rb_urllc + next.rb_embb() == kTotalRbs);
            auto p = prbs_of(next);
            REQUIRE(p[0] + p[1] + p[2] == kTotalPrbs);
        }
    }
}

TEST_CASE("inverse action pairs compose to identity on interior allocations") {
    const std::array<std::pair<int, int>, 3> inverses{{{1, 3}, {2, 5}, {4, 6}}};
    for (const auto& rbs : enumerate_allocations()) {
        bool interior = rbs.rb_mmtc >= 2 && rbs.rb_urllc >= 2 && rbs.rb_embb() >= 2;
        if (!interior) continue;
        for (auto [a, b] : inverses) {
            REQUIRE(apply_action(apply_action(rbs, a), b) == rbs);
            REQUIRE(apply_action(apply_action(rbs, b), a) == rbs);
        }
    }
}

TEST_CASE("valid_actions enumerates exactly the allocation-changing codes") {
    State interior{UserTuple{1, 1, 1}, RbAllocation{5, 5}};
    REQUIRE(valid_actions(interior) == std::vector<int>{0, 1, 2, 3, 4, 5, 6});

    // mMTC and URLLC both at the 1-Rb floor: only eMBB can donate.
    State corner{UserTuple{1, 1, 1}, RbAllocation{1, 1}};
    REQUIRE(valid_actions(corner) == std::vector<int>{0, 5, 6});

    // eMBB and URLLC at the floor: only mMTC can donate.
    State embb_floor{UserTuple{1, 1, 1}, RbAllocation{15, 1}};
    REQUIRE(valid_actions(embb_floor) == std::vector<int>{0, 1, 2});

    for (const auto& rbs : enumerate_allocations()) {
        State s{UserTuple{1, 0, 0}, rbs};
        auto va = valid_actions(s);
        REQUIRE(!va.empty());
        REQUIRE(va.front() == 0);
        REQUIRE(std::is_sorted(va.begin(), va.end()));
        for (int a = 1; a < kNumActions; ++a) {
            bool listed = std::find(va.begin(), va.end(), a) != va.end();
            REQUIRE(listed == (apply_action(rbs, a) != rbs));
        }
    }
}

TEST_CASE("encode_state normalizes by the user cap and Rb total") {
    State s{UserTuple{1, 2, 3}, RbAllocation{5, 6}};
    auto e = encode_state(s);
    REQUIRE(e[0] == Catch::Approx(0.1));
    REQUIRE(e[1] == Catch::Approx(0.2));
    REQUIRE(e[2] == Catch::Approx(0.3));
    REQUIRE(e[3] == Catch::Approx(5.0 / 17.0));
    REQUIRE(e[4] == Catch::Approx(6.0 / 17.0));

    auto b = encode_state(State{UserTuple{10, 0, 0}, RbAllocation{15, 1}});
    REQUIRE(b[0] == Catch::Approx(1.0));
    REQUIRE(b[3] == Catch::Approx(15.0 / 17.0));
    REQUIRE(b[4] == Catch::Approx(1.0 / 17.0));

    for (const auto& u : enumerate_user_tuples())
        for (double v : encode_state(State{u, RbAllocation{5, 6}})) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
}

TEST_CASE("user tuple enumeration matches the combinatorial count") {
    auto tuples = enumerate_user_tuples();
    REQUIRE(tuples.size() == 285);
    std::set<std::array<int, 3>> uniq;
    for (const auto& t : tuples) {
        REQUIRE(t.valid());
        REQUIRE(t.total() >= 1);
        REQUIRE(t.total() <= kMaxUsers);
        uniq.insert({t.n_mmtc, t.n_urllc, t.n_embb});
    }
    REQUIRE(uniq.size() == 285);
}

TEST_CASE("state_key is injective over the full state space") {
    std::set<std::uint64_t> keys;
    const auto allocs = enumerate_allocations();
    for (const auto& u : enumerate_user_tuples())
        for (const auto& rbs : allocs) keys.insert(state_key(State{u, rbs}));
    REQUIRE(keys.size() == 285u * 120u);
}

TEST_CASE("slice names round-trip") {
    for (Slice s : kSlices) REQUIRE(slice_from_name(slice_name(s)) == s);
    REQUIRE(slice_from_name("eMBB") == Slice::embb);
    REQUIRE_THROWS_AS(slice_from_name("bogus"), std::invalid_argument);
}
