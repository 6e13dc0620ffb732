#include "helpers.hpp"

#include <array>

#include "mpsim/controllers.hpp"

using namespace mpsim;
using testing::grid;

namespace {

// 1x2 grid: the eastbound entry of intersection 0 feeds the eastbound internal link,
// whose three movements leave through intersection 1.
struct TwoNode {
    Network net;
    LinkId entry;
    LinkId internal;
    MovementId into_internal;

    TwoNode() {
        GridParams g = grid(1, 2);
        net = build_grid(g);
        for (const Link& l : net.links) {
            if (l.kind == LinkKind::entry && l.heading == Heading::east) entry = l.id;
            if (l.kind == LinkKind::internal && l.heading == Heading::east) internal = l.id;
        }
        into_internal = testing::movement_of(net, entry, Turn::through);
    }
};

}  // namespace

TEST_SUITE("controllers") {

TEST_CASE("variant names parse in several spellings") {
    CHECK(variant_from_string("qmp") == Variant::q_mp);
    CHECK(variant_from_string("Q-MP") == Variant::q_mp);
    CHECK(variant_from_string("tt_mp") == Variant::tt_mp);
    CHECK(variant_from_string("D-MP") == Variant::d_mp);
    CHECK(variant_from_string("hmp") == Variant::h_mp);
    CHECK_THROWS_AS(variant_from_string("xmp"), ConfigError);
    for (Variant v : kAllVariants) CHECK(variant_from_string(to_string(v)) == v);
}

TEST_CASE("default periods per variant") {
    CHECK(default_period(Variant::q_mp) == 9.0);
    CHECK(default_period(Variant::tt_mp) == 9.0);
    CHECK(default_period(Variant::h_mp) == 5.0);
    CHECK(default_period(Variant::d_mp) == 5.0);
}

TEST_CASE("controller spec validation") {
    ControllerSpec s;
    CHECK_NOTHROW(validate(s, 1.0));
    s.period = 0.5;
    CHECK_THROWS_AS(validate(s, 1.0), ConfigError);
    s.period = 2.5;
    CHECK_THROWS_AS(validate(s, 1.0), ConfigError);
    CHECK_NOTHROW(validate(s, 0.5));
    s.period = 5.0;
    s.lost_time = -1.0;
    CHECK_THROWS_AS(validate(s, 1.0), ConfigError);
    s.lost_time = 3.0;
    CHECK_THROWS_AS(validate(s, 0.0), ConfigError);
}

TEST_CASE("Q-MP weight subtracts ratio-weighted downstream counts") {
    TwoNode t;
    // Override ratios on the internal link so two movements carry H = 0.5.
    auto& out = t.net.link(t.internal).outgoing;
    MovementId n1 = out[0], n2 = out[1], n3 = out[2];
    t.net.movements[n1.index()].turning_ratio = 0.5;
    t.net.movements[n2.index()].turning_ratio = 0.5;
    t.net.movements[n3.index()].turning_ratio = 0.0;
    std::vector<MetricWindow> w(t.net.movements.size());
    w[t.into_internal.index()].snapshot_count = 10;
    w[n1.index()].snapshot_count = 4;
    w[n2.index()].snapshot_count = 2;
    w[n3.index()].snapshot_count = 100;  // H = 0: no influence
    CHECK(weight(t.net, Variant::q_mp, t.into_internal, w) == doctest::Approx(7.0));
    const LocalWindows local = gather_local(t.net, IntersectionId{0}, w);
    CHECK(weight(t.net, Variant::q_mp, t.into_internal, local) == doctest::Approx(7.0));
}

TEST_CASE("each variant reads its own metric") {
    MetricWindow w;
    w.snapshot_count = 5;
    w.snapshot_stopped = 3;
    w.sum_travel_time = 40;
    w.sum_distance = 400;
    CHECK(movement_metric(Variant::q_mp, w, 20.0) == 5);
    CHECK(movement_metric(Variant::h_mp, w, 20.0) == 3);
    CHECK(movement_metric(Variant::tt_mp, w, 20.0) == 40);
    CHECK(movement_metric(Variant::d_mp, w, 20.0) == doctest::Approx(20.0));
    w.sum_distance = 801;  // faster than free flow by rounding: clamped
    CHECK(movement_metric(Variant::d_mp, w, 20.0) == 0.0);
}

TEST_CASE("movements into exit links have no downstream term") {
    const Network net = build_grid(grid(1, 1));
    std::vector<MetricWindow> w(net.movements.size());
    for (auto& x : w) x.snapshot_count = 3;
    for (const Movement& m : net.movements) CHECK(weight(net, Variant::q_mp, m.id, w) == 3.0);
}

TEST_CASE("weight errors: unknown movement, mismatched horizons, missing windows") {
    TwoNode t;
    std::vector<MetricWindow> w(t.net.movements.size());
    CHECK_THROWS_AS(weight(t.net, Variant::d_mp, MovementId{9999}, w), LookupError);
    w[t.net.link(t.internal).outgoing[0].index()].steps = 3;
    CHECK_THROWS_AS(weight(t.net, Variant::d_mp, t.into_internal, w), LookupError);
    std::vector<MetricWindow> short_w(2);
    CHECK_THROWS_AS(weight(t.net, Variant::q_mp, t.into_internal, short_w), LookupError);
}

TEST_CASE("local windows cover incoming and next-hop movements only") {
    TwoNode t;
    std::vector<MetricWindow> w(t.net.movements.size());
    const LocalWindows local = gather_local(t.net, IntersectionId{0}, w);
    CHECK(local.intersection() == IntersectionId{0});
    CHECK(local.contains(t.into_internal));
    for (MovementId next : t.net.link(t.internal).outgoing) CHECK(local.contains(next));
    // The westbound entry into intersection 1 is not adjacent to intersection 0.
    LinkId far_entry;
    for (const Link& l : t.net.links)
        if (l.kind == LinkKind::entry && l.heading == Heading::west) far_entry = l.id;
    const MovementId far = t.net.link(far_entry).outgoing.front();
    CHECK_FALSE(local.contains(far));
    CHECK_THROWS_AS((void)local.at(far), LookupError);
    // 12 own movements + 3 downstream of the internal link.
    CHECK(local.size() == 15);
}

TEST_CASE("pressure examples with and without the lost-time factor") {
    Network net = build_grid(grid(1, 1));
    const Phase one{0, {MovementId{0}}};
    const std::array<double, 1> w{7.0};
    ControllerSpec spec;
    spec.period = 5.0;
    spec.lost_time = 3.0;
    CHECK(pressure(net, one, w, saturation_factor(spec, true)) == doctest::Approx(3.5));
    CHECK(pressure(net, one, w, saturation_factor(spec, false)) == doctest::Approx(1.4));
}

TEST_CASE("saturation factor is floored at zero when T does not exceed the lost time") {
    ControllerSpec spec;
    spec.lost_time = 3.0;
    spec.period = 3.0;
    CHECK(saturation_factor(spec, false) == 0.0);
    spec.period = 1.0;
    CHECK(saturation_factor(spec, false) == 0.0);
    CHECK(saturation_factor(spec, true) == 1.0);
    spec.period = 9.0;
    CHECK(saturation_factor(spec, false) == doctest::Approx(6.0 / 9.0));
}

TEST_CASE("empty network: every phase pressure is zero") {
    const Network net = build_grid(grid(2, 2));
    std::vector<MetricWindow> w(net.movements.size());
    for (const auto& ix : net.intersections) {
        const auto local = gather_local(net, ix.id, w);
        for (Variant v : kAllVariants)
            for (double p : phase_pressures(net, local, ControllerSpec{v}, 0)) CHECK(p == 0.0);
    }
}

TEST_CASE("select_phase argmax and tie-breaking") {
    CHECK(select_phase(std::vector<double>{3.5, 1.4, 0.0, 0.0}, 0) == 0);
    CHECK(select_phase(std::vector<double>{0.0, 0.0, 0.0, 0.0}, 2) == 2);
    CHECK(select_phase(std::vector<double>{-1, -5, -2, -3}, 3) == 0);
    CHECK(select_phase(std::vector<double>{1, 2, 2, 0}, 0) == 1);
    CHECK(select_phase(std::vector<double>{1, 2, 2, 0}, 2) == 2);
    CHECK(select_phase(std::vector<double>{1, 2, 2, 0}, -1) == 1);
    CHECK_THROWS_AS(select_phase(std::vector<double>{}, 0), ConfigError);
}

TEST_CASE("update_windows accumulates and reset clears") {
    std::vector<MetricWindow> w(1);
    for (std::int64_t xs : {2, 2, 1}) {
        std::vector<StepRecord> r{{xs + 1, xs, static_cast<double>(xs + 1), 10.0}};
        update_windows(w, r);
    }
    CHECK(w[0].sum_stopped == 5);
    CHECK(w[0].sum_count == 8);
    CHECK(w[0].sum_travel_time == 8.0);  // dt * sum_count
    CHECK(w[0].sum_distance == 30.0);
    CHECK(w[0].steps == 3);
    std::vector<MovementCounts> c{{4, 1, 3}};
    take_snapshot(w, c);
    CHECK(w[0].snapshot_count == 4);
    CHECK(w[0].snapshot_stopped == 1);
    reset_windows(w);
    CHECK(w[0].sum_stopped == 0);
    CHECK(w[0].sum_count == 0);
    CHECK(w[0].snapshot_count == 0);
    CHECK(w[0].steps == 0);
}

TEST_CASE("argmax is invariant to a uniform positive scaling of the metric") {
    const Network net = build_grid(grid(2, 2));
    std::mt19937_64 g(99);
    std::uniform_real_distribution<double> u(0.0, 30.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<MetricWindow> w(net.movements.size()), scaled(net.movements.size());
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i].snapshot_count = std::floor(u(g));
            w[i].snapshot_stopped = std::floor(u(g) / 2);
            w[i].sum_travel_time = u(g) * 5;
            w[i].sum_distance = u(g) * 20;
            scaled[i] = w[i];
            const double k = 4.0;  // a power of two keeps the scaled sums exact
            scaled[i].snapshot_count *= k;
            scaled[i].snapshot_stopped *= k;
            scaled[i].sum_travel_time *= k;
            scaled[i].sum_distance *= k;
        }
        for (const auto& ix : net.intersections) {
            const PhaseIndex active = static_cast<PhaseIndex>(trial % 4);
            for (Variant v : kAllVariants) {
                const auto a = phase_pressures(net, gather_local(net, ix.id, w), ControllerSpec{v}, active);
                const auto b = phase_pressures(net, gather_local(net, ix.id, scaled), ControllerSpec{v}, active);
                CHECK(select_phase(a, active) == select_phase(b, active));
            }
        }
    }
}

TEST_CASE("phase pressures sum served-movement weights in ascending order") {
    const Network net = build_grid(grid(1, 1));
    std::vector<MetricWindow> w(net.movements.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i].snapshot_count = static_cast<double>(i);
    ControllerSpec spec{Variant::q_mp, 5.0, 3.0};
    const auto local = gather_local(net, IntersectionId{0}, w);
    const auto p = phase_pressures(net, local, spec, 1);
    REQUIRE(p.size() == 4);
    for (const Phase& ph : net.intersections[0].phases) {
        double expect = 0.0;
        const double f = ph.id == 1 ? 1.0 : 0.4;
        for (MovementId m : ph.served_movements) expect += 0.5 * f * static_cast<double>(m.value);
        CHECK(p[static_cast<std::size_t>(ph.id)] == doctest::Approx(expect));
    }
}

}  // TEST_SUITE
