#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "tissuelink/protocol/delta.hpp"
#include "tissuelink/protocol/message.hpp"

namespace proto = tissuelink::protocol;
using proto::json;
using tissuelink::testing::Gen;

namespace {

proto::ClientId id_of(char c) { return *proto::ClientId::parse(std::string(32, c)); }

}  // namespace

// --- identifiers -----------------------------------------------------------

TEST(SessionCode, ParsesOnlyFourDigits) {
  EXPECT_TRUE(proto::SessionCode::parse("0420"));
  EXPECT_TRUE(proto::SessionCode::parse("9999"));
  EXPECT_FALSE(proto::SessionCode::parse("420"));
  EXPECT_FALSE(proto::SessionCode::parse("04200"));
  EXPECT_FALSE(proto::SessionCode::parse("04a0"));
  EXPECT_FALSE(proto::SessionCode::parse("-420"));
  EXPECT_EQ(proto::SessionCode::from_index(7).str(), "0007");
  EXPECT_EQ(proto::SessionCode::from_index(9999).index(), 9999);
}

TEST(ClientId, HexRenderingAndOrdering) {
  auto id = proto::ClientId::from_words(0x1, 0xabcdef);
  EXPECT_EQ(id.str().size(), 32u);
  EXPECT_EQ(id.str(), "00000000000000010000000000abcdef");
  EXPECT_FALSE(proto::ClientId::parse("00000000000000010000000000ABCDEF"));
  EXPECT_LT(id_of('1'), id_of('a'));
}

// --- paths -----------------------------------------------------------------

TEST(PathGrammar, AcceptsClosedSet) {
  for (const char* p : {"channels.0.color", "channels.12.window", "channels.3.visible",
                        "channels.3.opacity", "transform", "selection", "hover", "measurements.m-1"}) {
    EXPECT_TRUE(proto::parse_path(p)) << p;
  }
  for (const char* p : {"channels.01.color", "channels.-1.color", "channels.x.color",
                        "channels.0.gamma", "channels.0", "measurements.", "measurements.a.b",
                        "transform.t", "annotation", ""}) {
    EXPECT_FALSE(proto::parse_path(p)) << p;
  }
}

// --- encode / decode -------------------------------------------------------

TEST(Codec, PingMatchesSchemaEcho) {
  auto m = proto::make_message(proto::Ping{7});
  EXPECT_EQ(json::parse(proto::encode_message(m)),
            json::parse(R"({"v":1,"kind":"ping","seq":0,"payload":{"nonce":7}})"));
}

TEST(Codec, DeltaRoundTrip) {
  proto::StateDelta d;
  d.updates.push_back(proto::updates::color(3, {10, 20, 30}));
  auto m = proto::make_message(proto::DeltaPayload{d}, proto::SessionCode::parse("0420"),
                               id_of('b'), 42);
  auto back = proto::decode_message(proto::encode_message(m));
  ASSERT_TRUE(back);
  EXPECT_EQ(*back, m);
  EXPECT_EQ(back->kind(), proto::Kind::delta);
}

TEST(Codec, FullSyncOfEmptyState) {
  auto m = proto::make_message(proto::FullSync{0, proto::SessionState{}});
  auto j = json::parse(proto::encode_message(m));
  const auto& st = j["payload"]["state"];
  EXPECT_TRUE(st["channels"].empty());
  EXPECT_TRUE(st["measurements"].empty());
  EXPECT_TRUE(st["selection"].empty());
  EXPECT_TRUE(st["hover"].is_null());
  EXPECT_EQ(st["transform"], json::parse(R"({"t":[0.0,0.0,0.0],"q":[1.0,0.0,0.0,0.0],"s":1.0})"));
  auto back = proto::decode_message(j.dump());
  ASSERT_TRUE(back);
  EXPECT_EQ(*back, m);
}

TEST(Codec, DecodeErrors) {
  auto kind_of = [](std::string_view text) { return proto::decode_message(text).error().kind; };
  using K = proto::DecodeErrorKind;
  EXPECT_EQ(kind_of("not json"), K::malformed);
  EXPECT_EQ(kind_of("[1,2]"), K::malformed);
  EXPECT_EQ(kind_of(R"({"v":2,"kind":"ping","seq":0,"payload":{"nonce":1}})"), K::bad_version);
  EXPECT_EQ(kind_of(R"({"v":1,"kind":"teleport","seq":0,"payload":{}})"), K::unknown_kind);
  EXPECT_EQ(kind_of(R"({"v":1,"kind":"ping","seq":0,"payload":{}})"), K::schema);
  EXPECT_EQ(kind_of(R"({"v":1,"kind":"ping","seq":0,"payload":{"nonce":-1}})"), K::schema);
  EXPECT_EQ(kind_of(R"({"v":1,"kind":"ping","payload":{"nonce":1}})"), K::schema);
  EXPECT_EQ(kind_of(R"({"v":1,"kind":"join_request","seq":0,"payload":{"role":"pilot"}})"), K::schema);
  EXPECT_EQ(kind_of(R"({"v":1,"kind":"leave","seq":0,"session":"12a4","payload":{}})"), K::schema);
  EXPECT_EQ(kind_of(R"({"v":1,"kind":"leave","seq":0,"payload":{},"extra":1})"), K::schema);
  EXPECT_EQ(kind_of(R"({"v":1,"kind":"delta","seq":0,"payload":{"updates":[{"path":1,"value":2}]}})"),
            K::schema);
}

TEST(Codec, RandomMessagesRoundTrip) {
  Gen gen(11);
  for (int i = 0; i < 2000; ++i) {
    auto m = gen.message();
    auto back = proto::decode_message(proto::encode_message(m));
    ASSERT_TRUE(back) << proto::encode_message(m) << " -> " << back.error().detail;
    ASSERT_EQ(*back, m) << proto::encode_message(m);
  }
}

// --- apply_delta -----------------------------------------------------------

TEST(ApplyDelta, EmptyDeltaIsIdentity) {
  Gen gen(1);
  auto s = gen.state();
  auto r = proto::apply_delta(s, {}, 99, id_of('a'));
  EXPECT_EQ(r.state, s);
  EXPECT_TRUE(r.violations.empty());
}

TEST(ApplyDelta, OlderSeqIsDropped) {
  proto::SessionState s;
  s = proto::apply_delta(s, {{proto::updates::opacity(0, 0.5)}}, 9, id_of('a')).state;
  auto r = proto::apply_delta(s, {{proto::updates::opacity(0, 0.25)}}, 7, id_of('f'));
  EXPECT_EQ(r.state, s);
  EXPECT_TRUE(r.written.empty());
}

TEST(ApplyDelta, EqualSeqTieBrokenBySender) {
  proto::SessionState s;
  s = proto::apply_delta(s, {{proto::updates::opacity(0, 0.5)}}, 5, id_of('b')).state;
  auto lower = proto::apply_delta(s, {{proto::updates::opacity(0, 0.1)}}, 5, id_of('a'));
  EXPECT_EQ(lower.state.channels.at(0).opacity, 0.5);
  auto higher = proto::apply_delta(s, {{proto::updates::opacity(0, 0.9)}}, 5, id_of('c'));
  EXPECT_EQ(higher.state.channels.at(0).opacity, 0.9);
  EXPECT_EQ(higher.state.lastSeq.at("channels.0.opacity").sender, id_of('c'));
}

TEST(ApplyDelta, InvalidUpdatesSkippedOthersApplied) {
  proto::StateDelta d{{proto::updates::window(0, 10, 5), proto::updates::visible(0, false),
                       {"transform", json(nullptr)}, {"channels.0.opacity", json(1.5)},
                       {"bogus.path", json(1)}, proto::updates::visible(0, true)}};
  auto r = proto::apply_delta({}, d, 1, id_of('a'));
  ASSERT_EQ(r.violations.size(), 5u);
  EXPECT_EQ(r.violations[0], (proto::Violation{"channels.0.window", "window_order"}));
  EXPECT_EQ(r.violations[1], (proto::Violation{"transform", "null_not_deletable"}));
  EXPECT_EQ(r.violations[2], (proto::Violation{"channels.0.opacity", "opacity_range"}));
  EXPECT_EQ(r.violations[3], (proto::Violation{"bogus.path", "unknown_path"}));
  EXPECT_EQ(r.violations[4], (proto::Violation{"channels.0.visible", "duplicate_path"}));
  EXPECT_FALSE(r.state.channels.at(0).visible);
  EXPECT_EQ(r.state.channels.at(0).windowHi, proto::ChannelState{}.windowHi);
  EXPECT_FALSE(r.state.lastSeq.count("channels.0.window"));
  EXPECT_TRUE(proto::validate_state(r.state).empty());
}

TEST(ApplyDelta, TombstonesOnDeletablePaths) {
  proto::SessionState s;
  auto m = proto::Measurement::between("m1", {0, 0, 0}, {3, 4, 0}, true);
  s = proto::apply_delta(s, {{proto::updates::measurement(m), proto::updates::hover("e1")}}, 1,
                         id_of('a')).state;
  ASSERT_EQ(s.measurements.at("m1").lengthUm, 5.0);
  s = proto::apply_delta(s, {{proto::updates::delete_measurement("m1"), proto::updates::hover(std::nullopt)}},
                         2, id_of('a')).state;
  EXPECT_TRUE(s.measurements.empty());
  EXPECT_FALSE(s.hover);
  EXPECT_EQ(s.lastSeq.at("measurements.m1").seq, 2u);
}

TEST(ApplyDelta, ZeroSeqRejected) {
  auto r = proto::apply_delta({}, {{proto::updates::visible(0, true)}}, 0, id_of('a'));
  EXPECT_EQ(r.violations.size(), 1u);
  EXPECT_TRUE(r.state.channels.empty());
}

TEST(Admission, FinalizedMeasurementsAcceptOnlyDeletion) {
  proto::SessionState s;
  auto m = proto::Measurement::between("m1", {0, 0, 0}, {1, 0, 0}, true);
  s = proto::apply_delta(s, {{proto::updates::measurement(m)}}, 1, id_of('a')).state;
  auto edit = proto::Measurement::between("m1", {0, 0, 0}, {2, 0, 0}, true);
  EXPECT_EQ(proto::check_admission(s, proto::updates::measurement(edit))->rule, "finalized_immutable");
  EXPECT_FALSE(proto::check_admission(s, proto::updates::delete_measurement("m1")));
  EXPECT_FALSE(proto::check_admission(s, proto::updates::measurement(
                                             proto::Measurement::between("m2", {}, {}, false))));
}

// Brute-force oracle: sort the multiset by (seq, sender) and replay in order.
TEST(ApplyDelta, ArrivalOrderMatchesSortedReplay) {
  Gen gen(2024);
  struct Stamped {
    std::uint64_t seq;
    proto::ClientId sender;
    proto::StateDelta delta;
  };
  std::vector<Stamped> items;
  std::vector<proto::ClientId> senders{gen.client_id(), gen.client_id(), gen.client_id()};
  for (int i = 0; i < 100; ++i) {
    proto::StateDelta d{{gen.update()}};
    items.push_back({static_cast<std::uint64_t>(gen.uniform_int(1, 60)),
                     senders[static_cast<std::size_t>(gen.uniform_int(0, 2))], d});
  }
  // Equal (seq, sender) pairs touching one path are ambiguous; make stamps unique.
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return std::tie(a.seq, a.sender) < std::tie(b.seq, b.sender);
  });
  items.erase(std::unique(items.begin(), items.end(),
                          [](const auto& a, const auto& b) { return a.seq == b.seq && a.sender == b.sender; }),
              items.end());

  proto::SessionState oracle;
  for (const auto& it : items) oracle = proto::apply_delta(oracle, it.delta, it.seq, it.sender).state;

  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(items.begin(), items.end(), gen.rng());
    proto::SessionState s;
    for (const auto& it : items) s = proto::apply_delta(s, it.delta, it.seq, it.sender).state;
    ASSERT_EQ(s, oracle);
  }
}

TEST(ApplyDelta, NeverProducesInvalidState) {
  Gen gen(5);
  proto::SessionState s;
  for (int i = 1; i <= 500; ++i) {
    proto::StateDelta d = gen.delta();
    // Mix in garbage values on valid paths.
    if (gen.coin(0.3)) d.updates.push_back({"channels.1.window", json::array({5.0, 1.0})});
    if (gen.coin(0.3)) d.updates.push_back({"transform", json{{"t", {0, 0, 0}}, {"q", {2, 0, 0, 0}}, {"s", 1}}});
    if (gen.coin(0.3)) d.updates.push_back({"measurements.bad", json{{"a", {0, 0, 0}}, {"b", {1, 0, 0}}, {"lengthUm", 2.0}, {"finalized", true}}});
    s = proto::apply_delta(std::move(s), d, static_cast<std::uint64_t>(i), gen.client_id()).state;
    ASSERT_TRUE(proto::validate_state(s).empty());
  }
}

// --- diff_states -----------------------------------------------------------

TEST(DiffStates, IdenticalStatesGiveEmptyDelta) {
  Gen gen(3);
  auto s = gen.state();
  EXPECT_TRUE(proto::diff_states(s, s).empty());
}

TEST(DiffStates, TransformOnlyChange) {
  Gen gen(4);
  auto a = gen.state();
  auto b = a;
  b.transform = gen.transform();
  auto d = proto::diff_states(a, b);
  ASSERT_EQ(d.updates.size(), 1u);
  EXPECT_EQ(d.updates[0].path, "transform");
}

TEST(DiffStates, ApplyingDiffReachesTarget) {
  Gen gen(6);
  for (int i = 0; i < 300; ++i) {
    auto a = gen.state(gen.uniform_int(0, 15));
    auto b = gen.state(gen.uniform_int(0, 15));
    for (const auto& [id, ch] : a.channels) b.channels.try_emplace(id, ch);  // channels are never deleted
    auto d = proto::diff_states(a, b);
    auto r = proto::apply_delta(a, d, 1'000'000, gen.client_id());
    ASSERT_TRUE(r.violations.empty());
    ASSERT_TRUE(proto::values_equal(r.state, b));
    ASSERT_TRUE(proto::diff_states(r.state, b).empty());
  }
}

// --- validate_state --------------------------------------------------------

TEST(ValidateState, DefaultIsValid) { EXPECT_TRUE(proto::validate_state({}).empty()); }

TEST(ValidateState, OpacityOutOfRange) {
  proto::SessionState s;
  s.channels[0].opacity = 1.5;
  auto v = proto::validate_state(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].path, "channels.0.opacity");
}

TEST(ValidateState, MeasurementLengthMismatch) {
  proto::SessionState s;
  auto m = proto::Measurement::between("m", {0, 0, 0}, {3, 4, 0}, false);
  m.lengthUm = 5.0 * (1 + 1e-8);
  s.measurements["m"] = m;
  auto v = proto::validate_state(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], (proto::Violation{"measurements.m", "length_mismatch"}));
  s.measurements["m"].lengthUm = 5.0 * (1 + 1e-10);
  EXPECT_TRUE(proto::validate_state(s).empty());
}

TEST(ValidateState, TransformInvariants) {
  proto::SessionState s;
  s.transform.scale = 2e4;
  s.transform.rotation = {1.0, 0.01, 0, 0};
  auto v = proto::validate_state(s);
  ASSERT_EQ(v.size(), 2u);
}
