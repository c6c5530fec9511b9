#include <gtest/gtest.h>

#include <random>

#include "cdrmob/core.hpp"
#include "support.hpp"

using namespace cdrmob;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

const YearCalendar k2008(2008);

Parsed<EventRecord> parse(std::string_view line) { return parse_event_line(line, ColumnLayout{}, k2008); }

RejectReason reject_of(const Parsed<EventRecord>& p) { return std::get<RejectReason>(p); }

}  // namespace

TEST(ParseEvent, CanonicalRow) {
  const auto p = parse("u1,u2,2008-03-14T13:05:00,T42,call,out");
  ASSERT_TRUE(std::holds_alternative<EventRecord>(p));
  const auto& r = std::get<EventRecord>(p);
  EXPECT_EQ(r.ego_id, "u1");
  EXPECT_EQ(r.peer_id, "u2");
  EXPECT_EQ(r.tower_id, "T42");
  EXPECT_EQ(r.kind, Kind::call);
  EXPECT_EQ(r.direction, Direction::outgoing);
  EXPECT_EQ(r.timestamp, testing_support::at(2008, 3, 14, 13, 5));
}

TEST(ParseEvent, SelfCallRejected) {
  EXPECT_EQ(reject_of(parse("u1,u1,2008-03-14T13:05:00,T42,call,out")), RejectReason::self_call);
}

TEST(ParseEvent, OutsideYearRejected) {
  EXPECT_EQ(reject_of(parse("u1,u2,2009-01-01T00:00:01,T42,sms,in")), RejectReason::outside_year);
}

TEST(ParseEvent, EachRejectCategory) {
  EXPECT_EQ(reject_of(parse("u1,u2,2008-03-14T13:05:00,T42")), RejectReason::missing_column);
  EXPECT_EQ(reject_of(parse(",u2,2008-03-14T13:05:00,T42,call,out")), RejectReason::empty_id);
  EXPECT_EQ(reject_of(parse("u1,u2,2008-02-30T13:05:00,T42,call,out")), RejectReason::bad_timestamp);
  EXPECT_EQ(reject_of(parse("u1,u2,yesterday,T42,call,out")), RejectReason::bad_timestamp);
  EXPECT_EQ(reject_of(parse("u1,u2,2008-03-14T13:05:00,T42,fax,out")), RejectReason::bad_kind);
  EXPECT_EQ(reject_of(parse("u1,u2,2008-03-14T13:05:00,T42,call,sideways")), RejectReason::bad_direction);
}

TEST(ParseEvent, LeapDayAndYearEdges) {
  EXPECT_TRUE(std::holds_alternative<EventRecord>(parse("a,b,2008-02-29T00:00:00,T,sms,in")));
  EXPECT_TRUE(std::holds_alternative<EventRecord>(parse("a,b,2008-12-31T23:59:59,T,sms,in")));
  EXPECT_EQ(reject_of(parse("a,b,2007-12-31T23:59:59,T,sms,in")), RejectReason::outside_year);
}

TEST(ParseEvent, TotalOnArbitraryInput) {
  std::mt19937 rng(3);
  const std::string alphabet = "ab,:-T0123456789 \tcallsmsinout";
  for (int k = 0; k < 5000; ++k) {
    std::string s;
    const int len = static_cast<int>(rng() % 60);
    for (int c = 0; c < len; ++c) s.push_back(alphabet[rng() % alphabet.size()]);
    const auto p = parse(s);  // must not throw
    EXPECT_EQ(p.index() == 0 || p.index() == 1, true);
  }
}

TEST(ParseEvent, RoundTrip) {
  std::mt19937 rng(11);
  for (int k = 0; k < 500; ++k) {
    EventRecord r;
    r.ego_id = "e" + std::to_string(rng() % 1000);
    r.peer_id = "p" + std::to_string(rng() % 1000);
    r.tower_id = "T" + std::to_string(rng() % 50);
    r.timestamp = k2008.start() + static_cast<std::int64_t>(rng() % (366u * 86400u));
    r.kind = rng() % 2 ? Kind::call : Kind::sms;
    r.direction = rng() % 2 ? Direction::incoming : Direction::outgoing;
    const auto line = format_event_line(r);
    const auto p = parse(line);
    ASSERT_TRUE(std::holds_alternative<EventRecord>(p)) << line;
    EXPECT_EQ(std::get<EventRecord>(p), r);
  }
}

TEST(ParseEvent, AlternativeLayout) {
  const auto layout = ColumnLayout::from_names("timestamp,ego_id,peer_id,tower_id,kind,direction");
  const auto p = parse_event_line("2008-05-01 08:00,u1,u2,T9,sms,in", layout, k2008);
  ASSERT_TRUE(std::holds_alternative<EventRecord>(p));
  EXPECT_EQ(std::get<EventRecord>(p).ego_id, "u1");
  EXPECT_EQ(std::get<EventRecord>(p).direction, Direction::incoming);
}

TEST(Towers, SingleTower) {
  TempDir d;
  write_file(d / "t.csv", "tower_id,lat,lon\nT1,40.0,22.0\n");
  const auto reg = load_towers(d / "t.csv");
  EXPECT_EQ(reg.size(), 1u);
  EXPECT_DOUBLE_EQ(reg.position(reg.find("T1")).lat, 40.0);
  EXPECT_EQ(reg.find("T2"), TowerRegistry::npos);
}

TEST(Towers, DuplicateIsError) {
  TempDir d;
  write_file(d / "t.csv", "T1,40.0,22.0\nT1,41.0,22.0\n");
  try {
    load_towers(d / "t.csv");
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
}

TEST(Towers, LatitudeOutOfRange) {
  TempDir d;
  write_file(d / "t.csv", "T1,95.0,22.0\n");
  try {
    load_towers(d / "t.csv");
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("latitude"), std::string::npos);
  }
}

TEST(Demographics, AgeBirthYearAndRejects) {
  TempDir d;
  write_file(d / "demo.csv", "ego_id,gender,age,birth_year\nu1,F,34,\nu2,M,,1990\nu3,X,34,\nu4,F,abc,\nu5,M,7,\n");
  const auto demo = load_demographics(d / "demo.csv", 2008);
  ASSERT_NE(demo.find("u1"), nullptr);
  EXPECT_EQ(*demo.find("u1"), (Person{Gender::female, 34}));
  ASSERT_NE(demo.find("u2"), nullptr);
  EXPECT_EQ(*demo.find("u2"), (Person{Gender::male, 18}));
  EXPECT_EQ(demo.find("u3"), nullptr);
  EXPECT_EQ(demo.rejects[RejectReason::unknown_gender], 1u);
  EXPECT_EQ(demo.rejects[RejectReason::bad_age], 1u);
  EXPECT_EQ(demo.rejects[RejectReason::age_out_of_range], 1u);
}

TEST(Demographics, HeaderlessThirdColumnIsAge) {
  TempDir d;
  write_file(d / "demo.csv", "u1,F,34\nu1,M,40\n");
  const auto demo = load_demographics(d / "demo.csv", 2008);
  EXPECT_EQ(demo.entries.size(), 1u);
  EXPECT_EQ(demo.rejects[RejectReason::duplicate_id], 1u);
}

TEST(AgeGroups, Boundaries) {
  EXPECT_EQ(age_group_of(18), AgeGroup::teen);
  EXPECT_EQ(age_group_of(19), AgeGroup::early_adult);
  EXPECT_EQ(age_group_of(35), AgeGroup::early_adult);
  EXPECT_EQ(age_group_of(36), AgeGroup::early_middle);
  EXPECT_EQ(age_group_of(45), AgeGroup::early_middle);
  EXPECT_EQ(age_group_of(46), AgeGroup::middle);
  EXPECT_EQ(age_group_of(55), AgeGroup::middle);
  EXPECT_EQ(age_group_of(56), AgeGroup::early_senior);
  EXPECT_EQ(age_group_of(65), AgeGroup::early_senior);
  EXPECT_EQ(age_group_of(66), AgeGroup::senior);
}

TEST(AgeGroups, PartitionValidDomain) {
  std::array<int, kAgeGroupCount> seen{};
  int previous = -1;
  for (int age = kMinAge; age <= kMaxAge; ++age) {
    const int g = static_cast<int>(age_group_of(age));
    EXPECT_GE(g, previous);  // contiguous and ordered
    previous = g;
    ++seen[static_cast<std::size_t>(g)];
  }
  for (int n : seen) EXPECT_GT(n, 0);
  EXPECT_THROW(age_group_of(9), std::out_of_range);
  EXPECT_THROW(age_group_of(111), std::out_of_range);
}

TEST(CivilTime, RoundTripDays) {
  for (std::int64_t z = -1000; z < 30000; z += 37) {
    const auto c = civil_from_days(z);
    EXPECT_EQ(days_from_civil(c.year, c.month, c.day), z);
  }
  EXPECT_EQ(weekday_from_days(days_from_civil(2008, 1, 1)), 1);  // Tuesday
  EXPECT_EQ(format_timestamp(testing_support::at(2008, 7, 4, 9, 3, 7)), "2008-07-04T09:03:07");
}
