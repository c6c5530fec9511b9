#pragma once

// CDR, tower and demographics records: types, parsing and validation.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "cdrmob/civil_time.hpp"
#include "cdrmob/geo.hpp"
#include "cdrmob/text.hpp"

namespace cdrmob {

enum class Kind : std::uint8_t { call, sms };
enum class Direction : std::uint8_t { incoming, outgoing };

inline std::string_view to_string(Kind k) noexcept { return k == Kind::call ? "call" : "sms"; }
inline std::string_view to_string(Direction d) noexcept {
  return d == Direction::incoming ? "in" : "out";
}

inline std::optional<Kind> parse_kind(std::string_view s) noexcept {
  if (iequals(s, "call") || iequals(s, "voice")) return Kind::call;
  if (iequals(s, "sms") || iequals(s, "text")) return Kind::sms;
  return std::nullopt;
}

inline std::optional<Direction> parse_direction(std::string_view s) noexcept {
  if (iequals(s, "in") || iequals(s, "incoming")) return Direction::incoming;
  if (iequals(s, "out") || iequals(s, "outgoing")) return Direction::outgoing;
  return std::nullopt;
}

struct EventRecord {
  std::string ego_id;
  std::string peer_id;
  std::int64_t timestamp = 0;  // local civil seconds, see civil_time.hpp
  std::string tower_id;
  Kind kind = Kind::call;
  Direction direction = Direction::outgoing;
  bool operator==(const EventRecord&) const = default;
};

enum class RejectReason : std::uint8_t {
  missing_column,
  empty_id,
  bad_timestamp,
  outside_year,
  self_call,
  bad_kind,
  bad_direction,
  unresolved_tower,
  unknown_gender,
  bad_age,
  age_out_of_range,
  duplicate_id,
};

inline constexpr std::size_t kRejectReasonCount = 12;

inline std::string_view to_string(RejectReason r) noexcept {
  constexpr std::array<std::string_view, kRejectReasonCount> kNames{
      "missing_column", "empty_id",         "bad_timestamp", "outside_year",
      "self_call",      "bad_kind",         "bad_direction", "unresolved_tower",
      "unknown_gender", "bad_age",          "age_out_of_range", "duplicate_id"};
  return kNames[static_cast<std::size_t>(r)];
}

// Per-reason reject tally. Mergeable.
struct RejectCounts {
  std::array<std::uint64_t, kRejectReasonCount> by_reason{};

  void add(RejectReason r, std::uint64_t n = 1) noexcept {
    by_reason[static_cast<std::size_t>(r)] += n;
  }
  std::uint64_t operator[](RejectReason r) const noexcept {
    return by_reason[static_cast<std::size_t>(r)];
  }
  std::uint64_t total() const noexcept {
    std::uint64_t t = 0;
    for (auto v : by_reason) t += v;
    return t;
  }
  RejectCounts& operator+=(const RejectCounts& o) noexcept {
    for (std::size_t k = 0; k < kRejectReasonCount; ++k) by_reason[k] += o.by_reason[k];
    return *this;
  }
  bool operator==(const RejectCounts&) const = default;
};

template <typename T>
using Parsed = std::variant<T, RejectReason>;

// Position of each field in a delimited CDR row.
struct ColumnLayout {
  std::size_t ego = 0;
  std::size_t peer = 1;
  std::size_t timestamp = 2;
  std::size_t tower = 3;
  std::size_t kind = 4;
  std::size_t direction = 5;
  char delimiter = ',';

  std::size_t width() const noexcept {
    return std::max({ego, peer, timestamp, tower, kind, direction}) + 1;
  }

  // Comma-separated field names in file order, e.g.
  // "timestamp,ego_id,peer_id,tower_id,kind,direction". Unknown names are skipped columns.
  static ColumnLayout from_names(std::string_view names) {
    ColumnLayout l;
    std::vector<std::string_view> cols;
    split_fields(names, ',', cols);
    std::array<bool, 6> seen{};
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto c = cols[k];
      auto set = [&](std::size_t& slot, int which) {
        slot = k;
        seen[static_cast<std::size_t>(which)] = true;
      };
      if (c == "ego_id") set(l.ego, 0);
      else if (c == "peer_id") set(l.peer, 1);
      else if (c == "timestamp") set(l.timestamp, 2);
      else if (c == "tower_id") set(l.tower, 3);
      else if (c == "kind") set(l.kind, 4);
      else if (c == "direction") set(l.direction, 5);
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
      throw std::invalid_argument(
          "column layout must name ego_id, peer_id, timestamp, tower_id, kind, direction");
    return l;
  }
};

// Stateless; `fields` is scratch space reused between calls.
inline Parsed<EventRecord> parse_event_line(std::string_view line, const ColumnLayout& layout,
                                            const YearCalendar& year,
                                            std::vector<std::string_view>& fields) {
  split_fields(line, layout.delimiter, fields);
  if (fields.size() < layout.width()) return RejectReason::missing_column;
  EventRecord r;
  const auto ego = fields[layout.ego];
  const auto peer = fields[layout.peer];
  const auto tower = fields[layout.tower];
  if (ego.empty() || peer.empty() || tower.empty()) return RejectReason::empty_id;
  const auto ts = parse_timestamp(fields[layout.timestamp]);
  if (!ts) return RejectReason::bad_timestamp;
  if (!year.contains(*ts)) return RejectReason::outside_year;
  if (ego == peer) return RejectReason::self_call;
  const auto kind = parse_kind(fields[layout.kind]);
  if (!kind) return RejectReason::bad_kind;
  const auto dir = parse_direction(fields[layout.direction]);
  if (!dir) return RejectReason::bad_direction;
  r.ego_id.assign(ego);
  r.peer_id.assign(peer);
  r.tower_id.assign(tower);
  r.timestamp = *ts;
  r.kind = *kind;
  r.direction = *dir;
  return r;
}

inline Parsed<EventRecord> parse_event_line(std::string_view line, const ColumnLayout& layout,
                                            const YearCalendar& year) {
  std::vector<std::string_view> fields;
  return parse_event_line(line, layout, year, fields);
}

// True when `line` looks like a header row for `layout`.
inline bool is_cdr_header(std::string_view line, const ColumnLayout& layout) {
  std::vector<std::string_view> fields;
  split_fields(line, layout.delimiter, fields);
  if (fields.size() <= layout.timestamp) return false;
  return iequals(fields[layout.timestamp], "timestamp") ||
         (fields.size() > layout.ego && iequals(fields[layout.ego], "ego_id"));
}

inline constexpr std::string_view kCdrHeader = "ego_id,peer_id,timestamp,tower_id,kind,direction";

// Canonical layout: ego_id,peer_id,timestamp,tower_id,kind,direction.
inline void append_event_line(std::string& out, std::string_view ego, std::string_view peer,
                              std::int64_t ts, std::string_view tower, Kind kind, Direction dir) {
  out.append(ego);
  out.push_back(',');
  out.append(peer);
  out.push_back(',');
  out.append(format_timestamp(ts));
  out.push_back(',');
  out.append(tower);
  out.push_back(',');
  out.append(to_string(kind));
  out.push_back(',');
  out.append(to_string(dir));
  out.push_back('\n');
}

inline std::string format_event_line(const EventRecord& r) {
  std::string s;
  append_event_line(s, r.ego_id, r.peer_id, r.timestamp, r.tower_id, r.kind, r.direction);
  s.pop_back();
  return s;
}

// ---------------------------------------------------------------------------
// Towers

// Tower id -> coordinate. Indices follow lexicographic id order, so comparing
// indices is the same as comparing ids.
class TowerRegistry {
 public:
  static constexpr std::uint32_t npos = 0xffffffffu;

  TowerRegistry() = default;

  // Throws DataError on duplicate ids or invalid coordinates.
  explicit TowerRegistry(std::vector<std::pair<std::string, LatLon>> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (k > 0 && entries[k].first == entries[k - 1].first)
        throw DataError("duplicate tower id: " + entries[k].first);
      if (!valid_coordinate(entries[k].second)) {
        const LatLon p = entries[k].second;
        throw DataError(std::string(p.lat < -90 || p.lat > 90 ? "latitude" : "longitude") +
                        " out of range for tower " + entries[k].first);
      }
    }
    ids_.reserve(entries.size());
    positions_.reserve(entries.size());
    for (auto& [id, pos] : entries) {
      index_.emplace(id, static_cast<std::uint32_t>(ids_.size()));
      ids_.push_back(std::move(id));
      positions_.push_back(pos);
    }
  }

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  std::uint32_t find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? npos : it->second;
  }
  const std::string& id(std::uint32_t k) const { return ids_[k]; }
  LatLon position(std::uint32_t k) const { return positions_[k]; }
  std::span<const LatLon> positions() const noexcept { return positions_; }

 private:
  std::vector<std::string> ids_;
  std::vector<LatLon> positions_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Rows are tower_id,lat,lon with an optional header. Every problem is fatal.
inline TowerRegistry load_towers(const std::string& path) {
  auto in = open_input(path);
  std::vector<std::pair<std::string, LatLon>> entries;
  std::string line;
  std::vector<std::string_view> f;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    split_fields(line, ',', f);
    if (lineno == 1 && f.size() >= 2 && !parse_double(f[1])) continue;  // header
    if (f.size() < 3 || f[0].empty())
      throw DataError(path + ":" + std::to_string(lineno) + ": expected tower_id,lat,lon");
    const auto lat = parse_double(f[1]);
    const auto lon = parse_double(f[2]);
    if (!lat || !lon)
      throw DataError(path + ":" + std::to_string(lineno) + ": unparseable coordinate");
    entries.emplace_back(std::string(f[0]), LatLon{*lat, *lon});
  }
  return TowerRegistry(std::move(entries));
}

// ---------------------------------------------------------------------------
// Demographics

enum class Gender : std::uint8_t { female, male };

inline std::string_view to_string(Gender g) noexcept { return g == Gender::female ? "F" : "M"; }

inline std::optional<Gender> parse_gender(std::string_view s) noexcept {
  if (iequals(s, "f") || iequals(s, "female")) return Gender::female;
  if (iequals(s, "m") || iequals(s, "male")) return Gender::male;
  return std::nullopt;
}

inline constexpr int kMinAge = 10;
inline constexpr int kMaxAge = 110;

struct Person {
  Gender gender = Gender::female;
  int age = 0;
  bool operator==(const Person&) const = default;
};

struct Demographics {
  std::map<std::string, Person, std::less<>> entries;
  RejectCounts rejects;

  const Person* find(std::string_view ego) const {
    auto it = entries.find(ego);
    return it == entries.end() ? nullptr : &it->second;
  }
};

// Rows are ego_id,gender,age. A header may rename the third column to
// birth_year, or carry both age and birth_year columns (either may be empty).
// Without a header the third column is an age. Bad rows are counted, not fatal.
inline Demographics load_demographics(const std::string& path, int analysis_year) {
  auto in = open_input(path);
  Demographics demo;
  std::string line;
  std::vector<std::string_view> f;
  std::optional<std::size_t> age_col = 2;
  std::optional<std::size_t> birth_col;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    split_fields(line, ',', f);
    if (lineno == 1 && f.size() >= 2 && iequals(f[0], "ego_id")) {
      age_col.reset();
      for (std::size_t k = 0; k < f.size(); ++k) {
        if (iequals(f[k], "age")) age_col = k;
        if (iequals(f[k], "birth_year")) birth_col = k;
      }
      if (!age_col && !birth_col) throw DataError(path + ": header names neither age nor birth_year");
      continue;
    }
    if (f.size() < 3 || f[0].empty()) {
      demo.rejects.add(RejectReason::missing_column);
      continue;
    }
    const auto gender = parse_gender(f[1]);
    if (!gender) {
      demo.rejects.add(RejectReason::unknown_gender);
      continue;
    }
    std::optional<int> age;
    if (age_col && *age_col < f.size() && !f[*age_col].empty()) {
      age = parse_int<int>(f[*age_col]);
    } else if (birth_col && *birth_col < f.size() && !f[*birth_col].empty()) {
      if (auto by = parse_int<int>(f[*birth_col])) age = analysis_year - *by;
    }
    if (!age) {
      demo.rejects.add(RejectReason::bad_age);
      continue;
    }
    if (*age < kMinAge || *age > kMaxAge) {
      demo.rejects.add(RejectReason::age_out_of_range);
      continue;
    }
    if (!demo.entries.emplace(std::string(f[0]), Person{*gender, *age}).second)
      demo.rejects.add(RejectReason::duplicate_id);
  }
  return demo;
}

enum class AgeGroup : std::uint8_t { teen, early_adult, early_middle, middle, early_senior, senior };

inline constexpr std::size_t kAgeGroupCount = 6;

inline std::string_view to_string(AgeGroup g) noexcept {
  constexpr std::array<std::string_view, kAgeGroupCount> kNames{
      "teen", "early_adult", "early_middle", "middle", "early_senior", "senior"};
  return kNames[static_cast<std::size_t>(g)];
}

// <=18, 19-35, 36-45, 46-55, 56-65, >=66.
inline AgeGroup age_group_of(int age) {
  if (age < kMinAge || age > kMaxAge)
    throw std::out_of_range("age outside [10, 110]: " + std::to_string(age));
  if (age <= 18) return AgeGroup::teen;
  if (age <= 35) return AgeGroup::early_adult;
  if (age <= 45) return AgeGroup::early_middle;
  if (age <= 55) return AgeGroup::middle;
  if (age <= 65) return AgeGroup::early_senior;
  return AgeGroup::senior;
}

// ---------------------------------------------------------------------------

// Interned string tokens. Ids are assigned in first-seen order.
class IdTable {
 public:
  std::uint32_t intern(std::string_view s) {
    auto it = index_.find(s);
    if (it != index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(s);
    index_.emplace(names_.back(), id);
    return id;
  }

  std::optional<std::uint32_t> find(std::string_view s) const {
    auto it = index_.find(s);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& name(std::uint32_t id) const { return names_[id]; }
  std::size_t size() const noexcept { return names_.size(); }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> index_;
};

}  // namespace cdrmob
