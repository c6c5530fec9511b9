#pragma once

// Ingestion: CDR parsing into a compact event store, the reciprocity filter,
// and assembly of per-individual time-ordered timelines.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdrmob/core.hpp"
#include "cdrmob/parallel.hpp"

namespace cdrmob {

// Interned event. `tower` is a TowerRegistry index or TowerRegistry::npos.
struct Event {
  std::int64_t timestamp = 0;
  std::uint32_t ego = 0;
  std::uint32_t peer = 0;
  std::uint32_t tower = TowerRegistry::npos;
  Kind kind = Kind::call;
  Direction direction = Direction::outgoing;
  bool operator==(const Event&) const = default;
};

struct EventStore {
  IdTable ids;  // ego and peer tokens share one table
  std::vector<Event> events;
  std::uint64_t rows_read = 0;
  RejectCounts rejects;
};

struct IngestOptions {
  ColumnLayout layout{};
  int year = 2008;
  unsigned threads = 1;
  std::size_t chunk_lines = 1 << 16;
};

// Reads a CDR stream. Lines are parsed in parallel chunks and interned in file
// order, so the store is identical for every thread count.
inline EventStore read_cdr(std::istream& in, const TowerRegistry& towers,
                           const IngestOptions& opt) {
  EventStore store;
  const YearCalendar year(opt.year);
  std::vector<std::string> lines;
  std::vector<Parsed<EventRecord>> parsed;
  std::string line;
  bool first = true;
  while (true) {
    lines.clear();
    while (lines.size() < opt.chunk_lines && std::getline(in, line)) {
      if (trim(line).empty()) continue;
      if (first) {
        first = false;
        if (is_cdr_header(line, opt.layout)) continue;
      }
      lines.push_back(std::move(line));
    }
    if (lines.empty()) break;
    parsed.assign(lines.size(), RejectReason::missing_column);
    parallel_ranges(lines.size(), opt.threads, [&](std::size_t b, std::size_t e) {
      std::vector<std::string_view> scratch;
      for (std::size_t k = b; k < e; ++k)
        parsed[k] = parse_event_line(lines[k], opt.layout, year, scratch);
    });
    store.rows_read += lines.size();
    for (auto& p : parsed) {
      if (auto* r = std::get_if<RejectReason>(&p)) {
        store.rejects.add(*r);
        continue;
      }
      auto& rec = std::get<EventRecord>(p);
      store.events.push_back(Event{rec.timestamp, store.ids.intern(rec.ego_id),
                                   store.ids.intern(rec.peer_id), towers.find(rec.tower_id),
                                   rec.kind, rec.direction});
    }
  }
  return store;
}

inline EventStore read_cdr_file(const std::string& path, const TowerRegistry& towers,
                                const IngestOptions& opt) {
  auto in = open_input(path);
  return read_cdr(in, towers, opt);
}

// ---------------------------------------------------------------------------
// Reciprocity

constexpr std::uint64_t pack_pair(std::uint32_t a, std::uint32_t b) noexcept {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Directed edge caller -> callee carried by an event row.
constexpr std::uint64_t directed_edge(const Event& e) noexcept {
  return e.direction == Direction::outgoing ? pack_pair(e.ego, e.peer) : pack_pair(e.peer, e.ego);
}

// Unordered pairs {a, b} with at least one a->b and one b->a event, calls and
// SMS counted alike.
class ReciprocityIndex {
 public:
  ReciprocityIndex() = default;

  static ReciprocityIndex build(std::span<const Event> events, unsigned threads = 1) {
    std::vector<std::uint64_t> edges(events.size());
    // Sorted per shard, then merged: the result only depends on the edge multiset.
    const unsigned shards = std::max(1u, std::min<unsigned>(threads, 64));
    std::vector<std::size_t> bounds;
    const std::size_t chunk = (events.size() + shards - 1) / shards;
    for (unsigned s = 0; s <= shards; ++s) bounds.push_back(std::min(events.size(), s * chunk));
    parallel_for(shards, threads, [&](std::size_t s) {
      for (std::size_t k = bounds[s]; k < bounds[s + 1]; ++k) edges[k] = directed_edge(events[k]);
      std::sort(edges.begin() + static_cast<std::ptrdiff_t>(bounds[s]),
                edges.begin() + static_cast<std::ptrdiff_t>(bounds[s + 1]));
    });
    for (unsigned s = 1; s < shards; ++s)
      std::inplace_merge(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(bounds[s]),
                         edges.begin() + static_cast<std::ptrdiff_t>(bounds[s + 1]));
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    ReciprocityIndex idx;
    for (std::uint64_t e : edges) {
      const auto a = static_cast<std::uint32_t>(e >> 32);
      const auto b = static_cast<std::uint32_t>(e & 0xffffffffu);
      if (a < b && std::binary_search(edges.begin(), edges.end(), pack_pair(b, a)))
        idx.pairs_.push_back(e);
    }
    return idx;
  }

  bool contains(std::uint32_t a, std::uint32_t b) const {
    if (a > b) std::swap(a, b);
    return std::binary_search(pairs_.begin(), pairs_.end(), pack_pair(a, b));
  }

  // Sorted (min << 32 | max) keys.
  std::span<const std::uint64_t> pairs() const noexcept { return pairs_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }

 private:
  std::vector<std::uint64_t> pairs_;
};

enum class ReciprocityRule {
  per_pair,    // survives with at least one reciprocal relationship (default)
  in_and_out,  // weaker: at least one incoming and one outgoing event
};

struct IngestStats {
  std::uint64_t rows_read = 0;
  RejectCounts rows_rejected;
  std::uint64_t individuals_total = 0;
  std::uint64_t individuals_removed_unilateral = 0;
  std::uint64_t individuals_without_home = 0;
  std::uint64_t events_kept = 0;
};

inline nlohmann::ordered_json to_json(const IngestStats& s) {
  nlohmann::ordered_json rej = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < kRejectReasonCount; ++k)
    rej[std::string(to_string(static_cast<RejectReason>(k)))] = s.rows_rejected.by_reason[k];
  nlohmann::ordered_json j;
  j["rows_read"] = s.rows_read;
  j["rows_rejected_total"] = s.rows_rejected.total();
  j["rows_rejected_by_reason"] = rej;
  j["individuals_total"] = s.individuals_total;
  j["individuals_removed_unilateral"] = s.individuals_removed_unilateral;
  j["individuals_without_home"] = s.individuals_without_home;
  j["events_kept"] = s.events_kept;
  return j;
}

struct FilterResult {
  std::vector<Event> events;
  std::vector<std::uint32_t> removed;  // ego ids, ascending
  std::uint64_t individuals_total = 0;
};

// Keeps every event of each surviving individual, drops everything of the rest.
inline FilterResult filter_unilateral(std::vector<Event> events, const ReciprocityIndex& index,
                                      ReciprocityRule rule = ReciprocityRule::per_pair) {
  std::uint32_t max_id = 0;
  for (const Event& e : events) max_id = std::max({max_id, e.ego, e.peer});
  const std::size_t n = events.empty() ? 0 : static_cast<std::size_t>(max_id) + 1;
  std::vector<std::uint8_t> is_ego(n, 0), keep(n, 0);
  for (const Event& e : events) is_ego[e.ego] = 1;
  if (rule == ReciprocityRule::per_pair) {
    for (std::uint64_t p : index.pairs()) {
      keep[static_cast<std::size_t>(p >> 32)] = 1;
      keep[static_cast<std::size_t>(p & 0xffffffffu)] = 1;
    }
  } else {
    std::vector<std::uint8_t> dirs(n, 0);
    for (const Event& e : events) dirs[e.ego] |= e.direction == Direction::incoming ? 1 : 2;
    for (std::size_t k = 0; k < n; ++k) keep[k] = dirs[k] == 3;
  }
  FilterResult out;
  for (std::size_t k = 0; k < n; ++k) {
    if (!is_ego[k]) continue;
    ++out.individuals_total;
    if (!keep[k]) out.removed.push_back(static_cast<std::uint32_t>(k));
  }
  std::erase_if(events, [&](const Event& e) { return !keep[e.ego]; });
  out.events = std::move(events);
  return out;
}

// ---------------------------------------------------------------------------
// Timelines

struct TimelineEvent {
  std::int64_t timestamp = 0;
  LatLon position{};
  std::uint32_t tower = 0;
  Kind kind = Kind::call;
  Direction direction = Direction::outgoing;
  bool operator==(const TimelineEvent&) const = default;
};

// Tie-break for equal timestamps: tower id, then kind, then direction.
inline bool timeline_order(const TimelineEvent& a, const TimelineEvent& b) noexcept {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  if (a.tower != b.tower) return a.tower < b.tower;
  if (a.kind != b.kind) return a.kind < b.kind;
  return a.direction < b.direction;
}

// All timelines of a corpus, egos in lexicographic id order. Downstream code
// refers to an individual by its position here.
class Timelines {
 public:
  Timelines() : towers_(std::make_shared<TowerRegistry>()) {}
  Timelines(std::vector<std::string> egos, std::vector<std::size_t> offsets,
            std::vector<TimelineEvent> events, std::shared_ptr<const TowerRegistry> towers)
      : egos_(std::move(egos)),
        offsets_(std::move(offsets)),
        events_(std::move(events)),
        towers_(std::move(towers)) {}

  std::size_t size() const noexcept { return egos_.size(); }
  bool empty() const noexcept { return egos_.empty(); }
  const std::string& ego_id(std::size_t k) const { return egos_[k]; }
  std::span<const std::string> ego_ids() const noexcept { return egos_; }
  std::span<const TimelineEvent> events(std::size_t k) const {
    return std::span<const TimelineEvent>(events_).subspan(offsets_[k],
                                                          offsets_[k + 1] - offsets_[k]);
  }
  std::span<const TimelineEvent> all_events() const noexcept { return events_; }
  std::size_t event_count() const noexcept { return events_.size(); }
  const TowerRegistry& towers() const noexcept { return *towers_; }
  std::shared_ptr<const TowerRegistry> towers_ptr() const noexcept { return towers_; }

  // Position of an ego id, if present.
  std::optional<std::size_t> find(std::string_view ego) const {
    auto it = std::lower_bound(egos_.begin(), egos_.end(), ego,
                               [](const std::string& a, std::string_view b) { return a < b; });
    if (it == egos_.end() || *it != ego) return std::nullopt;
    return static_cast<std::size_t>(it - egos_.begin());
  }

  // The timelines whose keep flag is set, order preserved.
  Timelines subset(std::span<const std::uint8_t> keep) const {
    std::vector<std::string> egos;
    std::vector<std::size_t> offsets{0};
    std::vector<TimelineEvent> events;
    for (std::size_t k = 0; k < size(); ++k) {
      if (!keep[k]) continue;
      egos.push_back(egos_[k]);
      const auto ev = this->events(k);
      events.insert(events.end(), ev.begin(), ev.end());
      offsets.push_back(events.size());
    }
    return Timelines(std::move(egos), std::move(offsets), std::move(events), towers_);
  }

 private:
  std::vector<std::string> egos_;
  std::vector<std::size_t> offsets_{0};
  std::vector<TimelineEvent> events_;
  std::shared_ptr<const TowerRegistry> towers_;
};

// Builds sorted timelines. Events whose tower did not resolve are dropped and
// counted in `rejects`.
inline Timelines assemble_timelines(std::vector<Event> events, const IdTable& ids,
                                    std::shared_ptr<const TowerRegistry> towers,
                                    RejectCounts& rejects, unsigned threads = 1) {
  const auto before = events.size();
  std::erase_if(events, [](const Event& e) { return e.tower == TowerRegistry::npos; });
  rejects.add(RejectReason::unresolved_tower, before - events.size());

  // Egos ranked by id string.
  std::vector<std::uint32_t> egos;
  {
    std::vector<std::uint8_t> seen(ids.size(), 0);
    for (const Event& e : events)
      if (!seen[e.ego]) {
        seen[e.ego] = 1;
        egos.push_back(e.ego);
      }
  }
  std::sort(egos.begin(), egos.end(),
            [&](std::uint32_t a, std::uint32_t b) { return ids.name(a) < ids.name(b); });
  std::vector<std::uint32_t> rank(ids.size(), 0);
  for (std::size_t k = 0; k < egos.size(); ++k) rank[egos[k]] = static_cast<std::uint32_t>(k);

  // Stable counting sort by ego keeps input order within an ego.
  std::vector<std::size_t> offsets(egos.size() + 1, 0);
  for (const Event& e : events) ++offsets[rank[e.ego] + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<TimelineEvent> out(events.size());
  {
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const Event& e : events)
      out[cursor[rank[e.ego]]++] =
          TimelineEvent{e.timestamp, towers->position(e.tower), e.tower, e.kind, e.direction};
  }
  events.clear();
  events.shrink_to_fit();
  parallel_for(egos.size(), threads, [&](std::size_t k) {
    std::stable_sort(out.begin() + static_cast<std::ptrdiff_t>(offsets[k]),
                     out.begin() + static_cast<std::ptrdiff_t>(offsets[k + 1]), timeline_order);
  });
  std::vector<std::string> names;
  names.reserve(egos.size());
  for (auto id : egos) names.push_back(ids.name(id));
  return Timelines(std::move(names), std::move(offsets), std::move(out), std::move(towers));
}

struct IngestResult {
  Timelines timelines;
  IngestStats stats;
  std::vector<std::string> removed_unilateral;  // ascending ids
};

struct FilterOptions {
  bool enabled = true;
  ReciprocityRule rule = ReciprocityRule::per_pair;
};

// Reciprocity index, filter and timeline assembly over a parsed store.
inline IngestResult ingest(EventStore store, std::shared_ptr<const TowerRegistry> towers,
                           const FilterOptions& filter, unsigned threads) {
  IngestResult r;
  r.stats.rows_read = store.rows_read;
  r.stats.rows_rejected = store.rejects;
  std::vector<Event> kept;
  if (filter.enabled) {
    const auto index = ReciprocityIndex::build(store.events, threads);
    FilterResult f = filter_unilateral(std::move(store.events), index, filter.rule);
    r.stats.individuals_total = f.individuals_total;
    r.stats.individuals_removed_unilateral = f.removed.size();
    for (auto id : f.removed) r.removed_unilateral.push_back(store.ids.name(id));
    std::sort(r.removed_unilateral.begin(), r.removed_unilateral.end());
    kept = std::move(f.events);
  } else {
    kept = std::move(store.events);
    std::vector<std::uint8_t> seen(store.ids.size(), 0);
    for (const Event& e : kept)
      if (!seen[e.ego]) {
        seen[e.ego] = 1;
        ++r.stats.individuals_total;
      }
  }
  r.timelines = assemble_timelines(std::move(kept), store.ids, std::move(towers),
                                   r.stats.rows_rejected, threads);
  r.stats.events_kept = r.timelines.event_count();
  return r;
}

// ---------------------------------------------------------------------------
// Spool: a directory of CSV parts, each holding whole timelines in ego order,
// plus spool.json listing the parts. Row format:
//   ego_id,timestamp,tower_id,lat,lon,kind,direction

inline constexpr std::string_view kSpoolHeader = "ego_id,timestamp,tower_id,lat,lon,kind,direction";

inline std::vector<std::string> write_spool(const Timelines& tl, const std::filesystem::path& dir,
                                            std::size_t parts = 4) {
  std::filesystem::create_directories(dir);
  parts = std::max<std::size_t>(1, parts);
  const std::size_t target = (tl.event_count() + parts - 1) / parts;
  std::vector<std::string> written;
  nlohmann::ordered_json manifest;
  manifest["format"] = "cdrmob-spool-csv";
  manifest["version"] = 1;
  manifest["columns"] = kSpoolHeader;
  manifest["parts"] = nlohmann::ordered_json::array();
  std::size_t ego = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    char name[32];
    std::snprintf(name, sizeof name, "part-%05zu.csv", p);
    const auto path = dir / name;
    CsvWriter w(path.string());
    w.line(kSpoolHeader);
    std::size_t rows = 0, egos = 0;
    while (ego < tl.size() && (p + 1 == parts || rows < target)) {
      for (const TimelineEvent& e : tl.events(ego)) {
        auto& b = w.buffer();
        b.append(tl.ego_id(ego));
        b.push_back(',');
        b.append(format_timestamp(e.timestamp));
        b.push_back(',');
        b.append(tl.towers().id(e.tower));
        b.push_back(',');
        append_double(b, e.position.lat);
        b.push_back(',');
        append_double(b, e.position.lon);
        b.push_back(',');
        b.append(to_string(e.kind));
        b.push_back(',');
        b.append(to_string(e.direction));
        b.push_back('\n');
        w.maybe_flush();
        ++rows;
      }
      ++ego;
      ++egos;
    }
    w.close();
    manifest["parts"].push_back({{"file", name}, {"rows", rows}, {"individuals", egos}});
    written.push_back(path.string());
  }
  const auto mpath = dir / "spool.json";
  CsvWriter m(mpath.string());
  m.line(manifest.dump(2));
  written.push_back(mpath.string());
  return written;
}

inline Timelines read_spool(const std::filesystem::path& dir) {
  std::ifstream min(dir / "spool.json");
  if (!min) throw DataError("not a spool directory (missing spool.json): " + dir.string());
  const auto manifest = nlohmann::json::parse(min, nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("parts"))
    throw DataError("malformed spool.json in " + dir.string());

  struct Row {
    std::string ego;
    std::int64_t ts;
    std::string tower;
    LatLon pos;
    Kind kind;
    Direction dir;
  };
  std::vector<Row> rows;
  std::vector<std::string_view> f;
  for (const auto& part : manifest["parts"]) {
    const auto path = dir / part["file"].get<std::string>();
    auto in = open_input(path.string());
    std::string line;
    bool header = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (header) {
        header = false;
        continue;
      }
      split_fields(line, ',', f);
      const auto where = [&] { return path.string() + ":" + std::to_string(lineno); };
      if (f.size() != 7) throw DataError(where() + ": expected 7 spool columns");
      const auto ts = parse_timestamp(f[1]);
      const auto lat = parse_double(f[3]);
      const auto lon = parse_double(f[4]);
      const auto kind = parse_kind(f[5]);
      const auto d = parse_direction(f[6]);
      if (!ts || !lat || !lon || !kind || !d) throw DataError(where() + ": malformed spool row");
      rows.push_back({std::string(f[0]), *ts, std::string(f[2]), {*lat, *lon}, *kind, *d});
    }
  }
  std::map<std::string, LatLon, std::less<>> tower_pos;
  for (const Row& r : rows) {
    auto [it, fresh] = tower_pos.emplace(r.tower, r.pos);
    if (!fresh && !(it->second == r.pos))
      throw DataError("spool gives tower " + r.tower + " two positions");
  }
  std::vector<std::pair<std::string, LatLon>> entries(tower_pos.begin(), tower_pos.end());
  auto towers = std::make_shared<TowerRegistry>(std::move(entries));
  std::vector<std::string> egos;
  std::vector<std::size_t> offsets{0};
  std::vector<TimelineEvent> events;
  events.reserve(rows.size());
  for (const Row& r : rows) {
    if (egos.empty() || egos.back() != r.ego) {
      if (!egos.empty()) {
        if (r.ego < egos.back()) throw DataError("spool egos are not in ascending order");
        offsets.push_back(events.size());
      }
      egos.push_back(r.ego);
    }
    TimelineEvent e{r.ts, r.pos, towers->find(r.tower), r.kind, r.dir};
    if (events.size() > offsets.back() && timeline_order(e, events.back()))
      throw DataError("spool timeline for " + r.ego + " is not time-ordered");
    events.push_back(e);
  }
  if (!egos.empty()) offsets.push_back(events.size());
  return Timelines(std::move(egos), std::move(offsets), std::move(events), std::move(towers));
}

}  // namespace cdrmob
