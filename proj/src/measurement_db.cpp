#include "scarr/measurement_db.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "scarr/errors.hpp"

namespace scarr {

namespace {

constexpr char kMagic[8] = {'S', 'C', 'A', 'R', 'R', 'D', 'B', '1'};
constexpr std::size_t kMaxString = 1 << 20;
constexpr std::uint32_t kMaxCount = 1u << 26;

void put_u8(std::ostream& out, std::uint8_t v) {
  out.put(static_cast<char>(v));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
               static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
  out.write(b, 4);
}

void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_digest(std::ostream& out, const Digest& d) {
  out.write(reinterpret_cast<const char*>(d.data()),
            static_cast<std::streamsize>(d.size()));
}

std::uint8_t get_u8(std::istream& in) {
  int c = in.get();
  if (c == EOF) throw ValidationError("truncated measurements DB");
  return static_cast<std::uint8_t>(c);
}

std::uint32_t get_u32(std::istream& in) {
  char b[4];
  if (!in.read(b, 4)) throw ValidationError("truncated measurements DB");
  return static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[0])) |
         static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[1])) << 8 |
         static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[2])) << 16 |
         static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[3])) << 24;
}

std::string get_str(std::istream& in) {
  std::uint32_t n = get_u32(in);
  if (n > kMaxString) throw ValidationError("oversized string in measurements DB");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) {
    throw ValidationError("truncated measurements DB");
  }
  return s;
}

Digest get_digest(std::istream& in) {
  Digest d{};
  if (!in.read(reinterpret_cast<char*>(d.data()), d.size())) {
    throw ValidationError("truncated measurements DB");
  }
  return d;
}

void put_edge(std::ostream& out, const Edge& e) {
  put_str(out, e.src);
  put_str(out, e.dst);
  put_u8(out, static_cast<std::uint8_t>(e.kind));
}

Edge get_edge(std::istream& in) {
  Edge e;
  e.src = get_str(in);
  e.dst = get_str(in);
  std::uint8_t k = get_u8(in);
  if (k < 1 || k > 4) throw ValidationError("bad edge kind in measurements DB");
  e.kind = static_cast<EdgeKind>(k);
  return e;
}

} // namespace

MeasurementsDb MeasurementsDb::build(
    HashAlgo algo, Digest programId, std::vector<OfflineMeasurement> entries,
    std::vector<RetToRelation> retTo,
    std::map<std::string, CheckpointKind> checkpoints) {
  MeasurementsDb db;
  db.algo_ = algo;
  db.programId_ = programId;
  for (auto& m : entries) {
    MeasurementKey key = m.key;
    if (!db.entries_.emplace(key, std::move(m)).second) {
      throw ValidationError("duplicate measurement key for checkpoint pair " +
                            key.cpA + " -> " + key.cpB);
    }
  }
  for (const auto& [key, unused] : db.entries_) db.order_.push_back(key);
  for (auto& r : retTo) {
    auto& slot = db.retTo_[{r.returnEdge.src, r.returnEdge.dst}];
    if (std::find(slot.begin(), slot.end(), r.callEdge) == slot.end()) {
      slot.push_back(r.callEdge);
    }
  }
  for (auto& [unusedLabel, calls] : db.retTo_) std::sort(calls.begin(), calls.end());
  db.checkpoints_ = std::move(checkpoints);
  return db;
}

std::size_t MeasurementsDb::ret_to_size() const {
  std::size_t n = 0;
  for (const auto& [unused, calls] : retTo_) n += calls.size();
  return n;
}

const OfflineMeasurement* MeasurementsDb::lookup(const MeasurementKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

bool MeasurementsDb::ret_to_contains(const Edge& ret, const Edge& call) const {
  auto it = retTo_.find({ret.src, ret.dst});
  if (it == retTo_.end()) return false;
  return std::find(it->second.begin(), it->second.end(), call) != it->second.end();
}

CheckpointKind MeasurementsDb::checkpoint_kind(const std::string& label) const {
  auto it = checkpoints_.find(label);
  return it == checkpoints_.end() ? CheckpointKind::None : it->second;
}

std::vector<OfflineMeasurement> MeasurementsDb::entries() const {
  std::vector<OfflineMeasurement> out;
  out.reserve(entries_.size());
  for (const auto& [unused, m] : entries_) out.push_back(m);
  return out;
}

void MeasurementsDb::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put_u8(out, static_cast<std::uint8_t>(algo_));
  put_digest(out, programId_);

  put_u32(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [key, m] : entries_) {
    put_str(out, key.cpA);
    put_str(out, key.cpB);
    put_digest(out, key.loaHash);
    put_u32(out, static_cast<std::uint32_t>(m.callRetSubset.size()));
    for (const Edge& e : m.callRetSubset) put_edge(out, e);
  }

  put_u32(out, static_cast<std::uint32_t>(checkpoints_.size()));
  for (const auto& [label, kind] : checkpoints_) {
    put_str(out, label);
    put_u8(out, static_cast<std::uint8_t>(kind));
  }

  std::uint32_t pairs = 0;
  for (const auto& [unused, calls] : retTo_) {
    pairs += static_cast<std::uint32_t>(calls.size());
  }
  put_u32(out, pairs);
  for (const auto& [retKey, calls] : retTo_) {
    for (const Edge& call : calls) {
      put_edge(out, Edge{retKey.first, retKey.second, EdgeKind::Return});
      put_edge(out, call);
    }
  }
  if (!out) throw ValidationError("failed to write measurements DB");
}

MeasurementsDb MeasurementsDb::load(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError("not a measurements DB (bad magic)");
  }
  MeasurementsDb db;
  std::uint8_t algo = get_u8(in);
  if (algo != 0x01 && algo != 0x02) {
    throw ValidationError("unsupported hash algorithm id in measurements DB");
  }
  db.algo_ = static_cast<HashAlgo>(algo);
  db.programId_ = get_digest(in);

  std::uint32_t n = get_u32(in);
  if (n > kMaxCount) throw ValidationError("oversized measurements DB");
  for (std::uint32_t i = 0; i < n; ++i) {
    OfflineMeasurement m;
    m.key.cpA = get_str(in);
    m.key.cpB = get_str(in);
    m.key.loaHash = get_digest(in);
    std::uint32_t edges = get_u32(in);
    if (edges > kMaxCount) throw ValidationError("oversized measurements DB");
    for (std::uint32_t j = 0; j < edges; ++j) {
      m.callRetSubset.push_back(get_edge(in));
    }
    MeasurementKey key = m.key;
    if (!db.entries_.emplace(key, std::move(m)).second) {
      throw ValidationError("duplicate measurement key in measurements DB");
    }
  }
  for (const auto& [key, unused] : db.entries_) db.order_.push_back(key);

  std::uint32_t cps = get_u32(in);
  if (cps > kMaxCount) throw ValidationError("oversized measurements DB");
  for (std::uint32_t i = 0; i < cps; ++i) {
    std::string label = get_str(in);
    std::uint8_t kind = get_u8(in);
    if (kind > 4) throw ValidationError("bad checkpoint kind in measurements DB");
    db.checkpoints_[label] = static_cast<CheckpointKind>(kind);
  }

  std::uint32_t pairs = get_u32(in);
  if (pairs > kMaxCount) throw ValidationError("oversized measurements DB");
  for (std::uint32_t i = 0; i < pairs; ++i) {
    Edge ret = get_edge(in);
    Edge call = get_edge(in);
    auto& slot = db.retTo_[{ret.src, ret.dst}];
    if (std::find(slot.begin(), slot.end(), call) == slot.end()) {
      slot.push_back(call);
    }
  }
  for (auto& [unused, calls] : db.retTo_) std::sort(calls.begin(), calls.end());
  return db;
}

void MeasurementsDb::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open DB file for writing: " + path);
  save(out);
}

MeasurementsDb MeasurementsDb::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open DB file: " + path);
  return load(in);
}

bool MeasurementsDb::operator==(const MeasurementsDb& other) const {
  return algo_ == other.algo_ && programId_ == other.programId_ &&
         entries_ == other.entries_ && retTo_ == other.retTo_ &&
         checkpoints_ == other.checkpoints_;
}

MeasurementsDb build_db(const Cfg& cfg, const std::vector<LoaEntry>& entries,
                        const std::vector<RetToRelation>& retTo,
                        Digest programId, HashAlgo algo) {
  std::vector<OfflineMeasurement> offline;
  offline.reserve(entries.size());
  for (const auto& entry : entries) {
    OfflineMeasurement m;
    m.key = entry.key;
    for (const Edge& e : entry.loa.edges) {
      if (e.kind == EdgeKind::Call || e.kind == EdgeKind::Return) {
        m.callRetSubset.push_back(e);
      }
    }
    offline.push_back(std::move(m));
  }
  std::map<std::string, CheckpointKind> cps;
  for (const auto& label : cfg.checkpoint_labels()) {
    cps[label] = cfg.checkpoint(label);
  }
  return MeasurementsDb::build(algo, programId, std::move(offline), retTo,
                               std::move(cps));
}

} // namespace scarr
