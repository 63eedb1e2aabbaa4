#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scarr/cfg.hpp"
#include "scarr/digest.hpp"

namespace scarr {

struct OfflineMeasurement {
  MeasurementKey key;
  // Call/return edges of the LoA, in order; what the shadow-stack check
  // replays. Branch edges are dropped: they matter only through the hash.
  std::vector<Edge> callRetSubset;

  bool operator==(const OfflineMeasurement&) const = default;
};

// ret_to relation indexed by return edge (src, dst).
using RetToIndex =
    std::map<std::pair<std::string, std::string>, std::vector<Edge>>;

class MeasurementsDb {
 public:
  MeasurementsDb() = default;

  static MeasurementsDb build(HashAlgo algo, Digest programId,
                              std::vector<OfflineMeasurement> entries,
                              std::vector<RetToRelation> retTo,
                              std::map<std::string, CheckpointKind> checkpoints);

  HashAlgo algo() const { return algo_; }
  const Digest& program_id() const { return programId_; }
  std::size_t size() const { return order_.size(); }
  std::size_t ret_to_size() const;

  const OfflineMeasurement* lookup(const MeasurementKey& key) const;
  bool ret_to_contains(const Edge& ret, const Edge& call) const;
  const RetToIndex& ret_to() const { return retTo_; }
  CheckpointKind checkpoint_kind(const std::string& label) const;
  const std::map<std::string, CheckpointKind>& checkpoints() const {
    return checkpoints_;
  }

  // Entries in deterministic (key-sorted) order.
  std::vector<OfflineMeasurement> entries() const;

  void save(std::ostream& out) const;
  static MeasurementsDb load(std::istream& in);
  void save_file(const std::string& path) const;
  static MeasurementsDb load_file(const std::string& path);

  bool operator==(const MeasurementsDb& other) const;

 private:
  HashAlgo algo_ = HashAlgo::Blake2b256;
  Digest programId_{};
  std::map<MeasurementKey, OfflineMeasurement> entries_;
  std::vector<MeasurementKey> order_;
  RetToIndex retTo_;
  std::map<std::string, CheckpointKind> checkpoints_;
};

// Assemble the verifier-side database from the offline pipeline's outputs:
// enumerated LoAs, the ret_to relation, and the CFG's checkpoint table.
MeasurementsDb build_db(const Cfg& cfg, const std::vector<LoaEntry>& entries,
                        const std::vector<RetToRelation>& retTo,
                        Digest programId, HashAlgo algo);

} // namespace scarr
