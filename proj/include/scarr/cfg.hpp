#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "scarr/digest.hpp"

namespace scarr {

enum class EdgeKind : std::uint8_t {
  Call = 0x01,
  Return = 0x02,
  Branch = 0x03,
  Fallthrough = 0x04,
};

// Call, Return and Branch edges are significant: they appear in LoAs.
// Fallthrough edges shape the graph but never appear in a LoA.
bool edge_kind_significant(EdgeKind kind);
EdgeKind edge_kind_from_name(const std::string& name);
std::string edge_kind_name(EdgeKind kind);

enum class CheckpointKind : std::uint8_t {
  None = 0,
  ThreadBegin,
  ThreadEnd,
  ExitPoint,
  Virtual,
};

CheckpointKind checkpoint_kind_from_name(const std::string& name);
std::string checkpoint_kind_name(CheckpointKind kind);

struct Edge {
  std::string src;
  std::string dst;
  EdgeKind kind;

  auto operator<=>(const Edge&) const = default;
};

struct CfgNode {
  std::string label;
  CheckpointKind checkpoint = CheckpointKind::None;
};

enum class HandlerTrigger : std::uint8_t { Signal, Exception };

struct Handler {
  HandlerTrigger trigger;
  std::string entry;
};

class Cfg {
 public:
  Cfg() = default;
  Cfg(std::vector<CfgNode> nodes, std::vector<Edge> edges, std::string entry,
      std::vector<std::string> exits, std::vector<Handler> handlers = {});

  const std::vector<CfgNode>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::string& entry() const { return entry_; }
  const std::vector<std::string>& exits() const { return exits_; }
  const std::vector<Handler>& handlers() const { return handlers_; }

  bool has_node(const std::string& label) const;
  bool has_edge(const Edge& e) const;
  bool has_edge_between(const std::string& src, const std::string& dst) const;
  CheckpointKind checkpoint(const std::string& label) const;
  void set_checkpoint(const std::string& label, CheckpointKind kind);
  bool is_checkpoint(const std::string& label) const {
    return checkpoint(label) != CheckpointKind::None;
  }

  // Out-edges of a node, in document order.
  std::vector<Edge> out_edges(const std::string& label) const;

  // Destination of the fallthrough edge leaving a call site: the address
  // execution returns to once the callee finishes. Empty when the call site
  // has no fallthrough successor (tail call).
  std::optional<std::string> call_continuation(const std::string& label) const;

  // Labels of every node carrying a non-None annotation, in node order.
  std::vector<std::string> checkpoint_labels() const;

 private:
  std::size_t index_of(const std::string& label) const;

  std::vector<CfgNode> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> out_; // node index -> edge indices
  std::unordered_map<std::string, std::size_t> index_;
  std::string entry_;
  std::vector<std::string> exits_;
  std::vector<Handler> handlers_;
};

// Parse and validate the JSON CFG document format.
Cfg load_cfg(const std::string& json_text);
Cfg load_cfg_file(const std::string& path);
std::string cfg_to_json(const Cfg& cfg);

// Rule-based placement of virtual checkpoints: loop back-edge targets and
// call sites that can reach themselves through the call graph become
// checkpoints so every attestation fragment stays acyclic. Explicit
// annotations are preserved; only unannotated nodes gain Virtual.
Cfg identify_checkpoints(Cfg cfg);

struct Loa {
  std::vector<Edge> edges; // significant edges, in traversal order

  auto operator<=>(const Loa&) const = default;
};

// Canonical byte encoding of a LoA: for each edge, src bytes, 0x1F, dst
// bytes, 0x1E, one kind tag byte. Injective for labels free of the two
// separator bytes (enforced at CFG load).
std::vector<std::uint8_t> encode_loa(const Loa& loa);
Digest hash_loa(const Loa& loa, HashAlgo algo);

struct MeasurementKey {
  std::string cpA;
  std::string cpB;
  Digest loaHash;

  auto operator<=>(const MeasurementKey&) const = default;
};

struct LoaEntry {
  MeasurementKey key;
  Loa loa;
};

// Enumerate every checkpoint-to-checkpoint path fragment and its LoA.
// Results are sorted by (cpA, cpB, loaHash) and de-duplicated.
std::vector<LoaEntry> enumerate_loas(const Cfg& cfg, HashAlgo algo);

struct RetToRelation {
  Edge returnEdge;
  Edge callEdge;

  auto operator<=>(const RetToRelation&) const = default;
};

// Pair every return edge that appears in some LoA with the call edges it can
// legally answer, according to the call/return structure of the CFG.
std::vector<RetToRelation> compute_ret_to(const Cfg& cfg,
                                          const std::vector<LoaEntry>& entries);

} // namespace scarr
