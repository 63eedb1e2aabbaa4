#include "scarr/cfg.hpp"

#include <algorithm>
#include <tuple>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "scarr/errors.hpp"

namespace scarr {

using json = nlohmann::json;

bool edge_kind_significant(EdgeKind kind) {
  return kind != EdgeKind::Fallthrough;
}

EdgeKind edge_kind_from_name(const std::string& name) {
  if (name == "call") return EdgeKind::Call;
  if (name == "return") return EdgeKind::Return;
  if (name == "branch") return EdgeKind::Branch;
  if (name == "fallthrough") return EdgeKind::Fallthrough;
  throw ValidationError("unknown edge kind: " + name);
}

std::string edge_kind_name(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Call: return "call";
    case EdgeKind::Return: return "return";
    case EdgeKind::Branch: return "branch";
    case EdgeKind::Fallthrough: return "fallthrough";
  }
  throw SpecError("bad edge kind value");
}

CheckpointKind checkpoint_kind_from_name(const std::string& name) {
  if (name == "none") return CheckpointKind::None;
  if (name == "thread_begin") return CheckpointKind::ThreadBegin;
  if (name == "thread_end") return CheckpointKind::ThreadEnd;
  if (name == "exit_point") return CheckpointKind::ExitPoint;
  if (name == "virtual") return CheckpointKind::Virtual;
  throw ValidationError("unknown checkpoint kind: " + name);
}

std::string checkpoint_kind_name(CheckpointKind kind) {
  switch (kind) {
    case CheckpointKind::None: return "none";
    case CheckpointKind::ThreadBegin: return "thread_begin";
    case CheckpointKind::ThreadEnd: return "thread_end";
    case CheckpointKind::ExitPoint: return "exit_point";
    case CheckpointKind::Virtual: return "virtual";
  }
  throw SpecError("bad checkpoint kind value");
}

namespace {

void check_label(const std::string& label) {
  if (label.empty()) throw ValidationError("empty node label");
  for (char c : label) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u <= 0x20 || u == 0x1e || u == 0x1f || u == 0x7f) {
      throw ValidationError("node label contains whitespace or control byte: " +
                            label);
    }
  }
}

} // namespace

Cfg::Cfg(std::vector<CfgNode> nodes, std::vector<Edge> edges, std::string entry,
         std::vector<std::string> exits, std::vector<Handler> handlers)
    : nodes_(std::move(nodes)),
      edges_(std::move(edges)),
      entry_(std::move(entry)),
      exits_(std::move(exits)),
      handlers_(std::move(handlers)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    check_label(nodes_[i].label);
    if (!index_.emplace(nodes_[i].label, i).second) {
      throw ValidationError("duplicate node label: " + nodes_[i].label);
    }
  }

  out_.assign(nodes_.size(), {});
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    auto s = index_.find(e.src);
    auto d = index_.find(e.dst);
    if (s == index_.end()) throw ValidationError("edge source not a node: " + e.src);
    if (d == index_.end()) throw ValidationError("edge target not a node: " + e.dst);
    if (!seen.emplace(e.src, e.dst).second) {
      throw ValidationError("duplicate edge: " + e.src + " -> " + e.dst);
    }
    out_[s->second].push_back(i);
  }

  if (!index_.count(entry_)) throw ValidationError("entry is not a node: " + entry_);
  if (checkpoint(entry_) != CheckpointKind::ThreadBegin) {
    throw ValidationError("entry node must be annotated thread_begin: " + entry_);
  }
  for (const auto& x : exits_) {
    if (!index_.count(x)) throw ValidationError("exit is not a node: " + x);
    if (checkpoint(x) != CheckpointKind::ThreadEnd) {
      throw ValidationError("exit node must be annotated thread_end: " + x);
    }
  }
  for (const auto& h : handlers_) {
    if (!index_.count(h.entry)) {
      throw ValidationError("handler entry is not a node: " + h.entry);
    }
  }

  // A call site returns to the target of its fallthrough successor; more than
  // one makes the continuation ambiguous.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    bool hasCall = false;
    int ft = 0;
    for (std::size_t ei : out_[i]) {
      if (edges_[ei].kind == EdgeKind::Call) hasCall = true;
      if (edges_[ei].kind == EdgeKind::Fallthrough) ++ft;
    }
    if (hasCall && ft > 1) {
      throw ValidationError("call site has multiple fallthrough successors: " +
                            nodes_[i].label);
    }
  }
}

std::size_t Cfg::index_of(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw SpecError("unknown node label: " + label);
  return it->second;
}

bool Cfg::has_node(const std::string& label) const {
  return index_.count(label) != 0;
}

bool Cfg::has_edge(const Edge& e) const {
  return std::find(edges_.begin(), edges_.end(), e) != edges_.end();
}

bool Cfg::has_edge_between(const std::string& src, const std::string& dst) const {
  return std::any_of(edges_.begin(), edges_.end(), [&](const Edge& e) {
    return e.src == src && e.dst == dst;
  });
}

CheckpointKind Cfg::checkpoint(const std::string& label) const {
  return nodes_[index_of(label)].checkpoint;
}

void Cfg::set_checkpoint(const std::string& label, CheckpointKind kind) {
  nodes_[index_of(label)].checkpoint = kind;
}

std::vector<Edge> Cfg::out_edges(const std::string& label) const {
  std::vector<Edge> out;
  for (std::size_t ei : out_[index_of(label)]) out.push_back(edges_[ei]);
  return out;
}

std::optional<std::string> Cfg::call_continuation(const std::string& label) const {
  for (std::size_t ei : out_[index_of(label)]) {
    if (edges_[ei].kind == EdgeKind::Fallthrough) return edges_[ei].dst;
  }
  return std::nullopt;
}

std::vector<std::string> Cfg::checkpoint_labels() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_) {
    if (n.checkpoint != CheckpointKind::None) out.push_back(n.label);
  }
  return out;
}

Cfg load_cfg(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("CFG document is not valid JSON: ") +
                          e.what());
  }
  try {
    std::vector<CfgNode> nodes;
    for (const auto& n : doc.at("nodes")) {
      CfgNode node;
      node.label = n.at("id").get<std::string>();
      if (n.contains("checkpoint")) {
        node.checkpoint =
            checkpoint_kind_from_name(n.at("checkpoint").get<std::string>());
      }
      nodes.push_back(std::move(node));
    }
    std::vector<Edge> edges;
    for (const auto& e : doc.at("edges")) {
      edges.push_back(Edge{e.at("src").get<std::string>(),
                           e.at("dst").get<std::string>(),
                           edge_kind_from_name(e.at("kind").get<std::string>())});
    }
    std::string entry = doc.at("entry").get<std::string>();
    std::vector<std::string> exits;
    for (const auto& x : doc.at("exits")) exits.push_back(x.get<std::string>());
    std::vector<Handler> handlers;
    if (doc.contains("handlers")) {
      for (const auto& h : doc.at("handlers")) {
        std::string trig = h.at("trigger").get<std::string>();
        HandlerTrigger t;
        if (trig == "signal") {
          t = HandlerTrigger::Signal;
        } else if (trig == "exception") {
          t = HandlerTrigger::Exception;
        } else {
          throw ValidationError("unknown handler trigger: " + trig);
        }
        handlers.push_back(Handler{t, h.at("entry").get<std::string>()});
      }
    }
    return Cfg(std::move(nodes), std::move(edges), std::move(entry),
               std::move(exits), std::move(handlers));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("CFG document is malformed: ") + e.what());
  }
}

Cfg load_cfg_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open CFG file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_cfg(buf.str());
}

std::string cfg_to_json(const Cfg& cfg) {
  json doc;
  doc["nodes"] = json::array();
  for (const auto& n : cfg.nodes()) {
    doc["nodes"].push_back(
        {{"id", n.label}, {"checkpoint", checkpoint_kind_name(n.checkpoint)}});
  }
  doc["edges"] = json::array();
  for (const auto& e : cfg.edges()) {
    doc["edges"].push_back(
        {{"src", e.src}, {"dst", e.dst}, {"kind", edge_kind_name(e.kind)}});
  }
  doc["entry"] = cfg.entry();
  doc["exits"] = cfg.exits();
  doc["handlers"] = json::array();
  for (const auto& h : cfg.handlers()) {
    doc["handlers"].push_back(
        {{"trigger", h.trigger == HandlerTrigger::Signal ? "signal" : "exception"},
         {"entry", h.entry}});
  }
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Checkpoint identification

Cfg identify_checkpoints(Cfg cfg) {
  const auto& nodes = cfg.nodes();
  const auto& edges = cfg.edges();

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i].label] = i;

  std::vector<std::vector<std::size_t>> out(nodes.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    out[index[edges[i].src]].push_back(i);
  }

  std::vector<std::string> candidates;
  std::unordered_set<std::string> candidateSet;
  auto add_candidate = [&](const std::string& label) {
    if (candidateSet.insert(label).second) candidates.push_back(label);
  };

  // Rule 1: targets of loop back edges. A depth-first walk over the whole
  // graph finds edges that land on a node still on the walk's own stack.
  // Call edges are excluded: re-entering a function is the business of rule
  // 2, not a loop in the caller.
  {
    enum : std::uint8_t { White, Gray, Black };
    std::vector<std::uint8_t> color(nodes.size(), White);

    auto dfs_from = [&](std::size_t root) {
      if (color[root] != White) return;
      std::vector<std::pair<std::size_t, std::size_t>> stack; // node, out pos
      color[root] = Gray;
      stack.emplace_back(root, 0);
      while (!stack.empty()) {
        auto& [u, pos] = stack.back();
        if (pos == out[u].size()) {
          color[u] = Black;
          stack.pop_back();
          continue;
        }
        const Edge& e = edges[out[u][pos++]];
        std::size_t v = index[e.dst];
        if (color[v] == White) {
          color[v] = Gray;
          stack.emplace_back(v, 0);
        } else if (color[v] == Gray && e.kind != EdgeKind::Call) {
          add_candidate(e.dst);
        }
      }
    };

    dfs_from(index[cfg.entry()]);
    for (const auto& h : cfg.handlers()) dfs_from(index[h.entry]);
    for (std::size_t i = 0; i < nodes.size(); ++i) dfs_from(i);
  }

  // Rule 2: call sites whose callee can reach the enclosing function again
  // through the call graph (direct or mutual recursion).
  {
    // Function entries: program entry, handler entries, every call target.
    std::vector<std::string> fnEntries;
    std::unordered_set<std::string> fnSet;
    auto add_fn = [&](const std::string& label) {
      if (fnSet.insert(label).second) fnEntries.push_back(label);
    };
    add_fn(cfg.entry());
    for (const auto& h : cfg.handlers()) add_fn(h.entry);
    for (const auto& e : edges) {
      if (e.kind == EdgeKind::Call) add_fn(e.dst);
    }

    // Body of a function: closure over branch/fallthrough edges from its
    // entry. Call and return edges leave the function.
    auto body_of = [&](const std::string& fn) {
      std::unordered_set<std::size_t> seen;
      std::vector<std::size_t> work{index[fn]};
      seen.insert(index[fn]);
      while (!work.empty()) {
        std::size_t u = work.back();
        work.pop_back();
        for (std::size_t ei : out[u]) {
          const Edge& e = edges[ei];
          if (e.kind != EdgeKind::Branch && e.kind != EdgeKind::Fallthrough)
            continue;
          std::size_t v = index[e.dst];
          if (seen.insert(v).second) work.push_back(v);
        }
      }
      return seen;
    };

    std::unordered_map<std::string, std::unordered_set<std::size_t>> bodies;
    for (const auto& fn : fnEntries) bodies[fn] = body_of(fn);

    // Call graph: fn -> callees, via call edges rooted in fn's body.
    std::unordered_map<std::string, std::unordered_set<std::string>> callees;
    for (const auto& e : edges) {
      if (e.kind != EdgeKind::Call) continue;
      std::size_t srcIdx = index[e.src];
      for (const auto& fn : fnEntries) {
        if (bodies[fn].count(srcIdx)) callees[fn].insert(e.dst);
      }
    }

    auto reaches = [&](const std::string& from, const std::string& to) {
      std::unordered_set<std::string> seen{from};
      std::vector<std::string> work{from};
      while (!work.empty()) {
        std::string u = work.back();
        work.pop_back();
        if (u == to) return true;
        for (const auto& v : callees[u]) {
          if (seen.insert(v).second) work.push_back(v);
        }
      }
      return false;
    };

    for (const auto& e : edges) {
      if (e.kind != EdgeKind::Call) continue;
      std::size_t srcIdx = index[e.src];
      for (const auto& fn : fnEntries) {
        if (!bodies[fn].count(srcIdx)) continue;
        if (reaches(e.dst, fn)) {
          add_candidate(e.src);
          break;
        }
      }
    }
  }

  for (const auto& label : candidates) {
    if (cfg.checkpoint(label) == CheckpointKind::None) {
      cfg.set_checkpoint(label, CheckpointKind::Virtual);
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// LoA encoding and hashing

std::vector<std::uint8_t> encode_loa(const Loa& loa) {
  std::vector<std::uint8_t> out;
  for (const Edge& e : loa.edges) {
    out.insert(out.end(), e.src.begin(), e.src.end());
    out.push_back(0x1f);
    out.insert(out.end(), e.dst.begin(), e.dst.end());
    out.push_back(0x1e);
    out.push_back(static_cast<std::uint8_t>(e.kind));
  }
  return out;
}

Digest hash_loa(const Loa& loa, HashAlgo algo) {
  return hash_bytes(encode_loa(loa), algo);
}

// ---------------------------------------------------------------------------
// LoA enumeration

namespace {

struct EnumState {
  const Cfg* cfg;
  std::unordered_map<std::string, std::vector<Edge>> outEdges;
  std::unordered_map<std::string, bool> hasCallOut;
  std::unordered_map<std::string, std::optional<std::string>> continuation;
  std::vector<LoaEntry> results;
  std::string start;
  std::vector<std::string> contStack;
  Loa loa;
  // Re-walking an edge with the same pending-continuation stack means the
  // enumeration state repeats exactly, so the path in between could pump
  // forever. The same edge under a different stack is fine: a fragment may
  // traverse one callee once per call site.
  std::set<std::tuple<std::string, std::string, std::vector<std::string>>> used;
  std::vector<Edge> openCalls;

  void emit(const std::string& end) {
    results.push_back(LoaEntry{
        MeasurementKey{start, end, Digest{}}, loa});
  }

  void step(const std::string& u) {
    for (const Edge& e : outEdges[u]) {
      switch (e.kind) {
        case EdgeKind::Fallthrough:
          // Fallthrough out of a call site marks where the callee returns
          // to; control only gets there via the matching return edge.
          if (hasCallOut[u]) continue;
          walk(e, /*significant=*/false, /*pushCont=*/false, /*popCont=*/false);
          break;
        case EdgeKind::Branch:
          walk(e, true, false, false);
          break;
        case EdgeKind::Call:
          walk(e, true, true, false);
          break;
        case EdgeKind::Return:
          if (contStack.empty()) {
            // No pending call inside this fragment: the return answers a
            // call from an earlier fragment, so any return successor is
            // reachable here.
            walk(e, true, false, false);
          } else if (contStack.back() == e.dst) {
            walk(e, true, false, true);
          }
          // Otherwise the return would cross a pending call: not a valid
          // interleaving, prune.
          break;
      }
    }
  }

  void walk(const Edge& e, bool significant, bool pushCont, bool popCont) {
    auto key = std::make_tuple(e.src, e.dst, contStack);
    if (used.count(key)) {
      throw ValidationError(
          "edge repeats within one checkpoint-to-checkpoint fragment (" +
          e.src + " -> " + e.dst +
          "): a cycle is missing a virtual checkpoint");
    }
    // A call edge taken again while still pending (its return not yet
    // walked) is recursion with no checkpoint inside the cycle: the stack
    // would grow forever. Tail-call recursion never grows contStack, so
    // the context guard above catches that flavor.
    if (e.kind == EdgeKind::Call &&
        std::find(openCalls.begin(), openCalls.end(), e) != openCalls.end()) {
      throw ValidationError("recursive descent through " + e.src + " -> " +
                            e.dst +
                            " never meets a checkpoint: a recursion "
                            "checkpoint is missing");
    }
    used.insert(key);
    if (significant) loa.edges.push_back(e);
    std::optional<std::string> pushed;
    if (pushCont) {
      pushed = continuation[e.src];
      if (pushed) {
        contStack.push_back(*pushed);
        openCalls.push_back(e);
      }
    }
    std::optional<Edge> answered;
    if (popCont) {
      contStack.pop_back();
      answered = openCalls.back();
      openCalls.pop_back();
    }

    if (cfg->is_checkpoint(e.dst)) {
      emit(e.dst);
    } else {
      step(e.dst);
    }

    if (popCont) {
      contStack.push_back(e.dst);
      openCalls.push_back(*answered);
    }
    if (pushCont && pushed) {
      contStack.pop_back();
      openCalls.pop_back();
    }
    if (significant) loa.edges.pop_back();
    used.erase(key);
  }
};

} // namespace

std::vector<LoaEntry> enumerate_loas(const Cfg& cfg, HashAlgo algo) {
  EnumState st;
  st.cfg = &cfg;
  for (const auto& n : cfg.nodes()) {
    st.outEdges[n.label] = cfg.out_edges(n.label);
    bool hasCall = false;
    for (const auto& e : st.outEdges[n.label]) {
      if (e.kind == EdgeKind::Call) hasCall = true;
    }
    st.hasCallOut[n.label] = hasCall;
    st.continuation[n.label] = cfg.call_continuation(n.label);
  }

  for (const auto& label : cfg.checkpoint_labels()) {
    st.start = label;
    st.contStack.clear();
    st.loa.edges.clear();
    st.used.clear();
    st.openCalls.clear();
    st.step(label);
  }

  for (auto& entry : st.results) {
    entry.key.loaHash = hash_loa(entry.loa, algo);
  }
  std::sort(st.results.begin(), st.results.end(),
            [](const LoaEntry& a, const LoaEntry& b) {
              if (a.key != b.key) return a.key < b.key;
              return a.loa < b.loa;
            });
  st.results.erase(std::unique(st.results.begin(), st.results.end(),
                               [](const LoaEntry& a, const LoaEntry& b) {
                                 return a.key == b.key && a.loa == b.loa;
                               }),
                   st.results.end());
  return st.results;
}

// ---------------------------------------------------------------------------
// ret_to relation

std::vector<RetToRelation> compute_ret_to(const Cfg& cfg,
                                          const std::vector<LoaEntry>& entries) {
  // Return edges that actually occur in some LoA.
  std::set<Edge> returns;
  for (const auto& entry : entries) {
    for (const Edge& e : entry.loa.edges) {
      if (e.kind == EdgeKind::Return) returns.insert(e);
    }
  }

  // Intra-function reachability: closure over branch/fallthrough edges.
  auto intra_reach = [&](const std::string& from) {
    std::unordered_set<std::string> seen{from};
    std::vector<std::string> work{from};
    while (!work.empty()) {
      std::string u = work.back();
      work.pop_back();
      for (const Edge& e : cfg.out_edges(u)) {
        if (e.kind != EdgeKind::Branch && e.kind != EdgeKind::Fallthrough)
          continue;
        if (seen.insert(e.dst).second) work.push_back(e.dst);
      }
    }
    return seen;
  };

  std::vector<RetToRelation> rel;
  for (const Edge& call : cfg.edges()) {
    if (call.kind != EdgeKind::Call) continue;
    auto body = intra_reach(call.dst);
    auto cont = cfg.call_continuation(call.src);
    for (const Edge& ret : returns) {
      if (!body.count(ret.src)) continue;
      // The return must land where this call resumes: its fallthrough
      // successor, or the call site itself when the call has no successor
      // block of its own.
      bool lands = cont ? ret.dst == *cont : ret.dst == call.src;
      if (lands) rel.push_back(RetToRelation{ret, call});
    }
  }
  std::sort(rel.begin(), rel.end());
  rel.erase(std::unique(rel.begin(), rel.end()), rel.end());
  return rel;
}

} // namespace scarr
