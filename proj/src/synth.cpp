#include "scarr/synth.hpp"

#include <algorithm>
#include <sstream>

#include "scarr/errors.hpp"

namespace scarr {

namespace {

struct Builder {
  std::vector<CfgNode> nodes;
  std::vector<Edge> edges;
  std::vector<int> blockCount;

  std::string new_block(int fn, CheckpointKind kind = CheckpointKind::None) {
    std::string label = "F" + std::to_string(fn) + "B" +
                        std::to_string(blockCount[fn]++);
    nodes.push_back(CfgNode{label, kind});
    return label;
  }

  void edge(const std::string& src, const std::string& dst, EdgeKind kind) {
    edges.push_back(Edge{src, dst, kind});
  }
};

struct CallSite {
  int callee;
  std::string cont;
};

} // namespace

Cfg random_cfg(const SynthParams& params, std::mt19937_64& rng) {
  if (params.functions < 1 || params.segments < 1) {
    throw SpecError("generator needs at least one function and one segment");
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> fnCount(1, params.functions);

  const int functions = fnCount(rng);
  Builder b;
  b.blockCount.assign(functions, 0);

  // Entry block of every function first, so call targets are known up
  // front. Function 0 is the program; the rest are callees.
  std::vector<std::string> entries(functions);
  for (int f = 0; f < functions; ++f) {
    entries[f] = b.new_block(
        f, f == 0 ? CheckpointKind::ThreadBegin : CheckpointKind::None);
  }

  std::vector<CallSite> sites[2]; // sites[0] unused; per-callee lists below
  std::vector<std::vector<std::string>> contsByCallee(functions);

  std::string exitLabel;
  for (int f = 0; f < functions; ++f) {
    std::string cur = entries[f];
    std::uniform_int_distribution<int> segCount(1, params.segments);
    int segments = segCount(rng);
    // One guarded self-call per function keeps the walk's recursion a
    // subcritical branching process: every random walk terminates quickly.
    bool hasRecursion = false;

    auto add_call = [&](int callee) {
      std::string cs = b.new_block(f);
      std::string cont = b.new_block(f);
      b.edge(cur, cs, EdgeKind::Fallthrough);
      b.edge(cs, entries[callee], EdgeKind::Call);
      b.edge(cs, cont, EdgeKind::Fallthrough);
      contsByCallee[callee].push_back(cont);
      cur = cont;
    };

    for (int s = 0; s < segments; ++s) {
      // Make sure a multi-function program actually calls something.
      bool forceCall = f == 0 && s == 0 && functions > 1;
      double roll = coin(rng);
      if (f > 0 && !forceCall && !hasRecursion &&
          coin(rng) < params.recursionProb) {
        hasRecursion = true;
        // Guarded self-recursion: branch around the recursive call so
        // every walk can take the non-recursive arm.
        std::string cs = b.new_block(f);
        std::string skip = b.new_block(f);
        std::string cont = b.new_block(f);
        std::string join = b.new_block(f);
        b.edge(cur, cs, EdgeKind::Branch);
        b.edge(cur, skip, EdgeKind::Branch);
        b.edge(cs, entries[f], EdgeKind::Call);
        b.edge(cs, cont, EdgeKind::Fallthrough);
        b.edge(cont, join, EdgeKind::Fallthrough);
        b.edge(skip, join, EdgeKind::Branch);
        contsByCallee[f].push_back(cont);
        cur = join;
        continue;
      }
      if (forceCall || (roll < params.callProb && f + 1 < functions)) {
        std::uniform_int_distribution<int> pick(f + 1, functions - 1);
        add_call(functions > 1 ? pick(rng) : f);
        continue;
      }
      roll -= params.callProb;
      if (roll < params.diamondProb) {
        std::string a = b.new_block(f);
        std::string c = b.new_block(f);
        std::string join = b.new_block(f);
        b.edge(cur, a, EdgeKind::Branch);
        b.edge(cur, c, EdgeKind::Branch);
        b.edge(a, join, EdgeKind::Fallthrough);
        b.edge(c, join, EdgeKind::Branch);
        cur = join;
        continue;
      }
      roll -= params.diamondProb;
      if (roll < params.loopProb) {
        std::string head = b.new_block(f);
        std::string exit = b.new_block(f);
        b.edge(cur, head, EdgeKind::Fallthrough);
        if (f + 1 < functions && coin(rng) < params.callProb) {
          // Loop whose body makes a call: one balanced call/return pair
          // per iteration.
          std::uniform_int_distribution<int> pick(f + 1, functions - 1);
          int callee = pick(rng);
          std::string cs = b.new_block(f);
          std::string cont = b.new_block(f);
          b.edge(head, cs, EdgeKind::Branch);
          b.edge(cs, entries[callee], EdgeKind::Call);
          b.edge(cs, cont, EdgeKind::Fallthrough);
          b.edge(cont, head, EdgeKind::Branch);
          contsByCallee[callee].push_back(cont);
        } else {
          std::string body = b.new_block(f);
          b.edge(head, body, EdgeKind::Branch);
          b.edge(body, head, EdgeKind::Branch);
        }
        b.edge(head, exit, EdgeKind::Branch);
        cur = exit;
        continue;
      }
      roll -= params.loopProb;
      if (roll < params.exitPointProb) {
        std::string ep = b.new_block(f, CheckpointKind::ExitPoint);
        b.edge(cur, ep, EdgeKind::Fallthrough);
        cur = ep;
        continue;
      }
      std::string plain = b.new_block(f);
      b.edge(cur, plain, EdgeKind::Fallthrough);
      cur = plain;
    }

    if (f == 0) {
      exitLabel = b.new_block(0, CheckpointKind::ThreadEnd);
      b.edge(cur, exitLabel, EdgeKind::Fallthrough);
    } else {
      std::string ret = b.new_block(f);
      b.edge(cur, ret, EdgeKind::Fallthrough);
      // Return edges are wired after all call sites are known; remember
      // the block by convention: last block of function f.
      entries.push_back(ret); // placeholder append, resolved below
    }
  }

  // entries[functions + k] holds the return block of function k+1.
  for (int f = 1; f < functions; ++f) {
    const std::string& ret = entries[functions + (f - 1)];
    for (const std::string& cont : contsByCallee[f]) {
      b.edge(ret, cont, EdgeKind::Return);
    }
  }

  return Cfg(std::move(b.nodes), std::move(b.edges), "F0B0", {exitLabel});
}

namespace {

struct WalkNode {
  std::vector<Edge> calls, rets, branches, falls;
  CheckpointKind checkpoint = CheckpointKind::None;
  std::optional<std::string> continuation;
  bool sink = false;
};

std::unordered_map<std::string, WalkNode> walk_index(const Cfg& cfg) {
  std::unordered_map<std::string, WalkNode> idx;
  for (const auto& n : cfg.nodes()) {
    WalkNode w;
    for (const Edge& e : cfg.out_edges(n.label)) {
      switch (e.kind) {
        case EdgeKind::Call: w.calls.push_back(e); break;
        case EdgeKind::Return: w.rets.push_back(e); break;
        case EdgeKind::Branch: w.branches.push_back(e); break;
        case EdgeKind::Fallthrough: w.falls.push_back(e); break;
      }
    }
    w.checkpoint = n.checkpoint;
    w.continuation = cfg.call_continuation(n.label);
    w.sink = w.calls.empty() && w.rets.empty() && w.branches.empty() &&
             w.falls.empty();
    idx.emplace(n.label, std::move(w));
  }
  return idx;
}

} // namespace

std::vector<TraceEvent> random_walk(const Cfg& cfg, std::uint64_t threadId,
                                    std::mt19937_64& rng,
                                    std::size_t maxSteps) {
  auto idx = walk_index(cfg);

  for (int attempt = 0; attempt < 32; ++attempt) {
    std::vector<TraceEvent> events;
    std::vector<std::string> contStack;
    const std::string* node = &cfg.entry();
    events.push_back(TraceEvent::checkpoint_cross(threadId, *node));

    bool done = false;
    bool stuck = false;
    for (std::size_t step = 0; step < maxSteps; ++step) {
      const WalkNode& w = idx.at(*node);
      if (w.sink) {
        if (w.checkpoint == CheckpointKind::ThreadEnd && contStack.empty()) {
          done = true;
        } else {
          stuck = true;
        }
        break;
      }

      const Edge* taken = nullptr;
      if (!w.calls.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, w.calls.size() - 1);
        taken = &w.calls[pick(rng)];
        if (!w.continuation) {
          stuck = true; // tail call: not walkable with real stack semantics
          break;
        }
        contStack.push_back(*w.continuation);
      } else if (!w.rets.empty()) {
        if (contStack.empty()) {
          stuck = true;
          break;
        }
        const std::string& target = contStack.back();
        auto it = std::find_if(w.rets.begin(), w.rets.end(), [&](const Edge& e) {
          return e.dst == target;
        });
        if (it == w.rets.end()) {
          stuck = true; // caller's continuation not wired up
          break;
        }
        contStack.pop_back();
        taken = &*it;
      } else if (!w.branches.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, w.branches.size() - 1);
        taken = &w.branches[pick(rng)];
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, w.falls.size() - 1);
        taken = &w.falls[pick(rng)];
      }

      if (edge_kind_significant(taken->kind)) {
        events.push_back(TraceEvent::edge_traversal(threadId, *taken));
      }
      node = &taken->dst;
      const WalkNode& next = idx.at(*node);
      if (next.checkpoint != CheckpointKind::None) {
        events.push_back(TraceEvent::checkpoint_cross(threadId, *node));
      }
      if (next.checkpoint == CheckpointKind::ThreadEnd && contStack.empty() &&
          next.sink) {
        done = true;
        break;
      }
    }

    if (done && !stuck) return events;
  }
  throw SpecError("random walk failed to reach the thread end");
}

std::vector<TraceEvent> interleave_walks(std::vector<std::vector<TraceEvent>> walks,
                                         std::mt19937_64& rng) {
  std::vector<TraceEvent> merged;
  std::vector<std::size_t> pos(walks.size(), 0);
  std::size_t total = 0;
  for (const auto& w : walks) total += w.size();
  merged.reserve(total);
  while (merged.size() < total) {
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < walks.size(); ++i) {
      if (pos[i] < walks[i].size()) live.push_back(i);
    }
    std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
    std::size_t w = live[pick(rng)];
    merged.push_back(walks[w][pos[w]++]);
  }
  return merged;
}

Workload build_workload(const SynthParams& params, HashAlgo algo) {
  std::mt19937_64 rng(params.seed);
  Cfg cfg = identify_checkpoints(random_cfg(params, rng));
  auto entries = enumerate_loas(cfg, algo);
  auto retTo = compute_ret_to(cfg, entries);
  std::string doc = cfg_to_json(cfg);
  Digest programId = hash_bytes(
      std::span(reinterpret_cast<const std::uint8_t*>(doc.data()), doc.size()),
      algo);
  MeasurementsDb db = build_db(cfg, entries, retTo, programId, algo);

  std::vector<std::vector<TraceEvent>> walks;
  for (int t = 0; t < std::max(1, params.threads); ++t) {
    walks.push_back(random_walk(cfg, static_cast<std::uint64_t>(t + 1), rng,
                                params.walkSteps));
  }
  Workload w{std::move(cfg), std::move(db), interleave_walks(std::move(walks), rng),
             params.seed, {}};
  std::ostringstream desc;
  desc << "seed=" << params.seed << " functions<=" << params.functions
       << " segments<=" << params.segments << " threads=" << params.threads;
  w.params = desc.str();
  return w;
}

} // namespace scarr
