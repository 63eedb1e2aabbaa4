#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "scarr/attack.hpp"
#include "scarr/cfg.hpp"
#include "scarr/digest.hpp"
#include "scarr/errors.hpp"
#include "scarr/measurement_db.hpp"
#include "scarr/prover.hpp"
#include "scarr/synth.hpp"
#include "scarr/verifier.hpp"
#include "scarr/wire.hpp"

namespace py = pybind11;
using namespace scarr;

namespace {

// Wrapper so pybind11/stl.h list conversion does not swallow trace objects.
struct Trace {
  std::vector<TraceEvent> events;
};

std::vector<std::uint8_t> to_bytes(const py::bytes& b) {
  std::string s = b;
  return {s.begin(), s.end()};
}

std::array<std::uint8_t, 16> to_nonce(const py::bytes& b) {
  auto v = to_bytes(b);
  if (v.size() != 16) throw ValidationError("nonce must be exactly 16 bytes");
  std::array<std::uint8_t, 16> nonce{};
  std::copy(v.begin(), v.end(), nonce.begin());
  return nonce;
}

py::bytes as_pybytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

Digest program_id(const Cfg& cfg, HashAlgo algo) {
  std::string text = cfg_to_json(cfg);
  return hash_bytes(
      std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()),
      algo);
}

MeasurementsDb db_from_cfg(const Cfg& cfg, HashAlgo algo) {
  auto entries = enumerate_loas(cfg, algo);
  auto rel = compute_ret_to(cfg, entries);
  return build_db(cfg, entries, rel, program_id(cfg, algo), algo);
}

} // namespace

PYBIND11_MODULE(_scarr, m) {
  m.doc() = "Control-flow attestation core: offline measurement generation, "
            "prover and verifier sessions, attack drills, wire framing.";
  m.attr("__version__") = "1.0.0";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<SpecError>(m, "SpecError", PyExc_ValueError);
  py::register_exception<FrameError>(m, "FrameError", PyExc_ValueError);
  py::register_exception<CodecError>(m, "CodecError", PyExc_ValueError);
  py::register_exception<NetError>(m, "NetError", PyExc_ConnectionError);

  py::class_<Cfg>(m, "Cfg")
      .def_static("load", [](const std::string& text) { return load_cfg(text); },
                  py::arg("text"))
      .def_static("load_file",
                  [](const std::string& path) { return load_cfg_file(path); },
                  py::arg("path"))
      .def("identify",
           [](const Cfg& c) { return identify_checkpoints(c); },
           "Apply the checkpoint identification rules and return the "
           "annotated graph.")
      .def("to_json", [](const Cfg& c) { return cfg_to_json(c); })
      .def_property_readonly("entry",
                             [](const Cfg& c) { return c.entry(); })
      .def_property_readonly(
          "node_count", [](const Cfg& c) { return c.nodes().size(); })
      .def_property_readonly(
          "edge_count", [](const Cfg& c) { return c.edges().size(); });

  py::class_<Trace>(m, "Trace")
      .def_static("load_file",
                  [](const std::string& path) {
                    return Trace{load_trace_file(path)};
                  },
                  py::arg("path"))
      .def_static("parse",
                  [](const std::string& text) {
                    return Trace{parse_trace_text(text)};
                  },
                  py::arg("text"))
      .def("to_text", [](const Trace& t) { return trace_to_text(t.events); })
      .def("__len__", [](const Trace& t) { return t.events.size(); });

  py::class_<MeasurementsDb>(m, "MeasurementsDb")
      .def_static(
          "build",
          [](const Cfg& cfg, const std::string& algo) {
            return db_from_cfg(cfg, hash_algo_from_name(algo));
          },
          py::arg("cfg"), py::arg("algo") = "blake2b256",
          "Enumerate measurements and the return-address relation for a "
          "checkpoint-identified graph and assemble the database.")
      .def_static("load_file", &MeasurementsDb::load_file, py::arg("path"))
      .def("save_file", &MeasurementsDb::save_file, py::arg("path"))
      .def_property_readonly("size", &MeasurementsDb::size)
      .def_property_readonly("ret_to_size", &MeasurementsDb::ret_to_size)
      .def_property_readonly(
          "algo",
          [](const MeasurementsDb& db) { return hash_algo_name(db.algo()); })
      .def(
          "__eq__",
          [](const MeasurementsDb& a, const MeasurementsDb& b) { return a == b; },
          py::is_operator());

  py::class_<PartialReport>(m, "Report")
      .def_property_readonly(
          "index", [](const PartialReport& r) { return r.index; })
      .def_property_readonly(
          "thread_id", [](const PartialReport& r) { return r.threadId; })
      .def_property_readonly(
          "measurement_count",
          [](const PartialReport& r) { return r.measurements.size(); })
      .def_property_readonly(
          "fingerprint_hex",
          [](const PartialReport& r) { return to_hex(r.fingerprint); })
      .def("to_payload",
           [](const PartialReport& r) {
             return as_pybytes(encode_message_payload(Message{r}));
           })
      .def_static("from_payload",
                  [](const py::bytes& data) {
                    auto raw = to_bytes(data);
                    Message msg = decode_message_payload(
                        MsgType::Report, std::span<const std::uint8_t>(raw));
                    return std::get<PartialReport>(msg);
                  },
                  py::arg("payload"))
      .def(
          "__eq__",
          [](const PartialReport& a, const PartialReport& b) { return a == b; },
          py::is_operator());

  m.def(
      "enumerate_loas",
      [](const Cfg& cfg, const std::string& algo) {
        auto entries = enumerate_loas(cfg, hash_algo_from_name(algo));
        py::list out;
        for (const auto& e : entries) {
          out.append(
              py::make_tuple(e.key.cpA, e.key.cpB, to_hex(e.key.loaHash)));
        }
        return out;
      },
      py::arg("cfg"), py::arg("algo") = "blake2b256",
      "List (cp_a, cp_b, loa_hash_hex) triplets in canonical order.");

  m.def(
      "attest",
      [](const MeasurementsDb& db, const Trace& trace, const py::bytes& key,
         const py::bytes& nonce, std::uint64_t batch) {
        ProverSession session(
            ProverConfig{to_bytes(key), to_nonce(nonce), batch, db.algo()},
            db.checkpoints());
        std::vector<PartialReport> out;
        replay_trace(session, trace.events,
                     [&](const PartialReport& r) { out.push_back(r); });
        return out;
      },
      py::arg("db"), py::arg("trace"), py::arg("key"), py::arg("nonce"),
      py::arg("batch") = 50000,
      "Run the trace through a prover session and return the sealed "
      "partial reports.");

  m.def(
      "verify",
      [](const MeasurementsDb& db, const std::vector<PartialReport>& reports,
         const py::bytes& key,
         const py::bytes& nonce) -> std::optional<std::string> {
        VerifierSession session(to_bytes(key), to_nonce(nonce), db);
        for (const auto& r : reports) {
          if (auto v = session.verify_report(r)) return render_violation(*v);
        }
        return std::nullopt;
      },
      py::arg("db"), py::arg("reports"), py::arg("key"), py::arg("nonce"),
      "Verify a report stream; returns None or the first violation line.");

  m.def(
      "run_attack_file",
      [](const Cfg& cfg, const MeasurementsDb& db, const Trace& trace,
         const std::string& specPath, const py::bytes& key,
         const py::bytes& nonce,
         std::uint64_t batch) -> std::optional<std::string> {
        auto spec = load_attack_spec_file(specPath);
        auto run = run_attack(cfg, db, trace.events, spec, to_bytes(key),
                              to_nonce(nonce), batch);
        if (run.observed) return render_violation(*run.observed);
        return std::nullopt;
      },
      py::arg("cfg"), py::arg("db"), py::arg("trace"), py::arg("spec_path"),
      py::arg("key"), py::arg("nonce"), py::arg("batch") = 50000,
      "Apply an attack spec to an honest trace and verify the doctored "
      "stream; returns None or the violation line.");

  m.def(
      "build_workload",
      [](std::uint64_t seed, int functions, int segments, int threads,
         std::size_t walk_steps, const std::string& algo) {
        SynthParams p;
        p.seed = seed;
        p.functions = functions;
        p.segments = segments;
        p.threads = threads;
        p.walkSteps = walk_steps;
        Workload w = build_workload(p, hash_algo_from_name(algo));
        return py::make_tuple(w.cfg, w.db, Trace{std::move(w.trace)});
      },
      py::arg("seed") = 1, py::arg("functions") = 3, py::arg("segments") = 4,
      py::arg("threads") = 1, py::arg("walk_steps") = 20000,
      py::arg("algo") = "blake2b256",
      "Generate a random program, its database, and an honest trace.");

  m.def(
      "hash_hex",
      [](const py::bytes& data, const std::string& algo) {
        auto raw = to_bytes(data);
        return to_hex(hash_bytes(std::span<const std::uint8_t>(raw),
                                 hash_algo_from_name(algo)));
      },
      py::arg("data"), py::arg("algo") = "blake2b256");

  m.def(
      "hmac_hex",
      [](const py::bytes& key, const py::bytes& msg, const std::string& algo) {
        auto k = to_bytes(key);
        auto s = to_bytes(msg);
        return to_hex(hmac(std::span<const std::uint8_t>(k),
                           std::span<const std::uint8_t>(s),
                           hash_algo_from_name(algo)));
      },
      py::arg("key"), py::arg("msg"), py::arg("algo") = "blake2b256");

  m.def(
      "encode_frame",
      [](const PartialReport& report, const std::string& codec) {
        return as_pybytes(
            encode_frame(Message{report}, codec_from_name(codec)));
      },
      py::arg("report"), py::arg("codec") = "none",
      "Frame one report for the wire under the given codec.");

  m.def(
      "decode_frame",
      [](const py::bytes& blob) {
        auto raw = to_bytes(blob);
        auto decoded = decode_frame(std::span<const std::uint8_t>(raw));
        if (!std::holds_alternative<PartialReport>(decoded.msg)) {
          throw ValidationError("frame does not hold a report");
        }
        return py::make_tuple(codec_name(decoded.codec),
                              std::get<PartialReport>(decoded.msg));
      },
      py::arg("frame"), "Decode a report frame to (codec_name, Report).");
}
