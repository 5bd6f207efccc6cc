#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qpn/document.hpp"
#include "qpn/errors.hpp"

namespace py = pybind11;
using namespace qpn;

namespace {

// Reports cross the boundary as plain Python objects through the json module.
py::object to_python(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json from_python(const py::object& o) {
    return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

NetDocument document_from(const py::object& o) {
    if (py::isinstance<py::str>(o)) return parse_document(Json::parse(o.cast<std::string>()));
    return parse_document(from_python(o));
}

const LocalAnnotation& annotation_of(const NetDocument& doc) {
    if (!doc.annotation) throw InvalidInput("the net has no annotation");
    return *doc.annotation;
}

NetDocument as_document(const AnnotatedNet& n, NetKind kind) {
    NetDocument doc;
    doc.kind = kind;
    doc.net = n.net;
    doc.annotation = n.ann;
    return doc;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Quantum Petri nets: annotation, unfolding, drop-condition checks and composition";

    py::register_exception<Error>(m, "QpnError", PyExc_ValueError);

    py::class_<QuantumMap>(m, "QuantumMap")
        .def_static("from_kraus", &QuantumMap::from_kraus, py::arg("input_dim"), py::arg("output_dim"), py::arg("kraus"))
        .def_static("from_choi", &QuantumMap::from_choi, py::arg("input_dim"), py::arg("output_dim"), py::arg("choi"),
                    py::arg("tol") = -1.0)
        .def_property_readonly("input_dim", &QuantumMap::input_dim)
        .def_property_readonly("output_dim", &QuantumMap::output_dim)
        .def_property_readonly("kraus", &QuantumMap::kraus)
        .def_property_readonly("choi", &QuantumMap::choi)
        .def("apply", &QuantumMap::apply, py::arg("rho"))
        .def("effect", [](const QuantumMap& q) { return effect_of(q).matrix(); })
        .def("is_cptni", [](const QuantumMap& q) {
            const auto c = is_cptni(q);
            py::dict d;
            d["cp"] = c.cp;
            d["tni"] = c.tni;
            d["min_choi_eigenvalue"] = c.min_choi_eigenvalue;
            d["max_effect_eigenvalue"] = c.max_effect_eigenvalue;
            return d;
        });

    m.def("identity_map", &identity_map, py::arg("dim"));
    m.def("tensor", py::overload_cast<const QuantumMap&, const QuantumMap&>(&tensor));
    m.def("compose", py::overload_cast<const QuantumMap&, const QuantumMap&>(&compose), py::arg("after"),
          py::arg("before"));

    py::class_<NetDocument>(m, "Net")
        .def(py::init(&document_from), py::arg("document"), "From a JSON string or a dict in the net format")
        .def_static("load", [](const std::string& path) { return load_document(path); })
        .def_property_readonly("kind", [](const NetDocument& d) { return to_string(d.kind); })
        .def_property_readonly("places", [](const NetDocument& d) { return d.net.skeleton().places(); })
        .def_property_readonly("transitions", [](const NetDocument& d) { return d.net.skeleton().transition_ids(); })
        .def_property_readonly("initial", [](const NetDocument& d) { return d.net.initial_marking(); })
        .def_property_readonly("labels", [](const NetDocument& d) { return d.labels; })
        .def_property_readonly("annotated", [](const NetDocument& d) { return d.annotation.has_value(); })
        .def("to_dict", [](const NetDocument& d) { return to_python(to_json(d)); })
        .def("to_json", [](const NetDocument& d) { return to_json(d).dump(2); })
        .def("to_dot", &to_dot);

    m.def(
        "validate",
        [](const NetDocument& d) {
            ValidationReport v = d.kind == NetKind::Occurrence
                                     ? validate_occurrence_net(d.net.skeleton(), d.net.initial_marking())
                                     : ValidationReport{};
            if (d.annotation) {
                const auto issues = signature_issues(d.net.skeleton(), *d.annotation);
                if (issues.empty()) {
                    v.pass("annotation-signatures");
                } else {
                    v.fail("annotation-signatures", issues.front().node, issues.front().detail);
                }
            }
            return to_python(to_json(v));
        },
        py::arg("net"), "Occurrence-net axioms (for occurrence nets) and annotation signatures");

    m.def(
        "unfold",
        [](const NetDocument& d, std::size_t depth, std::size_t max_events) {
            const BranchingProcess bp = unfold(d.net, {max_events, depth});
            NetDocument out;
            out.kind = NetKind::Occurrence;
            out.net = bp.occ.as_petri_net();
            out.labels = bp.labels;
            if (d.annotation) out.annotation = lift_annotation(bp, *d.annotation);
            out.metadata = {{"saturated", bp.saturated}};
            return out;
        },
        py::arg("net"), py::arg("depth") = 8, py::arg("max_events") = 256);

    m.def(
        "check_drop",
        [](const NetDocument& d, double tol, std::size_t max_states, unsigned workers) {
            DropBounds b;
            b.max_states = max_states;
            b.workers = workers;
            DropReport r;
            {
                py::gil_scoped_release release;
                r = d.kind == NetKind::Occurrence ? check_local_drop(d.occurrence(), annotation_of(d), b, tol)
                                                  : check_local_drop(d.net, annotation_of(d), b, tol);
            }
            return to_python(to_json(r));
        },
        py::arg("net"), py::arg("tol") = kDefaultTolerance, py::arg("max_states") = kDefaultStateCap,
        py::arg("workers") = 1u);

    m.def(
        "oracle",
        [](const NetDocument& d, std::size_t max_family, std::size_t max_configs, double tol) {
            OracleBounds b;
            b.max_family = max_family;
            b.max_configs = max_configs;
            return to_python(to_json(global_drop_oracle(d.occurrence(), annotation_of(d), b, tol)));
        },
        py::arg("net"), py::arg("max_family") = 3, py::arg("max_configs") = 4096, py::arg("tol") = kDefaultTolerance);

    m.def(
        "certify",
        [](const NetDocument& d, double tol) {
            CertifyOptions o;
            o.tol = tol;
            return to_python(to_json(certify_qpn(d.net, annotation_of(d), o)));
        },
        py::arg("net"), py::arg("tol") = kDefaultTolerance);

    m.def(
        "evaluate",
        [](const NetDocument& d, const Marking& from, const Marking& to) {
            const GlobalOperator op = canonicalize(induced_global(d.occurrence(), annotation_of(d), from, to));
            py::dict out;
            out["map"] = op.map;
            out["in_layout"] = to_python(layout_to_json(op.in_layout));
            out["out_layout"] = to_python(layout_to_json(op.out_layout));
            return out;
        },
        py::arg("net"), py::arg("source"), py::arg("target"), "Induced map between two reachable markings");

    m.def(
        "compose_parallel",
        [](const NetDocument& a, const NetDocument& b) {
            const ParallelComposition pc = parallel_compose(a.annotated(), b.annotated());
            const bool occ = a.kind == NetKind::Occurrence && b.kind == NetKind::Occurrence;
            NetDocument out = as_document(pc.result, occ ? NetKind::Occurrence : NetKind::Petri);
            out.metadata = {{"right_offset", pc.right_offset}};
            return out;
        },
        py::arg("left"), py::arg("right"));

    m.def(
        "join",
        [](const NetDocument& d, const py::object& spec) {
            const DropPreservingJoin j = drop_preserving_join(d.annotated(), parse_join_spec(from_python(spec)));
            NetDocument out = as_document(j.result, d.kind);
            Json joined = Json::array();
            for (const auto& e : j.joined) joined.push_back({{"id", e.id}, {"positive", e.positive}, {"negative", e.negative}});
            out.metadata = {{"joined", joined}, {"race_free", j.race_free}, {"clusters_match", j.clusters_match}};
            return out;
        },
        py::arg("net"), py::arg("spec"), "Drop-preserving join; spec is {\"f\": [[negative, positive], ...]}");

    m.def(
        "validate_join",
        [](const NetDocument& d, const py::object& spec) {
            return to_python(to_json(validate_drop_preserving(d.annotated(), parse_join_spec(from_python(spec)))));
        },
        py::arg("net"), py::arg("spec"));

    m.def("set_max_dimension", &set_max_dimension, py::arg("cap"));
    m.def("max_dimension", &max_dimension);
    m.attr("FORMAT_VERSION") = kFormatVersion;
}
