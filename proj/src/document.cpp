#include "qpn/document.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "qpn/errors.hpp"

namespace qpn {

std::string to_string(NetKind k) { return k == NetKind::Petri ? "petri" : "occurrence"; }

namespace {

const std::set<std::string> kTopLevelKeys{"format_version", "kind",   "places",     "transitions", "flow",
                                          "initial",        "labels", "annotation", "metadata"};

NodeId parse_id(const std::string& key, const std::string& where) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(key, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != key.size() || key.empty()) throw InvalidInput(where + ": '" + key + "' is not a node id");
    return static_cast<NodeId>(v);
}

NodeId id_value(const Json& j, const std::string& where) {
    if (!j.is_number_integer()) throw InvalidInput(where + ": expected an integer id, got " + j.dump());
    return j.get<NodeId>();
}

std::size_t dim_value(const Json& j, const std::string& where) {
    if (!j.is_number_integer() || j.get<long long>() <= 0) {
        throw InvalidInput(where + ": expected a positive dimension, got " + j.dump());
    }
    return j.get<std::size_t>();
}

const Json& field(const Json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw InvalidInput(where + ": missing \"" + key + "\"");
    return *it;
}

NodeSet id_array(const Json& j, const std::string& where) {
    if (!j.is_array()) throw InvalidInput(where + ": expected an array of ids");
    NodeSet out;
    for (const auto& v : j) {
        if (!out.insert(id_value(v, where)).second) throw InvalidInput(where + ": duplicate id " + v.dump());
    }
    return out;
}

Json id_list(const NodeSet& s) { return Json(std::vector<NodeId>(s.begin(), s.end())); }

Json id_list(const std::vector<NodeId>& s) { return Json(s); }

Complex complex_from_json(const Json& j, const std::string& where) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        return {j[0].get<double>(), j[1].get<double>()};
    }
    throw InvalidInput(where + ": expected a number or [re, im], got " + j.dump());
}

std::map<NodeId, std::size_t> dim_table(const Json& j, const std::string& where) {
    if (!j.is_object()) throw InvalidInput(where + ": expected an object of id -> dimension");
    std::map<NodeId, std::size_t> out;
    for (const auto& [k, v] : j.items()) out[parse_id(k, where)] = dim_value(v, where + "[" + k + "]");
    return out;
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw InvalidInput("matrix: expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw InvalidInput("matrix: row " + std::to_string(r) + " has the wrong length");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = complex_from_json(row[static_cast<std::size_t>(c)], "matrix entry");
        }
    }
    return m;
}

Json map_to_json(const QuantumMap& m) {
    Json kraus = Json::array();
    for (const auto& k : m.kraus()) kraus.push_back(matrix_to_json(k));
    return {{"input_dim", m.input_dim()}, {"output_dim", m.output_dim()}, {"kraus", std::move(kraus)}};
}

QuantumMap map_from_json(const Json& j) {
    if (!j.is_object()) throw InvalidInput("map: expected an object");
    const std::size_t din = dim_value(field(j, "input_dim", "map"), "map.input_dim");
    const std::size_t dout = dim_value(field(j, "output_dim", "map"), "map.output_dim");
    const bool has_kraus = j.contains("kraus");
    const bool has_choi = j.contains("choi");
    if (has_kraus == has_choi) throw InvalidInput("map: give exactly one of \"kraus\" and \"choi\"");
    try {
        if (has_choi) return QuantumMap::from_choi(din, dout, matrix_from_json(j["choi"]));
        if (!j["kraus"].is_array() || j["kraus"].empty()) throw InvalidInput("map: \"kraus\" must be a non-empty array");
        std::vector<Matrix> kraus;
        for (const auto& k : j["kraus"]) kraus.push_back(matrix_from_json(k));
        return QuantumMap::from_kraus(din, dout, std::move(kraus));
    } catch (const DimensionError& e) {
        throw InvalidInput(std::string("map: ") + e.what());
    } catch (const MatrixError& e) {
        throw InvalidInput(std::string("map: ") + e.what());
    }
}

Json layout_to_json(const FactorLayout& l) {
    Json out = Json::array();
    for (const auto& f : l.factors()) out.push_back({{"factor", to_string(f.key)}, {"dim", f.dim}});
    return out;
}

Json operator_to_json(const GlobalOperator& op) {
    Json j = map_to_json(op.map);
    j["in_layout"] = layout_to_json(op.in_layout);
    j["out_layout"] = layout_to_json(op.out_layout);
    return j;
}

NetDocument parse_document(const Json& j) {
    if (!j.is_object()) throw InvalidInput("document: expected a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (!kTopLevelKeys.count(k)) throw InvalidInput("document: unknown key \"" + k + "\"");
    }
    NetDocument doc;
    const Json& version = field(j, "format_version", "document");
    if (!version.is_string()) throw InvalidInput("document: format_version must be a string");
    doc.format_version = version.get<std::string>();
    if (doc.format_version.rfind("1.", 0) != 0) {
        throw InvalidInput("document: unsupported format_version " + doc.format_version);
    }
    const Json& kind = field(j, "kind", "document");
    if (kind == "petri") {
        doc.kind = NetKind::Petri;
    } else if (kind == "occurrence") {
        doc.kind = NetKind::Occurrence;
    } else {
        throw InvalidInput("document: kind must be \"petri\" or \"occurrence\"");
    }

    const NodeSet places = id_array(field(j, "places", "document"), "places");
    std::map<NodeId, Polarity> transitions;
    const Json& ts = field(j, "transitions", "document");
    if (!ts.is_array()) throw InvalidInput("transitions: expected an array");
    for (const auto& t : ts) {
        if (!t.is_object()) throw InvalidInput("transitions: expected objects with id and polarity");
        const NodeId id = id_value(field(t, "id", "transition"), "transition.id");
        const Json& pol = field(t, "polarity", "transition " + std::to_string(id));
        if (!pol.is_string()) throw InvalidInput("transition " + std::to_string(id) + ": polarity must be a string");
        if (!transitions.emplace(id, parse_polarity(pol.get<std::string>())).second) {
            throw InvalidInput("transitions: duplicate id " + std::to_string(id));
        }
    }
    std::vector<Arc> flow;
    const Json& fs = field(j, "flow", "document");
    if (!fs.is_array()) throw InvalidInput("flow: expected an array of [from, to] pairs");
    for (const auto& a : fs) {
        if (!a.is_array() || a.size() != 2) throw InvalidInput("flow: expected [from, to], got " + a.dump());
        flow.push_back({id_value(a[0], "flow"), id_value(a[1], "flow")});
    }
    const Marking initial = id_array(field(j, "initial", "document"), "initial");
    doc.net = PetriNet(NetSkeleton(places, transitions, flow), initial);
    const NetSkeleton& s = doc.net.skeleton();

    if (j.contains("labels")) {
        const Json& ls = j["labels"];
        if (!ls.is_object()) throw InvalidInput("labels: expected an object of id -> id");
        for (const auto& [k, v] : ls.items()) {
            const NodeId n = parse_id(k, "labels");
            if (!s.contains(n)) throw InvalidInput("labels: unknown node " + k);
            doc.labels[n] = id_value(v, "labels[" + k + "]");
        }
    }

    if (j.contains("annotation")) {
        const Json& a = j["annotation"];
        if (!a.is_object()) throw InvalidInput("annotation: expected an object");
        LocalAnnotation ann;
        if (a.contains("qdim")) ann.qdim = dim_table(a["qdim"], "annotation.qdim");
        if (a.contains("hdim")) ann.hdim = dim_table(a["hdim"], "annotation.hdim");
        for (const auto& [c, d] : ann.qdim) {
            if (!s.is_place(c)) throw InvalidInput("annotation.qdim: " + std::to_string(c) + " is not a place");
        }
        for (const auto& [t, d] : ann.hdim) {
            if (!s.is_transition(t)) throw InvalidInput("annotation.hdim: " + std::to_string(t) + " is not a transition");
        }
        if (a.contains("maps")) {
            if (!a["maps"].is_array()) throw InvalidInput("annotation.maps: expected an array");
            for (const auto& m : a["maps"]) {
                const NodeId e = id_value(field(m, "event", "annotation.maps"), "annotation.maps.event");
                if (!s.is_transition(e)) throw InvalidInput("annotation.maps: " + std::to_string(e) + " is not a transition");
                if (!ann.event_map.emplace(e, map_from_json(m)).second) {
                    throw InvalidInput("annotation.maps: two maps for event " + std::to_string(e));
                }
            }
        }
        doc.annotation = std::move(ann);
    }
    if (j.contains("metadata")) doc.metadata = j["metadata"];
    return doc;
}

Json to_json(const NetDocument& doc) {
    const NetSkeleton& s = doc.net.skeleton();
    Json j;
    j["format_version"] = doc.format_version;
    j["kind"] = to_string(doc.kind);
    j["places"] = id_list(s.places());
    Json ts = Json::array();
    for (const auto& [t, pol] : s.transitions()) ts.push_back({{"id", t}, {"polarity", std::string(1, polarity_symbol(pol))}});
    j["transitions"] = std::move(ts);
    Json fs = Json::array();
    for (const Arc& a : s.flow()) fs.push_back({a.from, a.to});
    j["flow"] = std::move(fs);
    j["initial"] = id_list(doc.net.initial_marking());
    if (!doc.labels.empty()) {
        Json ls = Json::object();
        for (const auto& [n, l] : doc.labels) ls[std::to_string(n)] = l;
        j["labels"] = std::move(ls);
    }
    if (doc.annotation) {
        Json a;
        a["qdim"] = Json::object();
        for (const auto& [c, d] : doc.annotation->qdim) a["qdim"][std::to_string(c)] = d;
        a["hdim"] = Json::object();
        for (const auto& [t, d] : doc.annotation->hdim) a["hdim"][std::to_string(t)] = d;
        Json maps = Json::array();
        for (const auto& [t, m] : doc.annotation->event_map) {
            Json mj = map_to_json(m);
            mj["event"] = t;
            maps.push_back(std::move(mj));
        }
        a["maps"] = std::move(maps);
        j["annotation"] = std::move(a);
    }
    if (!doc.metadata.empty()) j["metadata"] = doc.metadata;
    return j;
}

OccurrenceNet NetDocument::occurrence() const {
    if (kind != NetKind::Occurrence) throw InvalidInput("document is a Petri net, not an occurrence net");
    return OccurrenceNet(net.skeleton(), net.initial_marking());
}

AnnotatedNet NetDocument::annotated() const {
    if (!annotation) throw InvalidInput("document has no annotation");
    return {net, *annotation};
}

NetDocument load_document(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
    return parse_document(j);
}

void save_json(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::string to_dot(const NetDocument& doc) {
    const NetSkeleton& s = doc.net.skeleton();
    auto label = [&](NodeId n, const std::string& base) {
        auto it = doc.labels.find(n);
        return it == doc.labels.end() ? base : base + " [" + std::to_string(it->second) + "]";
    };
    std::ostringstream out;
    out << "digraph qpn {\n  rankdir=LR;\n";
    for (NodeId p : s.places()) {
        out << "  n" << p << " [shape=circle, label=\"" << label(p, std::to_string(p)) << "\"";
        if (doc.net.initial_marking().count(p)) out << ", style=filled, fillcolor=gray70";
        out << "];\n";
    }
    for (const auto& [t, pol] : s.transitions()) {
        out << "  n" << t << " [shape=box, label=\"" << label(t, std::to_string(t) + " " + polarity_symbol(pol)) << "\"];\n";
    }
    for (const Arc& a : s.flow()) out << "  n" << a.from << " -> n" << a.to << ";\n";
    out << "}\n";
    return out.str();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return out.str();
}

JoinSpec parse_join_spec(const Json& j) {
    if (!j.is_object()) throw InvalidInput("join spec: expected an object");
    JoinSpec spec;
    const Json& f = field(j, "f", "join spec");
    if (!f.is_array() || f.empty()) throw InvalidInput("join spec: \"f\" must be a non-empty array of pairs");
    for (const auto& p : f) {
        if (!p.is_array() || p.size() != 2) throw InvalidInput("join spec: expected [negative, positive], got " + p.dump());
        spec.f.emplace_back(id_value(p[0], "join spec"), id_value(p[1], "join spec"));
    }
    if (j.contains("enclosing")) spec.enclosing = id_array(j["enclosing"], "join spec.enclosing");
    return spec;
}

// ------------------------------------------------------------------ reports

Json to_json(const ValidationReport& r) {
    Json clauses = Json::array();
    for (const auto& c : r.clauses) {
        clauses.push_back({{"clause", c.clause},
                           {"passed", c.passed},
                           {"witness", c.witness ? Json(*c.witness) : Json()},
                           {"detail", c.detail}});
    }
    return {{"ok", r.ok()}, {"clauses", std::move(clauses)}};
}

Json to_json(const ObliviousnessReport& r) {
    Json dist = Json::object();
    for (const auto& [e, d] : r.distance) dist[std::to_string(e)] = d;
    return {{"verdict", to_string(r.verdict)},
            {"distance", std::move(dist)},
            {"witnesses", r.witnesses},
            {"details", r.details}};
}

Json to_json(const DropReport& r) {
    Json entries = Json::array();
    for (const auto& e : r.entries) {
        Json ej{{"cut", id_list(e.cut)},
                {"cluster", id_list(e.cluster)},
                {"clique", e.clique},
                {"family", id_list(e.family)},
                {"min_eigenvalue", e.min_eigenvalue},
                {"pass", e.pass}};
        if (e.config) ej["configuration"] = id_list(*e.config);
        if (!e.pass) {
            ej["layout"] = layout_to_json(e.layout);
            Json w = Json::array();
            for (Eigen::Index i = 0; i < e.witness.size(); ++i) w.push_back({e.witness(i).real(), e.witness(i).imag()});
            ej["witness"] = std::move(w);
        }
        entries.push_back(std::move(ej));
    }
    return {{"verdict", to_string(r.verdict)}, {"tol", r.tol},         {"states", r.states},
            {"families", r.families},          {"terms", r.terms},     {"note", r.note},
            {"entries", std::move(entries)}};
}

Json to_json(const OracleReport& r) {
    Json j{{"verdict", to_string(r.verdict)},
           {"configurations", r.configurations},
           {"families", r.families},
           {"min_eigenvalue", r.min_eigenvalue},
           {"note", r.note}};
    if (r.failure) {
        Json fam = Json::array();
        for (const auto& y : r.failure->family) fam.push_back(id_list(y));
        j["failure"] = {{"configuration", id_list(r.failure->x)},
                        {"family", std::move(fam)},
                        {"min_eigenvalue", r.failure->min_eigenvalue}};
    }
    return j;
}

Json to_json(const CertificationReport& r) {
    Json sig = Json::array();
    for (const auto& i : r.signature) sig.push_back({{"node", i.node}, {"detail", i.detail}});
    Json j{{"verdict", to_string(r.certified())},
           {"signature", std::move(sig)},
           {"race_free", r.race_free},
           {"obliviousness", to_json(r.obliviousness)},
           {"drop", to_json(r.drop)}};
    if (r.corroboration) {
        j["corroboration"] = {{"events", r.corroboration->events},
                              {"obliviousness", to_string(r.corroboration->obliviousness)},
                              {"drop", to_string(r.corroboration->drop)},
                              {"note", r.corroboration->note}};
    }
    return j;
}

}  // namespace qpn
