// qpn: validate, unfold, evaluate, certify and compose Quantum Petri Nets.
//
// Exit codes: 0 pass, 1 fail, 2 inconclusive, 3 input error.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qpn/document.hpp"
#include "qpn/errors.hpp"

namespace {

using namespace qpn;

enum Exit : int { kPass = 0, kFail = 1, kInconclusive = 2, kInputError = 3 };

int exit_code(Verdict v) {
    switch (v) {
        case Verdict::Pass: return kPass;
        case Verdict::Fail: return kFail;
        case Verdict::Inconclusive: return kInconclusive;
    }
    return kInputError;
}

Verdict combine(Verdict a, Verdict b) {
    if (a == Verdict::Fail || b == Verdict::Fail) return Verdict::Fail;
    if (a == Verdict::Inconclusive || b == Verdict::Inconclusive) return Verdict::Inconclusive;
    return Verdict::Pass;
}

struct Input {
    std::string path;
    std::string bytes;
    NetDocument doc;
};

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json parse_bytes(const std::string& path, const std::string& bytes) {
    try {
        return Json::parse(bytes);
    } catch (const Json::parse_error& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

Input load(const std::string& path) {
    Input in{path, read_bytes(path), {}};
    try {
        in.doc = parse_document(parse_bytes(path, in.bytes));
    } catch (const InvalidInput& e) {
        throw InvalidInput(path + ": " + e.what());
    }
    return in;
}

Marking parse_marking(const std::string& text) {
    Marking m;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            m.insert(static_cast<NodeId>(std::stoll(item, &used)));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidInput("marking: '" + item + "' is not a node id");
        }
    }
    return m;
}

/// Report skeleton shared by every command; timings are filled in last.
class Report {
public:
    explicit Report(std::string command) : start_(std::chrono::steady_clock::now()) {
        json_["command"] = std::move(command);
        json_["inputs"] = Json::array();
    }

    void input(const std::string& path, const std::string& bytes) {
        json_["inputs"].push_back({{"path", path}, {"sha256", sha256_hex(bytes)}});
    }

    Json& operator[](const char* key) { return json_[key]; }

    Json finish() {
        const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
        json_["timings"] = {{"total_ms", ms}};
        return json_;
    }

private:
    Json json_;
    std::chrono::steady_clock::time_point start_;
};

void emit(const Json& j, const std::string& path) {
    if (path.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        save_json(path, j);
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path);
    out << text;
}

// ------------------------------------------------------------------ commands

int cmd_validate(const std::string& file, std::size_t max_states) {
    Input in = load(file);
    Report report("validate");
    report.input(in.path, in.bytes);
    report["kind"] = to_string(in.doc.kind);
    const NetSkeleton& s = in.doc.net.skeleton();
    ValidationReport v;
    Verdict verdict = Verdict::Pass;
    if (in.doc.kind == NetKind::Occurrence) {
        v = validate_occurrence_net(s, in.doc.net.initial_marking());
    } else {
        try {
            const auto markings = reachable_markings(in.doc.net, kUnbounded, max_states);
            v.pass("safe");
            report["reachable_markings"] = markings.size();
        } catch (const SafetyViolation& e) {
            v.fail("safe", std::nullopt, e.what());
        } catch (const CapExceeded& e) {
            verdict = Verdict::Inconclusive;
            report["note"] = e.what();
        }
    }
    if (in.doc.annotation) {
        const auto issues = signature_issues(s, *in.doc.annotation);
        if (issues.empty()) {
            v.pass("annotation-signatures");
        } else {
            v.fail("annotation-signatures", issues.front().node, issues.front().detail);
        }
        Json all = Json::array();
        for (const auto& i : issues) all.push_back({{"node", i.node}, {"detail", i.detail}});
        report["signature_issues"] = std::move(all);
    }
    if (!v.ok()) verdict = Verdict::Fail;
    report["validation"] = to_json(v);
    report["verdict"] = to_string(verdict);
    emit(report.finish(), "");
    return exit_code(verdict);
}

int cmd_unfold(const std::string& file, const UnfoldLimit& limit, const std::string& out, const std::string& dot,
               const std::string& report_path) {
    Input in = load(file);
    Report report("unfold");
    report.input(in.path, in.bytes);
    report["bounds"] = {{"depth", limit.max_depth}, {"max_events", limit.max_events}};
    const BranchingProcess bp = unfold(in.doc.net, limit);
    NetDocument prefix;
    prefix.kind = NetKind::Occurrence;
    prefix.net = bp.occ.as_petri_net();
    prefix.labels = bp.labels;
    if (in.doc.annotation) prefix.annotation = lift_annotation(bp, *in.doc.annotation);
    prefix.metadata = {{"source_sha256", sha256_hex(in.bytes)}, {"saturated", bp.saturated}};
    const ValidationReport v = validate_branching_process(in.doc.net, bp);
    report["events"] = bp.occ.events().size();
    report["conditions"] = bp.occ.conditions().size();
    report["saturated"] = bp.saturated;
    report["validation"] = to_json(v);
    report["verdict"] = to_string(v.ok() ? Verdict::Pass : Verdict::Fail);
    emit(to_json(prefix), out);
    if (!dot.empty()) write_text(dot, to_dot(prefix));
    if (!report_path.empty()) save_json(report_path, report.finish());
    return v.ok() ? kPass : kFail;
}

struct CheckArgs {
    std::string mode = "local";
    double tol = kDefaultTolerance;
    std::size_t max_configs = 4096;
    std::size_t max_family = 3;
    unsigned workers = 1;
    UnfoldLimit limit;
    std::string report;
};

int cmd_check(const std::string& file, const CheckArgs& args) {
    Input in = load(file);
    if (!in.doc.annotation) throw InvalidInput(file + ": check needs an annotation");
    const LocalAnnotation& ann = *in.doc.annotation;
    Report report("check");
    report.input(in.path, in.bytes);
    report["mode"] = args.mode;
    report["bounds"] = {{"tol", args.tol},
                        {"max_configs", args.max_configs},
                        {"max_family", args.max_family},
                        {"workers", args.workers}};

    DropBounds drop;
    drop.max_states = args.max_configs;
    drop.workers = args.workers;
    Verdict verdict = Verdict::Pass;
    std::optional<Verdict> local_verdict;
    std::optional<Verdict> oracle_verdict;

    if (args.mode == "local" || args.mode == "both") {
        CertificationReport cert;
        if (in.doc.kind == NetKind::Occurrence) {
            const OccurrenceNet o = in.doc.occurrence();
            cert.signature = signature_issues(o.skeleton(), ann);
            cert.race_free = is_race_free(o.skeleton());
            if (cert.signature.empty()) {
                cert.obliviousness = check_local_obliviousness(o.skeleton(), ann, args.tol);
                cert.drop = check_local_drop(o, ann, drop, args.tol);
            }
        } else {
            CertifyOptions options;
            options.drop = drop;
            options.tol = args.tol;
            cert = certify_qpn(in.doc.net, ann, options);
        }
        local_verdict = cert.certified();
        report["local"] = to_json(cert);
    }
    if (args.mode == "oracle" || args.mode == "both") {
        OracleBounds bounds;
        bounds.max_configs = args.max_configs;
        bounds.max_family = args.max_family;
        Json oracle;
        const auto issues = signature_issues(in.doc.net.skeleton(), ann);
        if (!issues.empty()) {
            oracle_verdict = Verdict::Fail;
            oracle["note"] = "annotation signatures do not match: node " + std::to_string(issues.front().node);
        } else if (in.doc.kind == NetKind::Occurrence) {
            const OracleReport r = global_drop_oracle(in.doc.occurrence(), ann, bounds, args.tol);
            oracle_verdict = r.verdict;
            oracle = to_json(r);
        } else {
            // A Petri net is examined on an unfolding prefix; a pass only
            // counts when the prefix is the whole unfolding.
            const BranchingProcess bp = unfold(in.doc.net, args.limit);
            const LocalAnnotation lifted = lift_annotation(bp, ann);
            OracleReport r = global_drop_oracle(bp.occ, lifted, bounds, args.tol);
            std::size_t deepest = 0;
            for (const auto& [e, d] : bp.depth) deepest = std::max(deepest, d);
            const bool complete = bp.saturated && deepest < args.limit.max_depth;
            if (r.verdict == Verdict::Pass && !complete) {
                r.verdict = Verdict::Inconclusive;
                r.note = "pass on a proper unfolding prefix only";
            }
            oracle_verdict = r.verdict;
            oracle = to_json(r);
            oracle["prefix_events"] = bp.occ.events().size();
        }
        report["oracle"] = std::move(oracle);
    }
    if (local_verdict) verdict = combine(verdict, *local_verdict);
    if (oracle_verdict) verdict = combine(verdict, *oracle_verdict);
    if (local_verdict && oracle_verdict) {
        const bool decisive = *local_verdict != Verdict::Inconclusive && *oracle_verdict != Verdict::Inconclusive;
        report["agree"] = decisive ? Json(*local_verdict == *oracle_verdict) : Json();
    }
    report["verdict"] = to_string(verdict);
    const Json j = report.finish();
    emit(j, "");
    if (!args.report.empty()) save_json(args.report, j);
    return exit_code(verdict);
}

int cmd_eval(const std::string& file, const std::string& from, const std::string& to) {
    Input in = load(file);
    if (!in.doc.annotation) throw InvalidInput(file + ": eval needs an annotation");
    const OccurrenceNet o = in.doc.occurrence();
    check_signatures(o.skeleton(), *in.doc.annotation);
    const Marking m = from.empty() ? o.initial_cut() : parse_marking(from);
    const Marking m2 = parse_marking(to);
    Report report("eval");
    report.input(in.path, in.bytes);
    report["from"] = std::vector<NodeId>(m.begin(), m.end());
    report["to"] = std::vector<NodeId>(m2.begin(), m2.end());
    report["operator"] = operator_to_json(canonicalize(induced_global(o, *in.doc.annotation, m, m2)));
    report["verdict"] = to_string(Verdict::Pass);
    emit(report.finish(), "");
    return kPass;
}

Verdict certify_input(const Input& in, const CertifyOptions& options, Json& into) {
    if (!in.doc.annotation) throw InvalidInput(in.path + ": an annotation is required");
    const CertificationReport cert = certify_qpn(in.doc.net, *in.doc.annotation, options);
    into.push_back({{"path", in.path}, {"certification", to_json(cert)}});
    return cert.certified();
}

NetDocument result_document(const AnnotatedNet& n, NetKind kind, Json metadata) {
    NetDocument doc;
    doc.kind = kind;
    doc.net = n.net;
    doc.annotation = n.ann;
    doc.metadata = std::move(metadata);
    return doc;
}

int cmd_compose(const std::string& a, const std::string& b, const std::string& out, const std::string& report_path) {
    Input left = load(a);
    Input right = load(b);
    Report report("compose");
    report.input(left.path, left.bytes);
    report.input(right.path, right.bytes);
    Json sources = Json::array();
    const Verdict v = combine(certify_input(left, {}, sources), certify_input(right, {}, sources));
    report["sources"] = std::move(sources);
    if (v != Verdict::Pass) {
        report["verdict"] = to_string(v);
        report["note"] = "both operands must be certified";
        emit(report.finish(), report_path);
        return exit_code(v);
    }
    const ParallelComposition pc = parallel_compose(left.doc.annotated(), right.doc.annotated());
    const Verdict after = pc.recheck ? pc.recheck->certified() : Verdict::Pass;
    report["right_offset"] = pc.right_offset;
    if (pc.recheck) report["recheck"] = to_json(*pc.recheck);
    report["verdict"] = to_string(after);
    const NetKind kind = left.doc.kind == NetKind::Occurrence && right.doc.kind == NetKind::Occurrence
                             ? NetKind::Occurrence
                             : NetKind::Petri;
    emit(to_json(result_document(pc.result, kind, {{"right_offset", pc.right_offset}})), out);
    if (!report_path.empty()) save_json(report_path, report.finish());
    return exit_code(after);
}

int cmd_join(const std::string& spec_path, const std::string& file, const std::string& out,
             const std::string& report_path) {
    Input in = load(file);
    const std::string spec_bytes = read_bytes(spec_path);
    JoinSpec spec;
    try {
        spec = parse_join_spec(parse_bytes(spec_path, spec_bytes));
    } catch (const InvalidInput& e) {
        throw InvalidInput(spec_path + ": " + e.what());
    }
    Report report("join");
    report.input(in.path, in.bytes);
    report.input(spec_path, spec_bytes);
    const AnnotatedNet n = in.doc.annotated();
    const ValidationReport v = validate_drop_preserving(n, spec);
    report["validation"] = to_json(v);
    if (!v.ok()) {
        report["verdict"] = to_string(Verdict::Fail);
        emit(report.finish(), report_path);
        return kFail;
    }
    Json sources = Json::array();
    const Verdict cert = certify_input(in, {}, sources);
    report["sources"] = std::move(sources);
    if (cert != Verdict::Pass) {
        report["verdict"] = to_string(cert);
        report["note"] = "the source net must be certified";
        emit(report.finish(), report_path);
        return exit_code(cert);
    }
    const DropPreservingJoin j = drop_preserving_join(n, spec);
    Json joined = Json::array();
    for (const auto& e : j.joined) joined.push_back({{"id", e.id}, {"positive", e.positive}, {"negative", e.negative}});
    report["joined"] = std::move(joined);
    report["race_free"] = j.race_free;
    report["clusters_match"] = j.clusters_match;
    Verdict after = j.race_free && j.clusters_match ? Verdict::Pass : Verdict::Fail;
    if (j.recheck) {
        report["recheck"] = to_json(*j.recheck);
        after = combine(after, j.recheck->certified());
    }
    report["verdict"] = to_string(after);
    emit(to_json(result_document(j.result, in.doc.kind, Json::object())), out);
    if (!report_path.empty()) save_json(report_path, report.finish());
    return exit_code(after);
}

int cmd_export_dot(const std::string& file, const std::string& out) {
    const Input in = load(file);
    const std::string dot = to_dot(in.doc);
    if (out.empty()) {
        std::cout << dot;
    } else {
        write_text(out, dot);
    }
    return kPass;
}

void apply_dimension_override() {
    const char* env = std::getenv("QPN_MAX_DIM");
    if (env == nullptr || *env == '\0') return;
    try {
        std::size_t used = 0;
        const auto cap = std::stoull(env, &used);
        if (used != std::string(env).size() || cap == 0) throw std::invalid_argument(env);
        set_max_dimension(static_cast<std::size_t>(cap));
    } catch (const std::exception&) {
        throw InvalidInput(std::string("QPN_MAX_DIM must be a positive integer, got '") + env + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum Petri Net toolkit"};
    app.require_subcommand(1);

    std::string file, file2, out, dot, report_path, from, to, spec;
    std::size_t max_states = kDefaultStateCap;
    UnfoldLimit limit;
    CheckArgs check;

    auto* validate = app.add_subcommand("validate", "Structural checks and annotation signatures");
    validate->add_option("file", file, "Net document")->required();
    validate->add_option("--max-states", max_states, "Reachable-marking cap for the safety check");

    auto* unfold_cmd = app.add_subcommand("unfold", "Depth-bounded unfolding prefix");
    unfold_cmd->add_option("file", file, "Petri net document")->required();
    unfold_cmd->add_option("--depth", limit.max_depth, "Causal depth bound");
    unfold_cmd->add_option("--max-events", limit.max_events, "Event budget");
    unfold_cmd->add_option("-o,--output", out, "Write the prefix here instead of stdout");
    unfold_cmd->add_option("--dot", dot, "Also write the prefix as DOT");
    unfold_cmd->add_option("--report", report_path, "Write a JSON report");

    auto* check_cmd = app.add_subcommand("check", "Local drop condition and/or the global oracle");
    check_cmd->add_option("file", file, "Annotated net document")->required();
    check_cmd->add_option("--mode", check.mode, "local, oracle or both")
        ->check(CLI::IsMember({"local", "oracle", "both"}));
    check_cmd->add_option("--tol", check.tol, "Eigenvalue tolerance")->check(CLI::PositiveNumber);
    check_cmd->add_option("--max-configs", check.max_configs, "Configuration / marking cap");
    check_cmd->add_option("--max-family", check.max_family, "Oracle family size bound");
    check_cmd->add_option("--workers", check.workers, "Worker threads for the local check");
    check_cmd->add_option("--depth", check.limit.max_depth, "Unfolding depth for the oracle on Petri nets");
    check_cmd->add_option("--max-events", check.limit.max_events, "Unfolding event budget for the oracle");
    check_cmd->add_option("--report", check.report, "Also write the report here");

    auto* eval_cmd = app.add_subcommand("eval", "Induced map between two reachable markings");
    eval_cmd->add_option("file", file, "Annotated occurrence net")->required();
    eval_cmd->add_option("--from", from, "Comma-separated condition ids (default: initial cut)");
    eval_cmd->add_option("--to", to, "Comma-separated condition ids")->required();

    auto* compose_cmd = app.add_subcommand("compose", "Parallel composition of two certified nets");
    compose_cmd->add_flag("--parallel", "Parallel composition (the only mode)");
    compose_cmd->add_option("a", file, "Left operand")->required();
    compose_cmd->add_option("b", file2, "Right operand")->required();
    compose_cmd->add_option("-o,--output", out, "Write the result here instead of stdout");
    compose_cmd->add_option("--report", report_path, "Write a JSON report");

    auto* join_cmd = app.add_subcommand("join", "Drop-preserving join");
    join_cmd->add_option("--spec", spec, "Join spec: {\"f\": [[negative, positive], ...]}")->required();
    join_cmd->add_option("file", file, "Annotated net document")->required();
    join_cmd->add_option("-o,--output", out, "Write the result here instead of stdout");
    join_cmd->add_option("--report", report_path, "Write a JSON report");

    auto* dot_cmd = app.add_subcommand("export-dot", "Graphviz rendering of a net");
    dot_cmd->add_option("file", file, "Net document")->required();
    dot_cmd->add_option("-o,--output", out, "Write here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kInputError;
    }

    try {
        apply_dimension_override();
        if (*validate) return cmd_validate(file, max_states);
        if (*unfold_cmd) return cmd_unfold(file, limit, out, dot, report_path);
        if (*check_cmd) return cmd_check(file, check);
        if (*eval_cmd) return cmd_eval(file, from, to);
        if (*compose_cmd) return cmd_compose(file, file2, out, report_path);
        if (*join_cmd) return cmd_join(spec, file, out, report_path);
        if (*dot_cmd) return cmd_export_dot(file, out);
    } catch (const CapExceeded& e) {
        std::cerr << "qpn: bound exceeded: " << e.what() << '\n';
        return kInconclusive;
    } catch (const Error& e) {
        std::cerr << "qpn: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "qpn: " << e.what() << '\n';
        return kInputError;
    }
    return kInputError;
}
