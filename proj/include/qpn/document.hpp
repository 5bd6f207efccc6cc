#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "qpn/composition.hpp"

namespace qpn {

using Json = nlohmann::json;

inline constexpr const char* kFormatVersion = "1.0";

enum class NetKind { Petri, Occurrence };

std::string to_string(NetKind k);

/// One file format for Petri nets and occurrence nets.
///
///   {
///     "format_version": "1.0",
///     "kind": "petri" | "occurrence",
///     "places": [1, 2],
///     "transitions": [{"id": 3, "polarity": "+"}],
///     "flow": [[1, 3], [3, 2]],
///     "initial": [1],
///     "labels": {"7": 3},                      (optional)
///     "annotation": {                          (optional)
///       "qdim": {"1": 2, "2": 2},
///       "hdim": {"3": 1},
///       "maps": [{"event": 3, "input_dim": 2, "output_dim": 2,
///                 "kraus": [[[[re, im], ...], ...], ...]}]
///     },
///     "metadata": {...}                        (optional)
///   }
///
/// A map may give "choi" (one matrix) instead of "kraus". Complex entries
/// are [re, im] pairs; a bare number is read as a real entry.
struct NetDocument {
    std::string format_version = kFormatVersion;
    NetKind kind = NetKind::Petri;
    PetriNet net;
    std::optional<LocalAnnotation> annotation;
    std::map<NodeId, NodeId> labels;
    Json metadata = Json::object();

    /// Throws InvalidInput unless kind is occurrence and the net is valid.
    OccurrenceNet occurrence() const;
    AnnotatedNet annotated() const;
};

/// Throws InvalidInput on schema errors or unresolved ids.
NetDocument parse_document(const Json& j);
Json to_json(const NetDocument& doc);

NetDocument load_document(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const Json& j);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json map_to_json(const QuantumMap& m);
QuantumMap map_from_json(const Json& j);
Json layout_to_json(const FactorLayout& l);
Json operator_to_json(const GlobalOperator& op);

/// Conditions as circles, events as boxes labelled id and polarity sign;
/// initially marked places are filled.
std::string to_dot(const NetDocument& doc);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

/// Join spec file: {"f": [[negative, positive], ...], "enclosing": [...]}.
JoinSpec parse_join_spec(const Json& j);

// ------------------------------------------------------------------ reports

Json to_json(const ValidationReport& r);
Json to_json(const ObliviousnessReport& r);
Json to_json(const DropReport& r);
Json to_json(const OracleReport& r);
Json to_json(const CertificationReport& r);

}  // namespace qpn
