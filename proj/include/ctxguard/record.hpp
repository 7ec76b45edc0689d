#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "ctxguard/common.hpp"

namespace ctxguard {

using json = nlohmann::json;

enum class Domain { medical, finance, law };
enum class Label { safe, unsafe_, borderline_safe };
enum class QiClass {
    age,
    occupation,
    location,
    affiliation,
    family,
    domain_specific_1,
    domain_specific_2,
    domain_specific_3,
};
enum class Framing {
    case_voice,
    implicit_case,
    referral,
    third_party_summary,
    intake_note,
    follow_up,
};
enum class Placement { frame_opening, distributed, mid_answer, closing };
enum class AdversarialMode { none, indirect_qi, distractor_padded, style_transfer };
enum class BorderlineSubtype {
    population_demographics,
    public_guideline_quote,
    second_person_education,
    anonymized_case_report,
    empathetic_deflection,
};

inline constexpr int kQiClassCount = 8;
inline constexpr int kFramingCount = 6;
inline constexpr int kPlacementCount = 4;
inline constexpr int kSubtypeCount = 5;

namespace detail {

template <typename E, std::size_t N>
struct EnumNames {
    std::array<const char*, N> names;

    const char* to_string(E v) const {
        return names[static_cast<std::size_t>(v)];
    }
    E from_string(const std::string& s, const char* what) const {
        for (std::size_t i = 0; i < N; ++i) {
            if (s == names[i]) return static_cast<E>(i);
        }
        throw ValidationError(std::string("unknown ") + what + ": '" + s + "'");
    }
};

inline const EnumNames<Domain, 3> kDomainNames{{"medical", "finance", "law"}};
inline const EnumNames<Label, 3> kLabelNames{{"safe", "unsafe", "borderline_safe"}};
inline const EnumNames<QiClass, 8> kQiClassNames{
    {"age", "occupation", "location", "affiliation", "family",
     "domain_specific_1", "domain_specific_2", "domain_specific_3"}};
inline const EnumNames<Framing, 6> kFramingNames{
    {"case_voice", "implicit_case", "referral", "third_party_summary",
     "intake_note", "follow_up"}};
inline const EnumNames<Placement, 4> kPlacementNames{
    {"frame_opening", "distributed", "mid_answer", "closing"}};
inline const EnumNames<AdversarialMode, 4> kAdvModeNames{
    {"none", "indirect_qi", "distractor_padded", "style_transfer"}};
inline const EnumNames<BorderlineSubtype, 5> kSubtypeNames{
    {"population_demographics", "public_guideline_quote",
     "second_person_education", "anonymized_case_report",
     "empathetic_deflection"}};

}  // namespace detail

inline const char* to_string(Domain v) { return detail::kDomainNames.to_string(v); }
inline const char* to_string(Label v) { return detail::kLabelNames.to_string(v); }
inline const char* to_string(QiClass v) { return detail::kQiClassNames.to_string(v); }
inline const char* to_string(Framing v) { return detail::kFramingNames.to_string(v); }
inline const char* to_string(Placement v) { return detail::kPlacementNames.to_string(v); }
inline const char* to_string(AdversarialMode v) { return detail::kAdvModeNames.to_string(v); }
inline const char* to_string(BorderlineSubtype v) { return detail::kSubtypeNames.to_string(v); }

inline Domain domain_from_string(const std::string& s) {
    return detail::kDomainNames.from_string(s, "domain");
}
inline Label label_from_string(const std::string& s) {
    return detail::kLabelNames.from_string(s, "label");
}
inline QiClass qi_class_from_string(const std::string& s) {
    return detail::kQiClassNames.from_string(s, "qi class");
}
inline Framing framing_from_string(const std::string& s) {
    return detail::kFramingNames.from_string(s, "framing");
}
inline Placement placement_from_string(const std::string& s) {
    return detail::kPlacementNames.from_string(s, "placement");
}
inline AdversarialMode adversarial_mode_from_string(const std::string& s) {
    return detail::kAdvModeNames.from_string(s, "adversarial mode");
}
inline BorderlineSubtype subtype_from_string(const std::string& s) {
    return detail::kSubtypeNames.from_string(s, "borderline subtype");
}

// Per-domain display name of a QI class (the shared classes read the same in
// every domain; the three domain-specific slots differ).
inline const char* qi_display_name(Domain d, QiClass q) {
    switch (q) {
        case QiClass::age: return "Age / Date of Birth";
        case QiClass::occupation: return "Occupation / Job Title";
        case QiClass::location: return "City / Region / Zip";
        case QiClass::affiliation: return "Employer / Organization";
        case QiClass::family:
            switch (d) {
                case Domain::medical: return "Family members";
                case Domain::finance: return "Dependents";
                case Domain::law: return "Heirs";
            }
            break;
        case QiClass::domain_specific_1:
            switch (d) {
                case Domain::medical: return "Condition";
                case Domain::finance: return "Asset Class";
                case Domain::law: return "Matter Type";
            }
            break;
        case QiClass::domain_specific_2:
            switch (d) {
                case Domain::medical: return "Treatment";
                case Domain::finance: return "Income Band";
                case Domain::law: return "Procedural Role";
            }
            break;
        case QiClass::domain_specific_3:
            switch (d) {
                case Domain::medical: return "Visit Pattern";
                case Domain::finance: return "Transactions";
                case Domain::law: return "Case Disposition";
            }
            break;
    }
    throw ConfigError("unmapped QI class");
}

struct AxisAssignment {
    std::set<QiClass> qi_types;  // |qi_types| = k, k in {2,3,4}
    Framing framing = Framing::case_voice;
    Placement placement = Placement::frame_opening;
    AdversarialMode adversarial_mode = AdversarialMode::none;

    void check() const {
        const auto k = qi_types.size();
        if (k < 2 || k > 4) {
            throw ValidationError("axes: |qi_types| must be 2, 3 or 4, got " +
                                  std::to_string(k));
        }
    }
};

// One Q&A pair with its label, provenance and generation metadata. The
// universal unit flowing through every module.
struct Record {
    std::string id;
    Domain domain = Domain::medical;
    std::string question;
    std::string answer;
    Label label = Label::safe;
    std::string generator;  // model identifier or "seed"; optional
    std::optional<AxisAssignment> axes;
    std::optional<BorderlineSubtype> subtype;
    std::string source;
    json extra = json::object();  // unknown keys, preserved on round-trip

    void check() const {
        if (id.empty()) throw ValidationError("record: id required");
        if (trim(question).empty())
            throw ValidationError("record " + id + ": question must be non-empty");
        if (trim(answer).empty())
            throw ValidationError("record " + id + ": answer must be non-empty");
        if (source.empty())
            throw ValidationError("record " + id + ": source required");
        if (label == Label::unsafe_ && !axes) {
            throw ValidationError("record " + id + ": axes required for label=unsafe");
        }
        if (label == Label::borderline_safe && !subtype) {
            throw ValidationError("record " + id +
                                  ": subtype required for label=borderline_safe");
        }
        if (axes) axes->check();
    }

    bool operator==(const Record& o) const {
        auto axes_eq = [&] {
            if (axes.has_value() != o.axes.has_value()) return false;
            if (!axes) return true;
            return axes->qi_types == o.axes->qi_types &&
                   axes->framing == o.axes->framing &&
                   axes->placement == o.axes->placement &&
                   axes->adversarial_mode == o.axes->adversarial_mode;
        };
        return id == o.id && domain == o.domain && question == o.question &&
               answer == o.answer && label == o.label && generator == o.generator &&
               subtype == o.subtype && source == o.source && axes_eq() &&
               extra == o.extra;
    }
};

inline json axes_to_json(const AxisAssignment& a) {
    json qi = json::array();
    for (auto q : a.qi_types) qi.push_back(to_string(q));  // set iterates sorted
    return json{{"qi_types", qi},
                {"framing", to_string(a.framing)},
                {"placement", to_string(a.placement)},
                {"adversarial_mode", to_string(a.adversarial_mode)}};
}

inline AxisAssignment axes_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("axes must be an object");
    AxisAssignment a;
    if (!j.contains("qi_types") || !j["qi_types"].is_array())
        throw ValidationError("axes.qi_types must be an array");
    for (const auto& q : j["qi_types"])
        a.qi_types.insert(qi_class_from_string(q.get<std::string>()));
    a.framing = framing_from_string(j.value("framing", "case_voice"));
    a.placement = placement_from_string(j.value("placement", "frame_opening"));
    a.adversarial_mode =
        adversarial_mode_from_string(j.value("adversarial_mode", "none"));
    return a;
}

// Canonical single-line form: sorted keys, no insignificant whitespace,
// trailing newline excluded. parse(serialize(r)) == r.
inline std::string serialize_record(const Record& r) {
    r.check();
    json j = r.extra.is_object() ? r.extra : json::object();
    j["id"] = r.id;
    j["domain"] = to_string(r.domain);
    j["question"] = r.question;
    j["answer"] = r.answer;
    j["label"] = to_string(r.label);
    j["source"] = r.source;
    if (!r.generator.empty()) j["generator"] = r.generator;
    if (r.axes) j["axes"] = axes_to_json(*r.axes);
    if (r.subtype) j["subtype"] = to_string(*r.subtype);
    return j.dump();  // nlohmann objects iterate in sorted key order
}

inline Record parse_record(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("record parse error: ") + e.what(),
                         e.byte > 0 ? e.byte - 1 : 0);
    }
    if (!j.is_object()) throw ParseError("record line is not an object", 0);

    Record r;
    auto require_string = [&](const char* key) -> std::string {
        if (!j.contains(key))
            throw ValidationError(std::string("record: missing required key '") +
                                  key + "'");
        if (!j[key].is_string())
            throw ValidationError(std::string("record: key '") + key +
                                  "' must be a string");
        return j[key].get<std::string>();
    };
    r.id = require_string("id");
    r.domain = domain_from_string(require_string("domain"));
    r.question = require_string("question");
    r.answer = require_string("answer");
    r.label = label_from_string(require_string("label"));
    r.source = require_string("source");
    if (j.contains("generator")) r.generator = j["generator"].get<std::string>();
    if (j.contains("axes")) r.axes = axes_from_json(j["axes"]);
    if (j.contains("subtype"))
        r.subtype = subtype_from_string(j["subtype"].get<std::string>());

    static const std::set<std::string> known = {
        "id", "domain", "question", "answer", "label",
        "source", "generator", "axes", "subtype"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) r.extra[it.key()] = it.value();
    }
    r.check();
    return r;
}

}  // namespace ctxguard
