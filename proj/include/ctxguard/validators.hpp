#pragma once

// Direct-identifier gauntlet plus the borderline "no QI cluster of size >= 2"
// rule. Everything here is declarative: patterns, the recognized-first-name
// list, and the QI lexicons ship as data files so domain reviewers can grow
// them without a rebuild.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxguard/record.hpp"

namespace ctxguard {

enum class ChecksumKind { none, luhn, aba };

inline ChecksumKind checksum_from_string(const std::string& s) {
    if (s == "none") return ChecksumKind::none;
    if (s == "luhn") return ChecksumKind::luhn;
    if (s == "aba") return ChecksumKind::aba;
    throw ConfigError("unknown checksum kind: '" + s + "'");
}

struct PatternRule {
    std::string id;
    std::string pattern;
    ChecksumKind checksum = ChecksumKind::none;
    std::string reason;
    std::regex re;
};

struct Violation {
    std::string rule_id;
    std::string span;
    std::string reason;

    bool operator==(const Violation& o) const {
        return rule_id == o.rule_id && span == o.span && reason == o.reason;
    }
};

struct ValidationVerdict {
    bool accepted = true;
    std::vector<Violation> violations;
    std::vector<std::string> warnings;  // advisory only; never affect accepted
};

struct ValidatorRuleSet {
    Domain domain = Domain::medical;
    std::vector<PatternRule> universal_rules;
    std::vector<PatternRule> domain_rules;
    std::set<std::string> name_list;
    std::map<AdversarialMode, std::vector<std::string>> forbidden_vocab;
    std::map<QiClass, std::vector<std::regex>> qi_lexicons;
};

// ---- checksums -------------------------------------------------------------

inline bool luhn_valid(const std::string& digits) {
    if (digits.empty()) return false;
    int sum = 0;
    bool dbl = false;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        if (!std::isdigit(static_cast<unsigned char>(*it))) return false;
        int v = *it - '0';
        if (dbl) {
            v *= 2;
            if (v > 9) v -= 9;
        }
        sum += v;
        dbl = !dbl;
    }
    return sum % 10 == 0;
}

// ABA routing check digit: 3-7-1 repeating weights over the nine digits.
inline bool aba_valid(const std::string& digits) {
    if (digits.size() != 9) return false;
    static const int w[9] = {3, 7, 1, 3, 7, 1, 3, 7, 1};
    int sum = 0;
    bool nonzero = false;
    for (int i = 0; i < 9; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(digits[i]))) return false;
        if (digits[i] != '0') nonzero = true;
        sum += w[i] * (digits[i] - '0');
    }
    return nonzero && sum % 10 == 0;
}

namespace detail {

inline std::string digits_of(const std::string& s) {
    std::string out;
    for (char c : s)
        if (std::isdigit(static_cast<unsigned char>(c))) out.push_back(c);
    return out;
}

inline bool checksum_passes(ChecksumKind kind, const std::string& span) {
    switch (kind) {
        case ChecksumKind::none: return true;
        case ChecksumKind::luhn: return luhn_valid(digits_of(span));
        case ChecksumKind::aba: return aba_valid(digits_of(span));
    }
    return false;
}

inline void apply_rules(const std::string& text,
                        const std::vector<PatternRule>& rules,
                        std::vector<Violation>& out) {
    for (const auto& rule : rules) {
        for (auto it = std::sregex_iterator(text.begin(), text.end(), rule.re);
             it != std::sregex_iterator(); ++it) {
            const std::string span = it->str();
            if (!checksum_passes(rule.checksum, span)) continue;
            out.push_back({rule.id, span, rule.reason});
        }
    }
}

struct Token {
    std::string word;
    std::size_t begin = 0;
    bool after_comma = false;  // the previous non-space character was a comma
};

inline std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> out;
    std::size_t i = 0;
    char prev_sep = '\0';
    while (i < text.size()) {
        const unsigned char c = text[i];
        if (std::isalpha(c)) {
            Token t;
            t.begin = i;
            t.after_comma = prev_sep == ',';
            while (i < text.size() &&
                   (std::isalpha(static_cast<unsigned char>(text[i])) ||
                    text[i] == '\''))
                t.word.push_back(text[i++]);
            out.push_back(std::move(t));
            prev_sep = '\0';
        } else {
            if (!std::isspace(c)) prev_sep = static_cast<char>(c);
            ++i;
        }
    }
    return out;
}

inline bool title_cased(const std::string& w) {
    if (w.size() < 2) return false;
    if (!std::isupper(static_cast<unsigned char>(w[0]))) return false;
    for (std::size_t i = 1; i < w.size(); ++i)
        if (!std::islower(static_cast<unsigned char>(w[i]))) return false;
    return true;
}

inline bool is_title_prefix(const std::string& w) {
    static const std::set<std::string> kPrefixes{
        "Mr", "Ms", "Mrs", "Dr", "Prof", "Judge", "Justice", "Hon", "Atty"};
    return kPrefixes.count(w) > 0;
}

}  // namespace detail

// Name-leak detector. Surname-only case citations (Brown v. Board of
// Education) pass because no token there is a recognized *first* name; a
// named individual is flagged on any of:
//   - a title prefix (Mr./Ms./Dr./Judge/...) followed by a title-cased token,
//   - a recognized first name followed by two title-cased tokens (full name),
//   - a recognized first name introduced in apposition after a comma
//     ("a recent widow, Jane").
inline std::vector<Violation> check_names(const std::string& text,
                                          const std::set<std::string>& names) {
    std::vector<Violation> out;
    const auto toks = detail::tokenize(text);
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const auto& t = toks[i];
        if (detail::is_title_prefix(t.word) && i + 1 < toks.size() &&
            detail::title_cased(toks[i + 1].word)) {
            out.push_back({"name_title_prefix", t.word + " " + toks[i + 1].word,
                           "title prefix followed by a proper name"});
            continue;
        }
        if (!detail::title_cased(t.word) || names.count(t.word) == 0) continue;
        if (i + 2 < toks.size() && detail::title_cased(toks[i + 1].word) &&
            detail::title_cased(toks[i + 2].word)) {
            out.push_back({"name_full",
                           t.word + " " + toks[i + 1].word + " " + toks[i + 2].word,
                           "recognized first name followed by two title-cased tokens"});
        } else if (t.after_comma) {
            out.push_back({"name_apposition", t.word,
                           "recognized first name introduced in apposition"});
        }
    }
    return out;
}

// Distinct QI classes with at least one lexicon hit in the text.
inline std::set<QiClass> qi_cluster_classes(const std::string& text,
                                            const ValidatorRuleSet& rules) {
    std::set<QiClass> hit;
    for (const auto& [cls, patterns] : rules.qi_lexicons) {
        for (const auto& re : patterns) {
            if (std::regex_search(text, re)) {
                hit.insert(cls);
                break;
            }
        }
    }
    return hit;
}

namespace detail {

inline void check_forbidden_vocab(const Record& r, const ValidatorRuleSet& rules,
                                  std::vector<Violation>& out) {
    if (!r.axes || r.axes->adversarial_mode == AdversarialMode::none) return;
    const auto it = rules.forbidden_vocab.find(r.axes->adversarial_mode);
    if (it == rules.forbidden_vocab.end()) return;
    for (const auto& word : it->second) {
        const std::regex re("\\b" + word + "\\b",
                            std::regex::ECMAScript | std::regex::icase);
        if (std::regex_search(r.answer, re)) {
            out.push_back({"forbidden_vocab", word,
                           "vocabulary forbidden by the adversarial prompt"});
        }
    }
}

inline void run_direct_id_gauntlet(const Record& r,
                                   const ValidatorRuleSet& rules,
                                   std::vector<Violation>& out) {
    for (const std::string* text : {&r.question, &r.answer}) {
        apply_rules(*text, rules.universal_rules, out);
        apply_rules(*text, rules.domain_rules, out);
        for (auto& v : check_names(*text, rules.name_list))
            out.push_back(std::move(v));
    }
}

}  // namespace detail

inline ValidationVerdict validate_unsafe(const Record& r,
                                         const ValidatorRuleSet& rules) {
    if (r.label != Label::unsafe_)
        throw ValidationError("validate_unsafe: record is not labeled unsafe");
    ValidationVerdict v;
    detail::run_direct_id_gauntlet(r, rules, v.violations);
    detail::check_forbidden_vocab(r, rules, v.violations);
    v.accepted = v.violations.empty();
    return v;
}

inline ValidationVerdict validate_borderline(const Record& r,
                                             const ValidatorRuleSet& rules) {
    if (r.label != Label::borderline_safe)
        throw ValidationError("validate_borderline: record is not labeled borderline_safe");
    ValidationVerdict v;
    detail::run_direct_id_gauntlet(r, rules, v.violations);
    const auto cluster = qi_cluster_classes(r.answer, rules);
    if (cluster.size() >= 2) {
        std::string span;
        for (QiClass c : cluster) {
            if (!span.empty()) span += "+";
            span += to_string(c);
        }
        v.violations.push_back(
            {"qi_cluster", span, "answer carries a QI cluster of size >= 2"});
    }
    if (trim(r.answer).empty()) v.warnings.push_back("empty answer");
    v.accepted = v.violations.empty();
    return v;
}

// Label-dispatched entry point used by the CLI and the campaign loop.
// Safe records run the direct-identifier gauntlet only.
inline ValidationVerdict validate_record(const Record& r,
                                         const ValidatorRuleSet& rules) {
    switch (r.label) {
        case Label::unsafe_: return validate_unsafe(r, rules);
        case Label::borderline_safe: return validate_borderline(r, rules);
        case Label::safe: {
            ValidationVerdict v;
            detail::run_direct_id_gauntlet(r, rules, v.violations);
            v.accepted = v.violations.empty();
            return v;
        }
    }
    throw ValidationError("validate_record: unknown label");
}

// ---- rule-set loading ------------------------------------------------------

namespace detail {

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

inline std::vector<PatternRule> parse_rules(const nlohmann::json& arr) {
    std::vector<PatternRule> out;
    std::set<std::string> seen;
    for (const auto& j : arr) {
        PatternRule r;
        r.id = j.at("id").get<std::string>();
        r.pattern = j.at("pattern").get<std::string>();
        r.checksum = checksum_from_string(j.value("checksum", "none"));
        r.reason = j.at("reason").get<std::string>();
        if (r.id.empty() || r.reason.empty())
            throw ConfigError("pattern rule needs a stable id and a reason");
        if (!seen.insert(r.id).second)
            throw ConfigError("duplicate rule id: '" + r.id + "'");
        try {
            r.re = std::regex(r.pattern,
                              std::regex::ECMAScript | std::regex::icase);
        } catch (const std::regex_error& e) {
            throw ConfigError("rule '" + r.id + "': bad pattern: " + e.what());
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace detail

// Loads one domain's declarative rule file. Relative name-list / lexicon
// paths resolve against the rule file's directory.
inline ValidatorRuleSet load_rule_set(const std::filesystem::path& rule_file) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_text_file(rule_file));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("rule file " + rule_file.string() + ": " + e.what());
    }
    const auto base = rule_file.parent_path();
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return path.is_absolute() ? path : base / path;
    };

    ValidatorRuleSet rs;
    rs.domain = domain_from_string(j.at("domain").get<std::string>());
    rs.universal_rules = detail::parse_rules(j.at("universal_rules"));
    rs.domain_rules = detail::parse_rules(j.at("domain_rules"));

    // name list: one recognized first name per non-empty line
    const std::string names_text =
        detail::read_text_file(resolve(j.at("name_list").get<std::string>()));
    std::size_t pos = 0;
    while (pos <= names_text.size()) {
        const auto nl = names_text.find('\n', pos);
        const std::string line = trim(
            names_text.substr(pos, nl == std::string::npos ? nl : nl - pos));
        if (!line.empty()) rs.name_list.insert(line);
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    if (rs.name_list.empty()) throw ConfigError("empty name list");

    const nlohmann::json lex = nlohmann::json::parse(
        detail::read_text_file(resolve(j.at("qi_lexicon").get<std::string>())));
    for (const auto& [key, patterns] : lex.items()) {
        const QiClass cls = qi_class_from_string(key);
        for (const auto& p : patterns) {
            // lexicon patterns are case-sensitive: several rely on title
            // casing ("from [A-Z]...") to separate names of places from prose
            try {
                rs.qi_lexicons[cls].emplace_back(p.get<std::string>(),
                                                 std::regex::ECMAScript);
            } catch (const std::regex_error& e) {
                throw ConfigError("qi lexicon '" + key + "': " + e.what());
            }
        }
    }

    if (j.contains("forbidden_vocab")) {
        for (const auto& [mode, words] : j.at("forbidden_vocab").items()) {
            auto& list = rs.forbidden_vocab[adversarial_mode_from_string(mode)];
            for (const auto& w : words) list.push_back(w.get<std::string>());
        }
    }
    return rs;
}

}  // namespace ctxguard
